import dataclasses
import struct
from functools import cached_property
from typing import Optional, Sequence

from nakalab.config import MAX_MONEY
from nakalab.crypto.ecc import PublicKey, Signature, Scalar, InvalidPublicKey, EccError, derive_public_key, sign
from nakalab.crypto.hashing import double_sha256
from nakalab.ledger.errors import MalformedTransaction, IndexOutOfRange, InvalidScript
from nakalab.ledger.script import LockingScript, DataEmbed, Witness
from nakalab.utils.data import ByteReader, TruncatedData

TX_MARKER = 0x01
WITNESS_SIZE = 65 + 32 + 32
_BLANK_WITNESS = bytes(WITNESS_SIZE)
COINBASE_TAG_SIZE = 12


@dataclasses.dataclass(frozen=True)
class OutPoint:
    txid: bytes
    index: int

    def __repr__(self):
        return f'OutPoint({self.txid.hex()[:16]}…:{self.index})'


@dataclasses.dataclass(frozen=True)
class TxOutput:
    amount: int
    script: LockingScript

    def __post_init__(self):
        if not 0 <= self.amount <= MAX_MONEY:
            raise MalformedTransaction(f'output amount out of range: {self.amount}')
        if isinstance(self.script, DataEmbed) and self.amount != 0:
            raise MalformedTransaction('embedded-data outputs must carry amount 0')

    def serialize(self) -> bytes:
        return struct.pack('<Q', self.amount) + self.script.serialize()


@dataclasses.dataclass(frozen=True)
class TxInput:
    outpoint: OutPoint
    witnesses: tuple[Witness, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'witnesses', tuple(tuple(w) for w in self.witnesses))


@dataclasses.dataclass(frozen=True)
class Transaction:
    inputs: tuple[TxInput, ...]
    outputs: tuple[TxOutput, ...]
    is_coinbase: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'inputs', tuple(self.inputs))
        object.__setattr__(self, 'outputs', tuple(self.outputs))
        if len(self.outputs) == 0:
            raise MalformedTransaction('transaction has no outputs')
        if self.is_coinbase and self.inputs:
            raise MalformedTransaction('coinbase transaction cannot have inputs')
        if not self.is_coinbase and not self.inputs:
            raise MalformedTransaction('non-coinbase transaction needs at least one input')

    def serialize(self, blank_witnesses: bool = False) -> bytes:
        parts = [bytes([TX_MARKER, 1 if self.is_coinbase else 0]), struct.pack('<I', len(self.inputs))]
        for inp in self.inputs:
            parts.append(inp.outpoint.txid + struct.pack('<IH', inp.outpoint.index, len(inp.witnesses)))
            for key, sig in inp.witnesses:
                parts.append(_BLANK_WITNESS if blank_witnesses else key.encode() + sig.to_bytes())
        parts.append(struct.pack('<I', len(self.outputs)))
        parts.extend(out.serialize() for out in self.outputs)
        return b''.join(parts)

    @cached_property
    def txid(self) -> bytes:
        return double_sha256(self.serialize())

    @cached_property
    def sighash(self) -> bytes:
        return double_sha256(self.serialize(blank_witnesses=True))

    @property
    def output_total(self) -> int:
        return sum(o.amount for o in self.outputs)

    def with_witnesses(self, index: int, witnesses: Sequence[Witness]) -> 'Transaction':
        inputs = list(self.inputs)
        inputs[index] = TxInput(inputs[index].outpoint, tuple(witnesses))
        return Transaction(tuple(inputs), self.outputs, self.is_coinbase)

    @classmethod
    def parse(cls, reader: ByteReader) -> 'Transaction':
        marker, coinbase_flag = reader.u8(), reader.u8()
        if marker != TX_MARKER or coinbase_flag not in (0, 1):
            raise MalformedTransaction(f'bad transaction header {marker:#04x}/{coinbase_flag:#04x}')
        inputs = []
        for _ in range(reader.u32()):
            outpoint = OutPoint(reader.read(32), reader.u32())
            witnesses = []
            for _ in range(reader.u16()):
                try:
                    key = PublicKey.decode(reader.read(65))
                    sig = Signature.from_bytes(reader.read(64))
                except (InvalidPublicKey, EccError) as e:
                    raise MalformedTransaction(f'bad witness: {e}') from e
                witnesses.append((key, sig))
            inputs.append(TxInput(outpoint, tuple(witnesses)))
        outputs = []
        for _ in range(reader.u32()):
            amount = reader.u64()
            outputs.append(TxOutput(amount, LockingScript.parse(reader)))
        return cls(tuple(inputs), tuple(outputs), coinbase_flag == 1)

    @classmethod
    def deserialize(cls, data: bytes) -> 'Transaction':
        reader = ByteReader(data)
        try:
            tx = cls.parse(reader)
        except (TruncatedData, InvalidScript) as e:
            raise MalformedTransaction(str(e)) from e
        if not reader.at_end():
            raise MalformedTransaction(f'{len(data) - reader.pos} trailing bytes after transaction')
        return tx


def txid(tx: Transaction) -> bytes:
    return tx.txid


def signing_digest(tx: Transaction, input_index: int) -> bytes:
    """Same digest for every input: the transaction with all witnesses zeroed."""
    if not 0 <= input_index < len(tx.inputs):
        raise IndexOutOfRange(f'input {input_index} of {len(tx.inputs)}')
    return tx.sighash


def sign_transaction(tx: Transaction, keys_per_input: Sequence[Sequence[Scalar]]) -> Transaction:
    if len(keys_per_input) != len(tx.inputs):
        raise IndexOutOfRange(f'{len(keys_per_input)} key lists for {len(tx.inputs)} inputs')
    pubkeys = [[derive_public_key(k) for k in keys] for keys in keys_per_input]
    # the digest only depends on witness counts, so placeholders fix the layout first
    unsigned = Transaction(tuple(TxInput(inp.outpoint, tuple((pk, Signature(0, 0)) for pk in pks))
                                 for inp, pks in zip(tx.inputs, pubkeys)), tx.outputs, tx.is_coinbase)
    digest = unsigned.sighash
    inputs = tuple(TxInput(inp.outpoint, tuple((pk, sign(k, digest)) for pk, k in zip(pks, keys)))
                   for inp, pks, keys in zip(tx.inputs, pubkeys, keys_per_input))
    return Transaction(inputs, tx.outputs, tx.is_coinbase)


def embed_document(doc_digest: bytes) -> TxOutput:
    return TxOutput(0, DataEmbed(doc_digest))


def coinbase_tag(height: int, extra_nonce: int = 0) -> bytes:
    return struct.pack('<IQ', height, extra_nonce)


def build_coinbase(height: int, script: LockingScript, value: int, extra_nonce: int = 0,
                   extra_outputs: Sequence[TxOutput] = ()) -> Transaction:
    """Coinbase paying `value` to `script`, tagged with height and extra-nonce so txids stay unique."""
    outputs = (TxOutput(value, script), TxOutput(0, DataEmbed(coinbase_tag(height, extra_nonce))),
               *extra_outputs)
    return Transaction((), outputs, is_coinbase=True)


def coinbase_height(tx: Transaction) -> Optional[int]:
    """Height recorded in a coinbase's tag output, None when the tag is absent."""
    if len(tx.outputs) < 2:
        return None
    script = tx.outputs[1].script
    if not isinstance(script, DataEmbed) or len(script.data) != COINBASE_TAG_SIZE:
        return None
    return struct.unpack('<IQ', script.data)[0]
