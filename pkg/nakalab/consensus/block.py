import dataclasses
import struct
from functools import cached_property
from typing import Optional

from nakalab.config import BLOCK_VERSION, GENESIS_MESSAGE, GENESIS_TIMESTAMP, DATA_EMBED_LIMIT, POW_LIMIT
from nakalab.consensus.errors import MessageTooLong, NonPositiveTimespan, MalformedBlock, Exhausted
from nakalab.crypto.hashing import double_sha256, merkle_root
from nakalab.ledger.emission import reward_at_height
from nakalab.ledger.errors import LedgerError
from nakalab.ledger.script import LockingScript, PayToPubKeyHash, DataEmbed
from nakalab.ledger.transaction import Transaction, TxOutput
from nakalab.utils.args import ConsensusConfig
from nakalab.utils.data import ByteReader, TruncatedData

HEADER_SIZE = 116
_NONCE_OFFSET = HEADER_SIZE - 8
MAX_NONCE = 2 ** 64


@dataclasses.dataclass(frozen=True)
class Target:
    threshold: int

    def __post_init__(self):
        if not 1 <= self.threshold <= 2 ** 256 - 1:
            raise ValueError(f'target threshold out of range: {self.threshold}')

    @classmethod
    def from_bits(cls, zero_bits: int) -> 'Target':
        """Threshold that requires `zero_bits` leading zero bits in the header hash."""
        if not 0 <= zero_bits <= 255:
            raise ValueError(f'zero bits must be in [0, 255], got {zero_bits}')
        return cls(2 ** (256 - zero_bits) - 1)

    def to_bytes(self) -> bytes:
        return self.threshold.to_bytes(32, 'big')

    def __repr__(self):
        return f'Target({self.threshold:#066x})'


def target_from_bits(zero_bits: int) -> Target:
    return Target.from_bits(zero_bits)


@dataclasses.dataclass(frozen=True)
class BlockHeader:
    version: int
    prev_hash: bytes
    merkle_root: bytes
    timestamp: int
    target: Target
    nonce: int = 0

    def serialize(self) -> bytes:
        return (struct.pack('<I', self.version) + self.prev_hash + self.merkle_root
                + struct.pack('<Q', self.timestamp) + self.target.to_bytes() + struct.pack('<Q', self.nonce))

    @cached_property
    def hash(self) -> bytes:
        return double_sha256(self.serialize())

    @classmethod
    def deserialize(cls, data: bytes) -> 'BlockHeader':
        if len(data) != HEADER_SIZE:
            raise MalformedBlock(f'header must be {HEADER_SIZE} bytes, got {len(data)}')
        version, = struct.unpack_from('<I', data, 0)
        timestamp, = struct.unpack_from('<Q', data, 68)
        nonce, = struct.unpack_from('<Q', data, _NONCE_OFFSET)
        try:
            target = Target(int.from_bytes(data[76:108], 'big'))
        except ValueError as e:
            raise MalformedBlock(str(e)) from e
        return cls(version, data[4:36], data[36:68], timestamp, target, nonce)


@dataclasses.dataclass(frozen=True)
class Block:
    header: BlockHeader
    transactions: tuple[Transaction, ...]

    def __post_init__(self):
        object.__setattr__(self, 'transactions', tuple(self.transactions))

    @property
    def hash(self) -> bytes:
        return self.header.hash

    @property
    def coinbase(self) -> Transaction:
        return self.transactions[0]

    @cached_property
    def txids(self) -> list[bytes]:
        return [tx.txid for tx in self.transactions]

    def serialize(self) -> bytes:
        parts = [self.header.serialize(), struct.pack('<I', len(self.transactions))]
        for tx in self.transactions:
            raw = tx.serialize()
            parts.append(struct.pack('<I', len(raw)) + raw)
        return b''.join(parts)

    @classmethod
    def deserialize(cls, data: bytes) -> 'Block':
        reader = ByteReader(data)
        try:
            header = BlockHeader.deserialize(reader.read(HEADER_SIZE))
            txs = tuple(Transaction.deserialize(reader.read(reader.u32())) for _ in range(reader.u32()))
        except (TruncatedData, LedgerError) as e:
            raise MalformedBlock(str(e)) from e
        if not reader.at_end():
            raise MalformedBlock(f'{len(data) - reader.pos} trailing bytes after block')
        return cls(header, txs)


def header_hash(h: BlockHeader) -> bytes:
    return h.hash


def check_pow(h: BlockHeader) -> bool:
    return int.from_bytes(h.hash, 'big') <= h.target.threshold


def mine_block(template: Block, nonce_start: int, nonce_budget: int) -> Block:
    """First nonce in [nonce_start, nonce_start + nonce_budget) whose header meets the target."""
    prefix = template.header.serialize()[:_NONCE_OFFSET]
    threshold = template.header.target.threshold
    pack = struct.Struct('<Q').pack
    for nonce in range(nonce_start, min(nonce_start + nonce_budget, MAX_NONCE)):
        if int.from_bytes(double_sha256(prefix + pack(nonce)), 'big') <= threshold:
            return dataclasses.replace(template, header=dataclasses.replace(template.header, nonce=nonce))
    raise Exhausted(f'no solution in nonces [{nonce_start}, {nonce_start + nonce_budget})')


def retarget(prev_target: Target, actual_timespan_s: int, params: Optional[ConsensusConfig] = None) -> Target:
    """Proportional rule with the ratio clamped to [1/clamp, clamp]; multiply before divide."""
    params = params or ConsensusConfig()
    if actual_timespan_s <= 0:
        raise NonPositiveTimespan(f'timespan must be positive, got {actual_timespan_s}')
    expected = params.retarget_interval * params.target_spacing_s
    actual = min(max(actual_timespan_s, expected // params.retarget_clamp), expected * params.retarget_clamp)
    threshold = prev_target.threshold * actual // expected
    return Target(min(max(threshold, 1), params.pow_limit))


def block_template(prev_hash: bytes, transactions: list[Transaction], timestamp: int, target: Target,
                   version: int = BLOCK_VERSION) -> Block:
    root = merkle_root([tx.txid for tx in transactions])
    return Block(BlockHeader(version, prev_hash, root, timestamp, target, 0), tuple(transactions))


def make_genesis(message: bytes = GENESIS_MESSAGE, target: Target = Target(POW_LIMIT),
                 timestamp: int = GENESIS_TIMESTAMP, coinbase_script: Optional[LockingScript] = None,
                 nonce_budget: int = 2 ** 32) -> Block:
    if len(message) > DATA_EMBED_LIMIT:
        raise MessageTooLong(f'genesis message is {len(message)} bytes, limit {DATA_EMBED_LIMIT}')
    script = coinbase_script or PayToPubKeyHash(bytes(20))
    outputs = [TxOutput(reward_at_height(0), script)]
    if message:
        outputs.append(TxOutput(0, DataEmbed(message)))
    coinbase = Transaction((), tuple(outputs), is_coinbase=True)
    return mine_block(block_template(bytes(32), [coinbase], timestamp, target), 0, nonce_budget)


def genesis_message(genesis: Block) -> bytes:
    for out in genesis.coinbase.outputs:
        if isinstance(out.script, DataEmbed):
            return out.script.data
    return b''
