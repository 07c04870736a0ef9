"""
The four locking-script variants. Each serializes as tag (1 byte) || body.
"""
import dataclasses
from abc import ABC, abstractmethod
from typing import ClassVar, Sequence

from nakalab.config import DATA_EMBED_LIMIT, MULTISIG_MAX_KEYS
from nakalab.crypto.address import Address
from nakalab.crypto.ecc import PublicKey, Signature, verify, InvalidPublicKey
from nakalab.crypto.hashing import hash160
from nakalab.ledger.errors import InvalidScript, BadSignature, ThresholdNotMet, ImmatureHeightLock, \
    UnspendableOutput
from nakalab.utils.data import ByteReader

Witness = tuple[PublicKey, Signature]


class LockingScript(ABC):
    tag: ClassVar[int]
    spendable: ClassVar[bool] = True

    @abstractmethod
    def body(self) -> bytes:
        raise NotImplementedError

    @abstractmethod
    def check(self, witnesses: Sequence[Witness], digest: bytes, height: int):
        """Raise a LedgerError unless the witnesses unlock this script at `height`."""
        raise NotImplementedError

    def serialize(self) -> bytes:
        return bytes([self.tag]) + self.body()

    @staticmethod
    def parse(reader: ByteReader) -> 'LockingScript':
        tag = reader.u8()
        if tag not in _script_types:
            raise InvalidScript(f'unknown script tag {tag:#04x}')
        return _script_types[tag].parse_body(reader)


@dataclasses.dataclass(frozen=True)
class PayToPubKeyHash(LockingScript):
    payload: bytes
    tag: ClassVar[int] = 0x01

    def __post_init__(self):
        if len(self.payload) != 20:
            raise InvalidScript(f'P2PKH payload must be 20 bytes, got {len(self.payload)}')

    @classmethod
    def for_address(cls, address: Address) -> 'PayToPubKeyHash':
        return cls(address.payload)

    @classmethod
    def for_key(cls, public_key: PublicKey) -> 'PayToPubKeyHash':
        return cls(hash160(public_key.encode()))

    def body(self) -> bytes:
        return self.payload

    @classmethod
    def parse_body(cls, reader: ByteReader) -> 'PayToPubKeyHash':
        return cls(reader.read(20))

    def check(self, witnesses, digest, height):
        if len(witnesses) != 1:
            raise BadSignature(f'P2PKH needs exactly one witness, got {len(witnesses)}')
        key, sig = witnesses[0]
        if hash160(key.encode()) != self.payload:
            raise BadSignature('witness key does not hash to the locked payload')
        if not verify(key, digest, sig):
            raise BadSignature('signature does not verify')


@dataclasses.dataclass(frozen=True)
class MultiSig(LockingScript):
    required: int
    keys: tuple[PublicKey, ...]
    tag: ClassVar[int] = 0x02

    def __post_init__(self):
        object.__setattr__(self, 'keys', tuple(self.keys))
        if not 1 <= self.required <= len(self.keys) <= MULTISIG_MAX_KEYS:
            raise InvalidScript(f'multisig needs 1 <= required <= keys <= {MULTISIG_MAX_KEYS}, '
                                f'got {self.required}-of-{len(self.keys)}')

    def body(self) -> bytes:
        return bytes([self.required, len(self.keys)]) + b''.join(k.encode() for k in self.keys)

    @classmethod
    def parse_body(cls, reader: ByteReader) -> 'MultiSig':
        required, count = reader.u8(), reader.u8()
        try:
            keys = tuple(PublicKey.decode(reader.read(65)) for _ in range(count))
        except InvalidPublicKey as e:
            raise InvalidScript(str(e)) from e
        return cls(required, keys)

    def check(self, witnesses, digest, height):
        satisfied = set()
        for key, sig in witnesses:
            if key in self.keys and key not in satisfied and verify(key, digest, sig):
                satisfied.add(key)
        if len(satisfied) < self.required:
            raise ThresholdNotMet(f'{len(satisfied)} of {self.required} required signatures')


@dataclasses.dataclass(frozen=True)
class HeightLock(LockingScript):
    unlock_height: int
    inner: LockingScript
    tag: ClassVar[int] = 0x03

    def __post_init__(self):
        if isinstance(self.inner, (HeightLock, DataEmbed)):
            raise InvalidScript(f'height lock cannot wrap {type(self.inner).__name__}')
        if not 0 <= self.unlock_height < 2 ** 32:
            raise InvalidScript(f'unlock height out of range: {self.unlock_height}')

    def body(self) -> bytes:
        return self.unlock_height.to_bytes(4, 'little') + self.inner.serialize()

    @classmethod
    def parse_body(cls, reader: ByteReader) -> 'HeightLock':
        unlock = reader.u32()
        return cls(unlock, LockingScript.parse(reader))

    def check(self, witnesses, digest, height):
        if height < self.unlock_height:
            raise ImmatureHeightLock(f'locked until height {self.unlock_height}, spent at {height}')
        self.inner.check(witnesses, digest, height)


@dataclasses.dataclass(frozen=True)
class DataEmbed(LockingScript):
    data: bytes
    tag: ClassVar[int] = 0x04
    spendable: ClassVar[bool] = False

    def __post_init__(self):
        if len(self.data) > DATA_EMBED_LIMIT:
            raise InvalidScript(f'embedded data exceeds {DATA_EMBED_LIMIT} bytes: {len(self.data)}')

    def body(self) -> bytes:
        return bytes([len(self.data)]) + self.data

    @classmethod
    def parse_body(cls, reader: ByteReader) -> 'DataEmbed':
        return cls(reader.read(reader.u8()))

    def check(self, witnesses, digest, height):
        raise UnspendableOutput('embedded-data outputs can never be spent')


_script_types = {clz.tag: clz for clz in (PayToPubKeyHash, MultiSig, HeightLock, DataEmbed)}
