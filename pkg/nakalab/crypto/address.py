import dataclasses

from nakalab.config import ADDRESS_VERSION
from nakalab.crypto.base58 import base58check_encode, base58check_decode, BadCharacter, BadChecksum
from nakalab.crypto.ecc import PublicKey, Scalar, Signature, sign, verify
from nakalab.crypto.hashing import hash160, double_sha256

MESSAGE_PREFIX = b'\x18nakalab signed message:\n'


@dataclasses.dataclass(frozen=True)
class Address:
    version: int
    payload: bytes
    text: str

    @classmethod
    def from_payload(cls, payload: bytes, version: int = ADDRESS_VERSION) -> 'Address':
        return cls(version, payload, base58check_encode(version, payload))

    @classmethod
    def from_text(cls, text: str) -> 'Address':
        version, payload = base58check_decode(text)
        return cls(version, payload, text)

    @staticmethod
    def is_valid(text: str) -> bool:
        try:
            base58check_decode(text)
        except (BadCharacter, BadChecksum):
            return False
        return True

    def __str__(self):
        return self.text


def derive_address(public_key: PublicKey, version: int = ADDRESS_VERSION) -> Address:
    return Address.from_payload(hash160(public_key.encode()), version)


def message_digest(message: bytes) -> bytes:
    return double_sha256(MESSAGE_PREFIX + len(message).to_bytes(4, 'little') + message)


def sign_message(k: Scalar, message: bytes) -> Signature:
    """Ownership proof: a signature over an arbitrary message with the address's key."""
    return sign(k, message_digest(message))


def verify_message(address: Address, public_key: PublicKey, message: bytes, sig: Signature) -> bool:
    if hash160(public_key.encode()) != address.payload:
        return False
    return verify(public_key, message_digest(message), sig)
