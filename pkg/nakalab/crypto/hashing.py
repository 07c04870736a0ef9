import hashlib
from typing import Callable, Sequence

from nakalab.crypto._ripemd160 import ripemd160 as _pure_ripemd160


class HashingError(ValueError):
    pass


class EmptyList(HashingError):
    """A Merkle tree needs at least one leaf (the coinbase)."""


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def double_sha256(data: bytes) -> bytes:
    return hashlib.sha256(hashlib.sha256(data).digest()).digest()


def _openssl_ripemd160():
    try:
        hashlib.new('ripemd160', b'')
    except ValueError:
        return None
    return lambda data: hashlib.new('ripemd160', data).digest()


_ripemd160_impl = _openssl_ripemd160() or _pure_ripemd160


def ripemd160(data: bytes) -> bytes:
    return _ripemd160_impl(data)


def hash160(data: bytes) -> bytes:
    return ripemd160(sha256(data))


def merkle_root(txids: Sequence[bytes], hasher: Callable[[bytes], bytes] = double_sha256) -> bytes:
    """
    Root of the dyadic hash tree over an ordered list of txids.
    The list is padded once, up front, to the next power of two by repeating its last
    element (deployed Bitcoin duplicates per level instead). A single leaf is its own root.
    """
    if len(txids) == 0:
        raise EmptyList('merkle_root of an empty list')
    level = list(txids)
    width = 1
    while width < len(level):
        width <<= 1
    level.extend([level[-1]] * (width - len(level)))
    while len(level) > 1:
        level = [hasher(level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]
