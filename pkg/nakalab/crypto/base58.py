from nakalab.crypto.hashing import double_sha256

ALPHABET = '123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz'
_INDEX = {c: i for i, c in enumerate(ALPHABET)}


class Base58Error(ValueError):
    pass


class BadCharacter(Base58Error):
    pass


class BadChecksum(Base58Error):
    pass


def b58encode(data: bytes) -> str:
    n = int.from_bytes(data, 'big')
    chars = []
    while n > 0:
        n, rem = divmod(n, 58)
        chars.append(ALPHABET[rem])
    pad = len(data) - len(data.lstrip(b'\x00'))
    return '1' * pad + ''.join(reversed(chars))


def b58decode(text: str) -> bytes:
    n = 0
    for pos, c in enumerate(text):
        if c not in _INDEX:
            raise BadCharacter(f'{c!r} at position {pos} is not a base58 symbol')
        n = n * 58 + _INDEX[c]
    pad = len(text) - len(text.lstrip('1'))
    body = n.to_bytes((n.bit_length() + 7) // 8, 'big') if n else b''
    return b'\x00' * pad + body


def base58check_encode(version: int, payload: bytes) -> str:
    if not 0 <= version <= 0xFF:
        raise ValueError(f'version must fit in one byte: {version}')
    if len(payload) > 64:
        raise ValueError(f'payload too long: {len(payload)} bytes')
    data = bytes([version]) + payload
    return b58encode(data + double_sha256(data)[:4])


def base58check_decode(text: str) -> tuple[int, bytes]:
    raw = b58decode(text)
    if len(raw) < 5:
        raise BadChecksum(f'{text!r} is too short to carry a checksum')
    data, checksum = raw[:-4], raw[-4:]
    if double_sha256(data)[:4] != checksum:
        raise BadChecksum(f'checksum mismatch for {text!r}')
    return data[0], data[1:]
