"""
secp256k1 arithmetic, keys and deterministic ECDSA.

Not constant-time: this is a protocol laboratory, not a wallet. Points are kept affine in
the public types; scalar multiplication runs in Jacobian coordinates and pays a single
Fermat inversion at the end.
"""
import dataclasses
import hashlib
import hmac
from functools import cached_property, lru_cache
from typing import ClassVar, Iterator, Optional, Union

P = 2 ** 256 - 2 ** 32 - 2 ** 9 - 2 ** 8 - 2 ** 7 - 2 ** 6 - 2 ** 4 - 1
# group order, from SEC 2
N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
B = 7
GX = 55066263022277343669578718895168534326250603453777594175500187360389116729240
GY = 32670510020758816978083085130507043184471273380659243275938904335757337482424


class EccError(ValueError):
    pass


class ZeroKey(EccError):
    pass


class InvalidPublicKey(EccError):
    pass


@dataclasses.dataclass(frozen=True)
class FieldElement:
    value: int

    def __post_init__(self):
        if not 0 <= self.value < P:
            raise ValueError(f'field element out of range: {self.value}')

    def __add__(self, other: 'FieldElement') -> 'FieldElement':
        return FieldElement((self.value + other.value) % P)

    def __sub__(self, other: 'FieldElement') -> 'FieldElement':
        return FieldElement((self.value - other.value) % P)

    def __mul__(self, other: Union['FieldElement', int]) -> 'FieldElement':
        if isinstance(other, FieldElement):
            other = other.value
        return FieldElement((self.value * other) % P)

    __rmul__ = __mul__

    def __pow__(self, exponent: int) -> 'FieldElement':
        return FieldElement(pow(self.value, exponent, P))

    def __neg__(self) -> 'FieldElement':
        return FieldElement(-self.value % P)

    def inverse(self) -> 'FieldElement':
        if self.value == 0:
            raise ZeroDivisionError('inverse of zero field element')
        return FieldElement(pow(self.value, P - 2, P))

    def __truediv__(self, other: 'FieldElement') -> 'FieldElement':
        return self * other.inverse()


@dataclasses.dataclass(frozen=True)
class CurvePoint:
    x: Optional[FieldElement]
    y: Optional[FieldElement]

    INFINITY: ClassVar['CurvePoint']

    @classmethod
    def from_ints(cls, x: int, y: int) -> 'CurvePoint':
        return cls(FieldElement(x), FieldElement(y))

    @property
    def is_infinity(self) -> bool:
        return self.x is None

    def is_on_curve(self) -> bool:
        if self.is_infinity:
            return True
        return self.y * self.y == self.x * self.x * self.x + FieldElement(B)


CurvePoint.INFINITY = CurvePoint(None, None)
INFINITY = CurvePoint.INFINITY
G = CurvePoint.from_ints(GX, GY)


@dataclasses.dataclass(frozen=True)
class Scalar:
    value: int

    def __post_init__(self):
        if not 0 <= self.value < N:
            raise ValueError(f'scalar out of range: {self.value}')

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(32, 'big')


@dataclasses.dataclass(frozen=True)
class PublicKey:
    point: CurvePoint

    def __post_init__(self):
        if self.point.is_infinity or not self.point.is_on_curve():
            raise InvalidPublicKey('public key is not a finite point on secp256k1')

    @cached_property
    def encoded(self) -> bytes:
        return b'\x04' + self.point.x.value.to_bytes(32, 'big') + self.point.y.value.to_bytes(32, 'big')

    def encode(self) -> bytes:
        return self.encoded

    @classmethod
    def decode(cls, data: bytes) -> 'PublicKey':
        if len(data) != 65 or data[0] != 0x04:
            raise InvalidPublicKey(f'expected 65-byte uncompressed key, got {len(data)} bytes')
        x = int.from_bytes(data[1:33], 'big')
        y = int.from_bytes(data[33:], 'big')
        if x >= P or y >= P:
            raise InvalidPublicKey('coordinate exceeds field prime')
        return cls(CurvePoint.from_ints(x, y))


@dataclasses.dataclass(frozen=True)
class Signature:
    """(r, s) as plain integers; range checks happen in verify so malformed values verify false."""
    r: int
    s: int

    def to_bytes(self) -> bytes:
        return self.r.to_bytes(32, 'big') + self.s.to_bytes(32, 'big')

    @classmethod
    def from_bytes(cls, data: bytes) -> 'Signature':
        if len(data) != 64:
            raise EccError(f'signature must be 64 bytes, got {len(data)}')
        return cls(int.from_bytes(data[:32], 'big'), int.from_bytes(data[32:], 'big'))


def point_neg(p: CurvePoint) -> CurvePoint:
    if p.is_infinity:
        return p
    return CurvePoint(p.x, -p.y)


def point_add(p: CurvePoint, q: CurvePoint) -> CurvePoint:
    """Affine chord-and-tangent addition."""
    if p.is_infinity:
        return q
    if q.is_infinity:
        return p
    if p.x == q.x:
        if (p.y + q.y).value == 0:
            return INFINITY
        lam = (p.x * p.x * 3) / (p.y * 2)
    else:
        lam = (q.y - p.y) / (q.x - p.x)
    x3 = lam * lam - p.x - q.x
    y3 = lam * (p.x - x3) - p.y
    return CurvePoint(x3, y3)


# Jacobian helpers on raw ints; None is the point at infinity.

def _to_jacobian(p: CurvePoint):
    if p.is_infinity:
        return None
    return p.x.value, p.y.value, 1


def _from_jacobian(j) -> CurvePoint:
    if j is None:
        return INFINITY
    x, y, z = j
    zinv = pow(z, P - 2, P)
    zinv2 = zinv * zinv % P
    return CurvePoint.from_ints(x * zinv2 % P, y * zinv2 * zinv % P)


def _jdouble(j):
    if j is None:
        return None
    x, y, z = j
    if y == 0:
        return None
    ysq = y * y % P
    s = 4 * x * ysq % P
    m = 3 * x * x % P
    nx = (m * m - 2 * s) % P
    ny = (m * (s - nx) - 8 * ysq * ysq) % P
    nz = 2 * y * z % P
    return nx, ny, nz


def _jadd(j1, j2):
    if j1 is None:
        return j2
    if j2 is None:
        return j1
    x1, y1, z1 = j1
    x2, y2, z2 = j2
    z1z1 = z1 * z1 % P
    z2z2 = z2 * z2 % P
    u1 = x1 * z2z2 % P
    u2 = x2 * z1z1 % P
    s1 = y1 * z2 * z2z2 % P
    s2 = y2 * z1 * z1z1 % P
    if u1 == u2:
        if s1 != s2:
            return None
        return _jdouble(j1)
    h = (u2 - u1) % P
    r = (s2 - s1) % P
    h2 = h * h % P
    h3 = h * h2 % P
    u1h2 = u1 * h2 % P
    nx = (r * r - h3 - 2 * u1h2) % P
    ny = (r * (u1h2 - nx) - s1 * h3) % P
    nz = h * z1 * z2 % P
    return nx, ny, nz


def _as_int(k: Union[Scalar, int]) -> int:
    return k.value if isinstance(k, Scalar) else k


def scalar_mul(k: Union[Scalar, int], p: CurvePoint) -> CurvePoint:
    """Double-and-add; k is not reduced so that n·g evaluates to infinity."""
    k = _as_int(k)
    if k < 0:
        raise ValueError('negative scalar')
    base = _to_jacobian(p)
    if k == 0 or base is None:
        return INFINITY
    acc = None
    for bit in bin(k)[2:]:
        acc = _jdouble(acc)
        if bit == '1':
            acc = _jadd(acc, base)
    return _from_jacobian(acc)


def _double_scalar_mul(a: int, p: CurvePoint, b: int, q: CurvePoint) -> CurvePoint:
    """a·p + b·q with one shared doubling chain."""
    jp, jq = _to_jacobian(p), _to_jacobian(q)
    jpq = _jadd(jp, jq)
    acc = None
    for i in range(max(a.bit_length(), b.bit_length()) - 1, -1, -1):
        acc = _jdouble(acc)
        bits = ((a >> i) & 1, (b >> i) & 1)
        if bits == (1, 1):
            acc = _jadd(acc, jpq)
        elif bits == (1, 0):
            acc = _jadd(acc, jp)
        elif bits == (0, 1):
            acc = _jadd(acc, jq)
    return _from_jacobian(acc)


def generate_private_key(entropy: bytes) -> Scalar:
    if len(entropy) != 32:
        raise ValueError(f'entropy must be 32 bytes, got {len(entropy)}')
    value = int.from_bytes(entropy, 'big') % N
    if value == 0:
        raise ZeroKey('entropy reduces to zero modulo the group order')
    return Scalar(value)


@lru_cache(maxsize=4096)
def derive_public_key(k: Scalar) -> PublicKey:
    if _as_int(k) == 0:
        raise ZeroKey('private key is zero')
    return PublicKey(scalar_mul(k, G))


def _rfc6979_candidates(secret: int, digest: bytes) -> Iterator[int]:
    x = secret.to_bytes(32, 'big')
    h1 = (int.from_bytes(digest, 'big') % N).to_bytes(32, 'big')
    v = b'\x01' * 32
    key = b'\x00' * 32
    key = hmac.new(key, v + b'\x00' + x + h1, hashlib.sha256).digest()
    v = hmac.new(key, v, hashlib.sha256).digest()
    key = hmac.new(key, v + b'\x01' + x + h1, hashlib.sha256).digest()
    v = hmac.new(key, v, hashlib.sha256).digest()
    while True:
        v = hmac.new(key, v, hashlib.sha256).digest()
        candidate = int.from_bytes(v, 'big')
        if 1 <= candidate < N:
            yield candidate
        key = hmac.new(key, v + b'\x00', hashlib.sha256).digest()
        v = hmac.new(key, v, hashlib.sha256).digest()


def rfc6979_nonce(k: Scalar, digest: bytes) -> int:
    return next(_rfc6979_candidates(_as_int(k), digest))


def sign(k: Scalar, digest: bytes) -> Signature:
    """ECDSA over secp256k1 with an RFC 6979 (HMAC-SHA256) nonce."""
    secret = _as_int(k)
    if secret == 0:
        raise ZeroKey('cannot sign with a zero key')
    z = int.from_bytes(digest, 'big')
    for nonce in _rfc6979_candidates(secret, digest):
        r = scalar_mul(nonce, G).x.value % N
        if r == 0:
            continue
        s = pow(nonce, N - 2, N) * (z + r * secret) % N
        if s == 0:
            continue
        return Signature(r, s)


def verify(public_key: PublicKey, digest: bytes, sig: Signature) -> bool:
    if not (1 <= sig.r < N and 1 <= sig.s < N):
        return False
    z = int.from_bytes(digest, 'big')
    w = pow(sig.s, N - 2, N)
    point = _double_scalar_mul(z * w % N, G, sig.r * w % N, public_key.point)
    if point.is_infinity:
        return False
    return point.x.value % N == sig.r
