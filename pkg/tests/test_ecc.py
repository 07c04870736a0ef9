import hashlib

import numpy as np
import pytest

from nakalab.crypto.ecc import P, N, GX, GY, G, INFINITY, CurvePoint, Scalar, PublicKey, Signature, ZeroKey, \
    InvalidPublicKey, scalar_mul, point_add, point_neg, generate_private_key, derive_public_key, rfc6979_nonce, \
    sign, verify

G2 = (0xc6047f9441ed7d6d3045406e95c07cd85c778e4b8cef3ca7abac09b95c709ee5,
      0x1ae168fea63dc339a3c58419466ceaeef7f632653266d0e1236431a950cfe52a)
G3 = (0xf9308a019258c31049344f85f89d5229b531c845836f99b08601f113bce036f9,
      0x388f7b0f632de8140fe337e62a37f3566500a99934c2231b6cb9fd7584b8e672)

VECTOR_DIGEST = hashlib.sha256(b'Satoshi Nakamoto').digest()
VECTOR_NONCE = 0x8f8a276c19f4149656b280621e358cce24f5f52542772691ee69063b74f15d15
VECTOR_R = 0x934b1ea10a4b3c1757e2b0c017d0b6143ce3c9a7e6a4a49860d7a6ab210ee3d8
VECTOR_LOW_S = 0x2442ce9d2b916064108014783e923ec36b49743e2ffa1c4496f01a512aafd9e5


def test_generator_on_curve():
    assert GY * GY % P == (GX ** 3 + 7) % P
    assert G.is_on_curve()


def test_group_order_annihilates_generator():
    assert scalar_mul(N, G).is_infinity


def test_small_multiples():
    assert scalar_mul(2, G) == CurvePoint.from_ints(*G2)
    assert scalar_mul(3, G) == CurvePoint.from_ints(*G3)
    assert point_add(G, G) == CurvePoint.from_ints(*G2)
    assert point_add(scalar_mul(2, G), G) == CurvePoint.from_ints(*G3)


def test_infinity_is_identity():
    assert point_add(G, INFINITY) == G
    assert point_add(INFINITY, G) == G
    assert point_add(G, scalar_mul(N - 1, G)).is_infinity


def test_rfc6979_nonce_vector():
    assert rfc6979_nonce(Scalar(1), VECTOR_DIGEST) == VECTOR_NONCE


def test_rfc6979_signature_vector():
    sig = sign(Scalar(1), VECTOR_DIGEST)
    assert sig.r == VECTOR_R
    assert sig.s in (VECTOR_LOW_S, N - VECTOR_LOW_S)
    assert verify(derive_public_key(Scalar(1)), VECTOR_DIGEST, sig)


def test_sign_is_deterministic(keys):
    digest = hashlib.sha256(b'payload').digest()
    assert sign(keys['alice'], digest) == sign(keys['alice'], digest)


def test_verify_rejects_tampering(keys, pubkeys):
    digest = hashlib.sha256(b'payload').digest()
    sig = sign(keys['alice'], digest)
    assert verify(pubkeys['alice'], digest, sig)
    assert not verify(pubkeys['bob'], digest, sig)
    assert not verify(pubkeys['alice'], hashlib.sha256(b'payloaD').digest(), sig)
    assert not verify(pubkeys['alice'], digest, Signature(sig.r, (sig.s + 1) % N))


@pytest.mark.parametrize('r,s', [(0, 1), (1, 0), (N, 1), (1, N)])
def test_verify_out_of_range_is_false(pubkeys, r, s):
    assert not verify(pubkeys['alice'], bytes(32), Signature(r, s))


def test_zero_entropy_is_rejected():
    with pytest.raises(ZeroKey):
        generate_private_key(bytes(32))
    with pytest.raises(ZeroKey):
        generate_private_key(N.to_bytes(32, 'big'))


def test_public_key_round_trip(pubkeys):
    pk = pubkeys['carol']
    assert PublicKey.decode(pk.encode()) == pk
    bad = bytearray(pk.encode())
    bad[-1] ^= 1
    with pytest.raises(InvalidPublicKey):
        PublicKey.decode(bytes(bad))


def test_signature_bytes_round_trip(keys):
    sig = sign(keys['bob'], bytes(32))
    assert Signature.from_bytes(sig.to_bytes()) == sig


def test_matches_independent_ecdsa(keys):
    ecdsa = pytest.importorskip('ecdsa')
    from ecdsa.util import sigencode_strings, sigdecode_string

    for name, k in keys.items():
        digest = hashlib.sha256(name.encode()).digest()
        sk = ecdsa.SigningKey.from_secret_exponent(k.value, curve=ecdsa.SECP256k1, hashfunc=hashlib.sha256)
        vk = sk.get_verifying_key()
        assert vk.to_string() == derive_public_key(k).encode()[1:]
        r, s = sk.sign_digest_deterministic(digest, hashfunc=hashlib.sha256, sigencode=sigencode_strings)
        ours = sign(k, digest)
        assert (ours.r, ours.s) == (int.from_bytes(r, 'big'), int.from_bytes(s, 'big'))
        assert vk.verify_digest(ours.to_bytes(), digest, sigdecode=sigdecode_string)


def is_probable_prime(n: int, rounds: int = 32) -> bool:
    """Miller-Rabin with random bases."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    rng = np.random.default_rng(0)
    for _ in range(rounds):
        a = int.from_bytes(rng.bytes(32), 'big') % (n - 3) + 2
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def random_scalar(rng) -> int:
    return int.from_bytes(rng.bytes(32), 'big') % (N - 1) + 1


def test_field_and_group_order_are_prime():
    assert is_probable_prime(P)
    assert is_probable_prime(N)
    assert not is_probable_prime(P * N)
    assert not is_probable_prime(P + 2)  # divisible by 3


def test_group_laws_on_random_points():
    rng = np.random.default_rng(4)
    for _ in range(20):
        a, b, c = (scalar_mul(random_scalar(rng), G) for _ in range(3))
        assert point_add(point_add(a, b), c) == point_add(a, point_add(b, c))
        assert point_add(a, b) == point_add(b, a)
        assert point_add(a, INFINITY) == a
        assert point_add(a, point_neg(a)).is_infinity
        assert point_add(a, b).is_on_curve()


def test_scalar_mul_composes():
    rng = np.random.default_rng(5)
    for _ in range(10):
        a, b = random_scalar(rng), random_scalar(rng)
        assert scalar_mul(a, scalar_mul(b, G)) == scalar_mul(a * b % N, G)
        assert scalar_mul(a + b, G) == point_add(scalar_mul(a, G), scalar_mul(b, G))


@pytest.mark.slow
def test_verify_with_other_key_fails():
    rng = np.random.default_rng(6)
    for _ in range(1000):
        k, other = Scalar(random_scalar(rng)), Scalar(random_scalar(rng))
        digest = rng.bytes(32)
        sig = sign(k, digest)
        assert not verify(derive_public_key(other), digest, sig)
