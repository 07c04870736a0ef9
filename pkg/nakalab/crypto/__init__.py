from nakalab.crypto.hashing import sha256, double_sha256, hash160, ripemd160, merkle_root
from nakalab.crypto.ecc import Scalar, PublicKey, Signature, generate_private_key, derive_public_key, sign, verify
from nakalab.crypto.address import Address, derive_address

__all__ = ['sha256', 'double_sha256', 'hash160', 'ripemd160', 'merkle_root',
           'Scalar', 'PublicKey', 'Signature', 'generate_private_key', 'derive_public_key', 'sign', 'verify',
           'Address', 'derive_address']
