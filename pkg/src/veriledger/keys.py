"""Ed25519 signing and verification.

Member identity is the SHA-256 digest of the raw 32-byte public key,
rendered as 64 lowercase hex characters.
"""

from __future__ import annotations

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .canonical import canonical_digest

PUBLIC_KEY_SIZE = 32
SIGNATURE_SIZE = 64

_RAW_PUBLIC = dict(
    encoding=serialization.Encoding.Raw,
    format=serialization.PublicFormat.Raw,
)
_RAW_PRIVATE = dict(
    encoding=serialization.Encoding.Raw,
    format=serialization.PrivateFormat.Raw,
    encryption_algorithm=serialization.NoEncryption(),
)


def member_id_of(public_key: bytes) -> str:
    return canonical_digest(public_key).hex()


class VerifyKey:
    """Cached wrapper over an Ed25519 public key."""

    __slots__ = ("public_bytes", "member_id", "_key")

    def __init__(self, public_bytes: bytes):
        if len(public_bytes) != PUBLIC_KEY_SIZE:
            raise ValueError(f"public key must be {PUBLIC_KEY_SIZE} bytes")
        self.public_bytes = public_bytes
        self.member_id = member_id_of(public_bytes)
        self._key = Ed25519PublicKey.from_public_bytes(public_bytes)

    def verify(self, signature: bytes, message: bytes) -> bool:
        try:
            self._key.verify(signature, message)
            return True
        except InvalidSignature:
            return False
        except Exception:
            return False


class SigningKey:
    """Ed25519 private key with its derived member identity."""

    __slots__ = ("_key", "verify_key")

    def __init__(self, key: Ed25519PrivateKey):
        self._key = key
        self.verify_key = VerifyKey(key.public_key().public_bytes(**_RAW_PUBLIC))

    @classmethod
    def generate(cls) -> "SigningKey":
        return cls(Ed25519PrivateKey.generate())

    @classmethod
    def from_seed(cls, seed: bytes) -> "SigningKey":
        """Deterministic key from a 32-byte seed; used by tests and the sim."""
        if len(seed) != 32:
            raise ValueError("seed must be 32 bytes")
        return cls(Ed25519PrivateKey.from_private_bytes(seed))

    @classmethod
    def from_hex(cls, text: str) -> "SigningKey":
        return cls.from_seed(bytes.fromhex(text.strip()))

    def to_hex(self) -> str:
        return self._key.private_bytes(**_RAW_PRIVATE).hex()

    @property
    def public_bytes(self) -> bytes:
        return self.verify_key.public_bytes

    @property
    def member_id(self) -> str:
        return self.verify_key.member_id

    def sign(self, message: bytes) -> bytes:
        return self._key.sign(message)
