"""Signing keys.

Ed25519 over SHA-256 digests. Signatures are deterministic, so a seeded run
produces identical ledger bytes every time. Key ids are the first 8 bytes of
the SHA-256 of the raw public key, written as 16 lowercase hex digits.
"""

from __future__ import annotations

from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import (
    Encoding,
    PublicFormat,
)

from telcofed.codec import digest
from telcofed.rng import derive_seed

SIGNATURE_SIZE = 64


def key_id(public_key: bytes) -> str:
    return digest(public_key)[:8].hex()


def _seed_bytes(seed: int, label: str) -> bytes:
    return digest(derive_seed(seed, "key", label).to_bytes(8, "little") + label.encode())


class Signer:
    """An Ed25519 private key with a stable key id."""

    def __init__(self, private_key: Ed25519PrivateKey) -> None:
        self._key = private_key
        self.public_key: bytes = private_key.public_key().public_bytes(
            Encoding.Raw, PublicFormat.Raw
        )
        self.key_id = key_id(self.public_key)

    @classmethod
    def from_seed(cls, seed: int, label: str) -> Signer:
        """Deterministic key for simulations and test fixtures."""
        return cls(Ed25519PrivateKey.from_private_bytes(_seed_bytes(seed, label)))

    def sign(self, message: bytes) -> bytes:
        return self._key.sign(message)

    def __repr__(self) -> str:
        return f"Signer(key_id={self.key_id!r})"


def verify_signature(public_key: bytes, message: bytes, signature: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True


@dataclass(frozen=True)
class KeyAgreement:
    """X25519 key pair used to derive pairwise masking seeds."""

    private: X25519PrivateKey
    public_key: bytes

    @classmethod
    def from_seed(cls, seed: int, label: str) -> KeyAgreement:
        private = X25519PrivateKey.from_private_bytes(_seed_bytes(seed, "dh:" + label))
        public = private.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
        return cls(private, public)

    def shared_secret(self, peer_public_key: bytes) -> bytes:
        return self.private.exchange(X25519PublicKey.from_public_bytes(peer_public_key))
