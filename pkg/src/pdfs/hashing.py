"""Hash function selection and batch helpers.

Single digests go through pycryptodome (Keccak-256) or hashlib; bulk tree
construction goes through :mod:`pdfs._kernels` when the hash is Keccak-256.
"""
from __future__ import annotations

import hashlib
from typing import Callable, Sequence

import numpy as np
from Crypto.Hash import keccak as _keccak

from . import _kernels

DIGEST_SIZE = 32
DEFAULT_HASH = "keccak256"

HashFn = Callable[[bytes], bytes]

# below this many messages the batch kernel's dispatch cost is not worth paying
BATCH_MIN = 64


def keccak256(data: bytes) -> bytes:
    return _keccak.new(digest_bits=256, data=data).digest()


def _sha3_256(data: bytes) -> bytes:
    return hashlib.sha3_256(data).digest()


def _sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


_SINGLE: dict[str, HashFn] = {
    "keccak256": keccak256,
    "sha3_256": _sha3_256,
    "sha256": _sha256,
}


class Hasher:
    """A named 256-bit hash with single-shot and batch entry points."""

    def __init__(self, name: str = DEFAULT_HASH):
        if name not in _SINGLE:
            raise ValueError(f"unknown hash function {name!r}; choose from {sorted(_SINGLE)}")
        self.name = name
        self.digest: HashFn = _SINGLE[name]

    def __repr__(self) -> str:
        return f"Hasher({self.name!r})"

    def __call__(self, data: bytes) -> bytes:
        return self.digest(data)

    def digest_many(self, messages: Sequence[bytes]) -> np.ndarray:
        """Digest every message; returns an (N, 32) uint8 array."""
        if not messages:
            return np.empty((0, DIGEST_SIZE), dtype=np.uint8)
        if self.name == "keccak256" and len(messages) >= BATCH_MIN:
            flat, offsets = _kernels.pack(list(messages))
            return _kernels.keccak256_batch(flat, offsets)
        buf = b"".join(self.digest(m) for m in messages)
        return np.frombuffer(buf, dtype=np.uint8).reshape(-1, DIGEST_SIZE).copy()

    def digest_pairs(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        """Row-wise HASH(left[i] || right[i]) over two (N, 32) arrays."""
        joined = np.concatenate([left, right], axis=1)
        if self.name == "keccak256" and len(joined) >= BATCH_MIN:
            return _kernels.keccak256_fixed(joined)
        buf = b"".join(self.digest(row.tobytes()) for row in joined)
        return np.frombuffer(buf, dtype=np.uint8).reshape(-1, DIGEST_SIZE).copy()


def get_hasher(name: str | None = None) -> Hasher:
    return Hasher(name or DEFAULT_HASH)


def available() -> list[str]:
    return sorted(_SINGLE)
