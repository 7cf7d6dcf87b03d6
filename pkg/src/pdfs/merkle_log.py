"""Append-only Merkle log with sided membership and consistency proofs.

Tree shape follows the history-tree convention: a range of ``n > 1`` leaves
splits into a left subtree of ``k`` leaves, ``k`` the largest power of two
strictly below ``n``. Leaves are ``HASH(data)`` and interior nodes
``HASH(left || right)``, with no domain-separation prefix, because that is
exactly what the on-ledger verifier recomputes. (Prefix-free trees admit
second preimages of interior nodes as "leaves"; the verifier accepts the same
thing, so the log does not pretend otherwise.)

Interior nodes of complete, aligned subtrees are kept per level in growable
numpy arrays, which is also what lets bulk appends hash a whole level at once.
"""
from __future__ import annotations

import json
from enum import IntEnum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .hashing import DIGEST_SIZE, HashFn, Hasher, get_hasher


class Side(IntEnum):
    LEFT = 0
    RIGHT = 1


class ProofElement(NamedTuple):
    side: Side
    digest: bytes


SidedProof = list[ProofElement]


class ProofFormatError(ValueError):
    pass


def largest_pow2_below(n: int) -> int:
    """Largest power of two strictly less than n (n >= 2)."""
    return 1 << ((n - 1).bit_length() - 1)


def to_hex(digest: bytes) -> str:
    return digest.hex()


def from_hex(text: str) -> bytes:
    if not isinstance(text, str) or len(text) != 2 * DIGEST_SIZE or text != text.lower():
        raise ProofFormatError(f"digest must be {2 * DIGEST_SIZE} lowercase hex chars")
    try:
        return bytes.fromhex(text)
    except ValueError as exc:
        raise ProofFormatError(str(exc)) from None


# -- proof wire format ------------------------------------------------------

def proof_to_obj(proof: Sequence[ProofElement]) -> list[dict]:
    return [{"side": int(el.side), "hash": el.digest.hex()} for el in proof]


def proof_from_obj(obj) -> SidedProof:
    if not isinstance(obj, list):
        raise ProofFormatError("proof must be a JSON array")
    out = []
    for item in obj:
        if not isinstance(item, dict) or set(item) != {"side", "hash"}:
            raise ProofFormatError("proof element must be {side, hash}")
        side = item["side"]
        if isinstance(side, bool) or side not in (0, 1):
            raise ProofFormatError("side must be 0 or 1")
        out.append(ProofElement(Side(side), from_hex(item["hash"])))
    return out


def proof_to_json(proof: Sequence[ProofElement]) -> str:
    return json.dumps(proof_to_obj(proof), separators=(",", ":"))


def proof_from_json(text: str | bytes) -> SidedProof:
    try:
        obj = json.loads(text)
    except ValueError as exc:
        raise ProofFormatError(f"proof is not JSON: {exc}") from None
    return proof_from_obj(obj)


# -- verification ---------------------------------------------------------

def mth_dual(proof: Sequence[ProofElement], leaf: bytes | None, hash_fn: HashFn) -> tuple[bytes, bytes]:
    """Fold a sided proof into two accumulators.

    With ``leaf`` both accumulators start at it and every element is consumed.
    Without it, ``proof[0]`` (the anchor) seeds both and its side is ignored.
    RIGHT elements extend only the first accumulator; LEFT elements extend
    both. For a consistency proof the result is ``(new_root, old_root)``.
    """
    if leaf is None:
        if not proof:
            raise ValueError("consistency evaluation needs at least the anchor element")
        hx = hy = proof[0].digest
        rest = proof[1:]
    else:
        hx = hy = leaf
        rest = proof
    for side, h in rest:
        if side == Side.RIGHT:
            hx = hash_fn(hx + h)
        else:
            hx = hash_fn(h + hx)
            hy = hash_fn(h + hy)
    return hx, hy


def membership_root(proof: Sequence[ProofElement], leaf: bytes, hash_fn: HashFn) -> bytes:
    """First accumulator of ``mth_dual(proof, leaf)`` without the unused second one."""
    h = leaf
    for side, sibling in proof:
        h = hash_fn(h + sibling) if side == Side.RIGHT else hash_fn(sibling + h)
    return h


def verify_membership(data: bytes, proof: Sequence[ProofElement], root: bytes, hash_fn: HashFn) -> bool:
    return membership_root(proof, hash_fn(data), hash_fn) == root


def verify_consistency(proof: Sequence[ProofElement], old_root: bytes, new_root: bytes, hash_fn: HashFn) -> bool:
    if not proof:
        return False
    hx, hy = mth_dual(proof, None, hash_fn)
    return hx == new_root and hy == old_root


# -- the log ----------------------------------------------------------------

class _DigestArray:
    """Growable (count, 32) uint8 array."""

    def __init__(self, capacity: int = 16):
        self._buf = np.empty((capacity, DIGEST_SIZE), dtype=np.uint8)
        self.count = 0

    def _reserve(self, extra: int) -> None:
        need = self.count + extra
        if need > len(self._buf):
            cap = max(need, 2 * len(self._buf))
            grown = np.empty((cap, DIGEST_SIZE), dtype=np.uint8)
            grown[: self.count] = self._buf[: self.count]
            self._buf = grown

    def append(self, digest: bytes) -> None:
        self._reserve(1)
        self._buf[self.count] = np.frombuffer(digest, dtype=np.uint8)
        self.count += 1

    def extend(self, rows: np.ndarray) -> None:
        self._reserve(len(rows))
        self._buf[self.count: self.count + len(rows)] = rows
        self.count += len(rows)

    def __getitem__(self, i: int) -> bytes:
        return self._buf[i].tobytes()

    @property
    def rows(self) -> np.ndarray:
        return self._buf[: self.count]


class MerkleLog:
    """Append-only log of byte entries with cached interior hashes.

    Proofs and roots may be requested for any historical size up to the
    current one, so a writer can keep appending while readers work against
    an older committed size.
    """

    def __init__(self, entries: Iterable[bytes] = (), hasher: Hasher | str | None = None):
        self.hasher = hasher if isinstance(hasher, Hasher) else get_hasher(hasher)
        self._entries: list[bytes] = []
        self._levels: list[_DigestArray] = [_DigestArray()]
        entries = list(entries)
        if entries:
            self.extend(entries)

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def size(self) -> int:
        return len(self._entries)

    def entry(self, index: int) -> bytes:
        if not 0 <= index < len(self._entries):
            raise IndexError(f"entry {index} out of range for log of size {len(self._entries)}")
        return self._entries[index]

    def entries(self, size: int | None = None) -> list[bytes]:
        return self._entries[: self.size if size is None else size]

    @staticmethod
    def _check_entry(data) -> bytes:
        if not isinstance(data, (bytes, bytearray, memoryview)):
            raise TypeError("log entries are byte strings")
        data = bytes(data)
        if not data:
            raise ValueError("empty entry rejected")
        return data

    def append(self, data: bytes) -> tuple[int, bytes]:
        data = self._check_entry(data)
        self._entries.append(data)
        self._levels[0].append(self.hasher.digest(data))
        level, j = 0, self._levels[0].count - 1
        while j % 2 == 1:
            lev = self._levels[level]
            parent = self.hasher.digest(lev[j - 1] + lev[j])
            if level + 1 == len(self._levels):
                self._levels.append(_DigestArray())
            self._levels[level + 1].append(parent)
            level, j = level + 1, j // 2
        return self.size, self.root()

    def extend(self, batch: Sequence[bytes]) -> tuple[int, bytes]:
        """Append many entries, hashing each tree level in one batch."""
        batch = [self._check_entry(d) for d in batch]
        if not batch:
            if not self._entries:
                raise ValueError("cannot take the root of an empty log")
            return self.size, self.root()
        self._entries.extend(batch)
        self._levels[0].extend(self.hasher.digest_many(batch))
        level = 0
        while self._levels[level].count >= 2:
            if level + 1 == len(self._levels):
                self._levels.append(_DigestArray())
            lev, up = self._levels[level], self._levels[level + 1]
            done, can = up.count, lev.count // 2
            if can > done:
                rows = lev.rows
                up.extend(self.hasher.digest_pairs(rows[2 * done: 2 * can: 2], rows[2 * done + 1: 2 * can: 2]))
            level += 1
        return self.size, self.root()

    def _size_arg(self, size: int | None) -> int:
        n = self.size if size is None else size
        if not 1 <= n <= self.size:
            raise ValueError(f"size {n} outside 1..{self.size}")
        return n

    def node(self, lo: int, hi: int) -> bytes:
        """Digest of the subtree over leaves [lo, hi)."""
        n = hi - lo
        if n < 1 or lo < 0 or hi > self.size:
            raise ValueError(f"bad node range [{lo}, {hi})")
        if n & (n - 1) == 0 and lo % n == 0:
            level = n.bit_length() - 1
            if level < len(self._levels) and lo // n < self._levels[level].count:
                return self._levels[level][lo // n]
        k = largest_pow2_below(n)
        return self.hasher.digest(self.node(lo, lo + k) + self.node(lo + k, hi))

    def root(self, size: int | None = None) -> bytes:
        return self.node(0, self._size_arg(size))

    def membership_proof(self, index: int, size: int | None = None) -> SidedProof:
        n = self._size_arg(size)
        if not 0 <= index < n:
            raise IndexError(f"index {index} out of range for size {n}")
        proof: SidedProof = []
        lo, hi = 0, n
        # walk down collecting siblings, emitted bottom-up
        while hi - lo > 1:
            k = largest_pow2_below(hi - lo)
            if index < lo + k:
                proof.append(ProofElement(Side.RIGHT, self.node(lo + k, hi)))
                hi = lo + k
            else:
                proof.append(ProofElement(Side.LEFT, self.node(lo, lo + k)))
                lo = lo + k
        proof.reverse()
        return proof

    def consistency_proof(self, old_size: int, size: int | None = None) -> SidedProof:
        n = self._size_arg(size)
        if not 1 <= old_size < n:
            raise ValueError(f"consistency needs 1 <= old size < new size, got {old_size}, {n}")
        tail: SidedProof = []
        m, lo, hi = old_size, 0, n
        while hi - lo != m:
            k = largest_pow2_below(hi - lo)
            if m <= k:
                tail.append(ProofElement(Side.RIGHT, self.node(lo + k, hi)))
                hi = lo + k
            else:
                tail.append(ProofElement(Side.LEFT, self.node(lo, lo + k)))
                m, lo = m - k, lo + k
        tail.reverse()
        return [ProofElement(Side.LEFT, self.node(lo, hi))] + tail

    def verify_membership(self, data: bytes, proof: Sequence[ProofElement], size: int | None = None) -> bool:
        return verify_membership(data, proof, self.root(size), self.hasher.digest)

    def verify_consistency(self, proof: Sequence[ProofElement], old_size: int, size: int | None = None) -> bool:
        return verify_consistency(proof, self.root(old_size), self.root(size), self.hasher.digest)
