"""Batch Keccak-256 kernels used to build Merkle tree levels in bulk.

Two interchangeable implementations are provided:

* a numba ``@njit`` loop over messages (default when numba imports), and
* a pure-numpy path that vectorises the permutation across a batch of
  messages sharing the same padded block count.

Set ``PDFS_NO_NUMBA=1`` in the environment to force the numpy path.
Both return an ``(N, 32)`` uint8 array of digests, row ``i`` being the
Keccak-256 (pre-SHA3 padding) digest of message ``i``.
"""
from __future__ import annotations

import os

import numpy as np

RATE = 136  # bytes absorbed per permutation for a 256-bit capacity-512 sponge
LANES = RATE // 8

_RC = np.array(
    [
        0x0000000000000001, 0x0000000000008082, 0x800000000000808A, 0x8000000080008000,
        0x000000000000808B, 0x0000000080000001, 0x8000000080008081, 0x8000000000008009,
        0x000000000000008A, 0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
        0x000000008000808B, 0x800000000000008B, 0x8000000000008089, 0x8000000000008003,
        0x8000000000008002, 0x8000000000000080, 0x000000000000800A, 0x800000008000000A,
        0x8000000080008081, 0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
    ],
    dtype=np.uint64,
)
# rotation offset of lane x + 5*y
_ROT = np.array(
    [0, 1, 62, 28, 27, 36, 44, 6, 55, 20, 3, 10, 43, 25, 39,
     41, 45, 15, 21, 8, 18, 2, 61, 56, 14],
    dtype=np.uint64,
)
# rho/pi destination of lane x + 5*y is y + 5*((2x + 3y) % 5)
_PI = np.array([y + 5 * ((2 * x + 3 * y) % 5) for y in range(5) for x in range(5)], dtype=np.int64)


def _flag_disabled() -> bool:
    return os.environ.get("PDFS_NO_NUMBA", "").strip().lower() not in ("", "0", "false", "no")


try:
    if _flag_disabled():
        raise ImportError("numba disabled by PDFS_NO_NUMBA")
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def _padded_block_count(lengths: np.ndarray) -> np.ndarray:
    # pad10*1 always adds at least one byte
    return lengths // RATE + 1


# --------------------------------------------------------------------------
# numpy path
# --------------------------------------------------------------------------

def _rotl_np(a: np.ndarray, r: int) -> np.ndarray:
    if r == 0:
        return a
    return (a << np.uint64(r)) | (a >> np.uint64(64 - r))


def _permute_np(state: list[np.ndarray]) -> list[np.ndarray]:
    """Keccak-f[1600] over a list of 25 lane vectors (one entry per message)."""
    rot = [int(r) for r in _ROT]
    pi = [int(p) for p in _PI]
    b: list[np.ndarray] = [None] * 25  # type: ignore[list-item]
    for rnd in range(24):
        c = [state[x] ^ state[x + 5] ^ state[x + 10] ^ state[x + 15] ^ state[x + 20] for x in range(5)]
        d = [c[(x - 1) % 5] ^ _rotl_np(c[(x + 1) % 5], 1) for x in range(5)]
        for i in range(25):
            b[pi[i]] = _rotl_np(state[i] ^ d[i % 5], rot[i])
        for y in range(0, 25, 5):
            row = b[y:y + 5]
            for x in range(5):
                state[y + x] = row[x] ^ (~row[(x + 1) % 5] & row[(x + 2) % 5])
        state[0] = state[0] ^ _RC[rnd]
    return state


def _absorb_np(blocks: np.ndarray) -> np.ndarray:
    """blocks: (G, nb*RATE) uint8, already padded. Returns (G, 32) digests."""
    g = blocks.shape[0]
    nb = blocks.shape[1] // RATE
    lanes = np.ascontiguousarray(blocks).view("<u8").reshape(g, nb, LANES)
    state = [np.zeros(g, dtype=np.uint64) for _ in range(25)]
    for blk in range(nb):
        chunk = lanes[:, blk, :]
        for i in range(LANES):
            state[i] = state[i] ^ chunk[:, i]
        state = _permute_np(state)
    out = np.stack(state[:4], axis=1).astype("<u8", copy=False)
    return np.ascontiguousarray(out).view(np.uint8).reshape(g, 32)


def keccak256_batch_numpy(data: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    data = np.ascontiguousarray(data, dtype=np.uint8)
    offsets = np.asarray(offsets, dtype=np.int64)
    n = len(offsets) - 1
    out = np.empty((n, 32), dtype=np.uint8)
    if n == 0:
        return out
    lengths = np.diff(offsets)
    nblocks = _padded_block_count(lengths)
    for nb in np.unique(nblocks):
        sel = np.flatnonzero(nblocks == nb)
        lens = lengths[sel]
        width = int(nb) * RATE
        mat = np.zeros((len(sel), width), dtype=np.uint8)
        total = int(lens.sum())
        if total:
            rows = np.repeat(np.arange(len(sel)), lens)
            firsts = np.cumsum(lens) - lens
            cols = np.arange(total) - np.repeat(firsts, lens)
            mat[rows, cols] = data[np.repeat(offsets[sel], lens) + cols]
        mat[np.arange(len(sel)), lens] ^= 0x01
        mat[:, width - 1] ^= 0x80
        out[sel] = _absorb_np(mat)
    return out


def keccak256_fixed_numpy(messages: np.ndarray) -> np.ndarray:
    """Hash each row of an (N, L) uint8 array."""
    messages = np.ascontiguousarray(messages, dtype=np.uint8)
    n, length = messages.shape
    nb = length // RATE + 1
    mat = np.zeros((n, nb * RATE), dtype=np.uint8)
    mat[:, :length] = messages
    mat[:, length] ^= 0x01
    mat[:, -1] ^= 0x80
    return _absorb_np(mat)


# --------------------------------------------------------------------------
# numba path
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _permute_nb(a, rc, rot, pi):  # pragma: no cover - compiled
        c = np.empty(5, dtype=np.uint64)
        b = np.empty(25, dtype=np.uint64)
        one = np.uint64(1)
        sixty_four = np.uint64(64)
        for rnd in range(24):
            for x in range(5):
                c[x] = a[x] ^ a[x + 5] ^ a[x + 10] ^ a[x + 15] ^ a[x + 20]
            for x in range(5):
                cr = c[(x + 1) % 5]
                d = c[(x + 4) % 5] ^ ((cr << one) | (cr >> (sixty_four - one)))
                for y in range(0, 25, 5):
                    a[x + y] ^= d
            for i in range(25):
                r = rot[i]
                v = a[i]
                if r != 0:
                    v = (v << r) | (v >> (sixty_four - r))
                b[pi[i]] = v
            for y in range(0, 25, 5):
                for x in range(5):
                    a[y + x] = b[y + x] ^ (~b[y + (x + 1) % 5] & b[y + (x + 2) % 5])
            a[0] ^= rc[rnd]

    @njit(cache=True)
    def _batch_nb(data, offsets, rc, rot, pi):  # pragma: no cover - compiled
        n = offsets.shape[0] - 1
        out = np.empty((n, 32), dtype=np.uint8)
        a = np.zeros(25, dtype=np.uint64)
        block = np.zeros(RATE, dtype=np.uint8)
        for m in range(n):
            start = offsets[m]
            length = offsets[m + 1] - start
            nb = length // RATE + 1
            a[:] = 0
            for blk in range(nb):
                block[:] = 0
                base = blk * RATE
                take = length - base
                if take > RATE:
                    take = RATE
                for j in range(take):
                    block[j] = data[start + base + j]
                if blk == nb - 1:
                    block[length - base] ^= np.uint8(0x01)
                    block[RATE - 1] ^= np.uint8(0x80)
                for lane in range(LANES):
                    w = np.uint64(0)
                    for k in range(8):
                        w |= np.uint64(block[lane * 8 + k]) << np.uint64(8 * k)
                    a[lane] ^= w
                _permute_nb(a, rc, rot, pi)
            for lane in range(4):
                w = a[lane]
                for k in range(8):
                    out[m, lane * 8 + k] = np.uint8((w >> np.uint64(8 * k)) & np.uint64(0xFF))
        return out

    def keccak256_batch_numba(data: np.ndarray, offsets: np.ndarray) -> np.ndarray:
        data = np.ascontiguousarray(data, dtype=np.uint8)
        offsets = np.ascontiguousarray(offsets, dtype=np.int64)
        return _batch_nb(data, offsets, _RC, _ROT, _PI)

    def keccak256_fixed_numba(messages: np.ndarray) -> np.ndarray:
        messages = np.ascontiguousarray(messages, dtype=np.uint8)
        n, length = messages.shape
        offsets = np.arange(n + 1, dtype=np.int64) * length
        return _batch_nb(messages.reshape(-1), offsets, _RC, _ROT, _PI)

    keccak256_batch = keccak256_batch_numba
    keccak256_fixed = keccak256_fixed_numba
    BACKEND = "numba"
else:
    keccak256_batch_numba = None  # type: ignore[assignment]
    keccak256_fixed_numba = None  # type: ignore[assignment]
    keccak256_batch = keccak256_batch_numpy
    keccak256_fixed = keccak256_fixed_numpy
    BACKEND = "numpy"


def pack(messages: list[bytes]) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate messages into (flat buffer, offsets) for the batch kernels."""
    lengths = np.fromiter((len(m) for m in messages), dtype=np.int64, count=len(messages))
    offsets = np.zeros(len(messages) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    flat = np.frombuffer(b"".join(messages), dtype=np.uint8)
    return flat, offsets
