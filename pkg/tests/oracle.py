"""Naive reference tree: recomputes everything from the entries on each call.

Shares no code with pdfs.merkle_log beyond the hash function; proofs are
derived straight from the recursive definition.
"""
from Crypto.Hash import keccak

LEFT, RIGHT = 0, 1


def H(data: bytes) -> bytes:
    return keccak.new(digest_bits=256, data=data).digest()


def split(n: int) -> int:
    k = 1
    while k * 2 < n:
        k *= 2
    return k


def mth(leaves: list[bytes]) -> bytes:
    if len(leaves) == 1:
        return H(leaves[0])
    k = split(len(leaves))
    return H(mth(leaves[:k]) + mth(leaves[k:]))


def path(m: int, leaves: list[bytes]) -> list[tuple[int, bytes]]:
    """Bottom-up sibling list with the side each sibling sits on."""
    if len(leaves) == 1:
        return []
    k = split(len(leaves))
    if m < k:
        return path(m, leaves[:k]) + [(RIGHT, mth(leaves[k:]))]
    return path(m - k, leaves[k:]) + [(LEFT, mth(leaves[:k]))]


def subproof(m: int, leaves: list[bytes]) -> list[tuple[int, bytes]]:
    """Anchor (the old tree's rightmost complete subtree) first, then siblings bottom-up."""
    n = len(leaves)
    if m == n:
        return [(LEFT, mth(leaves))]
    k = split(n)
    if m <= k:
        return subproof(m, leaves[:k]) + [(RIGHT, mth(leaves[k:]))]
    return subproof(m - k, leaves[k:]) + [(LEFT, mth(leaves[:k]))]


def fold(proof, leaf=None):
    """Both accumulators written out independently of the library."""
    if leaf is None:
        hx = hy = proof[0][1]
        proof = proof[1:]
    else:
        hx = hy = leaf
    for side, h in proof:
        if side == RIGHT:
            hx = H(hx + h)
        else:
            hx, hy = H(h + hx), H(h + hy)
    return hx, hy
