import json

import pytest
from hypothesis import given, settings, strategies as st

import oracle
from conftest import leaves
from pdfs.hashing import get_hasher
from pdfs.merkle_log import (MerkleLog, ProofElement, ProofFormatError, Side, largest_pow2_below,
                             membership_root, mth_dual, proof_from_json, proof_to_json,
                             verify_consistency, verify_membership)

H = oracle.H


def as_tuples(proof):
    return [(int(s), d) for s, d in proof]


def test_largest_pow2_below():
    assert [largest_pow2_below(n) for n in range(2, 11)] == [1, 2, 2, 4, 4, 4, 4, 8, 8]


def test_root_matches_oracle_small_sizes():
    data = leaves(40)
    log = MerkleLog()
    for n in range(1, 41):
        log.append(data[n - 1])
        assert log.root() == oracle.mth(data[:n])


def test_eight_leaf_root_shape():
    d = leaves(8)
    h = [H(x) for x in d]
    h01, h23, h45, h67 = H(h[0] + h[1]), H(h[2] + h[3]), H(h[4] + h[5]), H(h[6] + h[7])
    assert MerkleLog(d).root() == H(H(h01 + h23) + H(h45 + h67))


def test_five_to_eight_consistency_example():
    d = leaves(8)
    h = [H(x) for x in d]
    h0123 = H(H(h[0] + h[1]) + H(h[2] + h[3]))
    h67 = H(h[6] + h[7])
    log = MerkleLog(d)
    proof = log.consistency_proof(5, 8)
    assert proof == [ProofElement(Side.LEFT, h[4]), ProofElement(Side.RIGHT, h[5]),
                     ProofElement(Side.RIGHT, h67), ProofElement(Side.LEFT, h0123)]
    new, old = mth_dual(proof, None, H)
    assert new == H(h0123 + H(H(h[4] + h[5]) + h67)) == log.root(8)
    assert old == H(h0123 + h[4]) == log.root(5)


def test_leaf_two_of_five_sides():
    log = MerkleLog(leaves(5))
    proof = log.membership_proof(2, 5)
    assert [p.side for p in proof] == [Side.RIGHT, Side.LEFT, Side.RIGHT]
    assert mth_dual(proof, H(b"d2"), H)[0] == log.root(5)


def test_two_to_four_proof_is_anchor_plus_right():
    log = MerkleLog(leaves(4))
    proof = log.consistency_proof(2, 4)
    assert [p.side for p in proof] == [Side.LEFT, Side.RIGHT]
    assert verify_consistency(proof, log.root(2), log.root(4), H)


def test_proofs_match_oracle_exhaustively_up_to_33():
    data = leaves(33, "e")
    log = MerkleLog(data)
    for n in range(1, 34):
        for m in range(n):
            assert as_tuples(log.membership_proof(m, n)) == oracle.path(m, data[:n])
        for m in range(1, n):
            p = log.consistency_proof(m, n)
            assert as_tuples(p) == oracle.subproof(m, data[:n])
            assert oracle.fold(as_tuples(p)) == (oracle.mth(data[:n]), oracle.mth(data[:m]))


def test_proof_length_bounds():
    log = MerkleLog(leaves(100))
    for n in range(2, 101):
        depth = (n - 1).bit_length()
        for m in range(n):
            assert len(log.membership_proof(m, n)) <= depth
        for m in range(1, n):
            assert len(log.consistency_proof(m, n)) <= depth + 1


def test_incremental_and_batch_agree():
    data = leaves(300)
    one = MerkleLog()
    for d in data:
        one.append(d)
    many = MerkleLog()
    for lo, hi in ((0, 1), (1, 7), (7, 64), (64, 65), (65, 300)):
        many.extend(data[lo:hi])
    for n in (1, 2, 3, 64, 65, 129, 300):
        assert one.root(n) == many.root(n) == MerkleLog(data[:n]).root()


@pytest.mark.parametrize("name", ["sha256", "sha3_256"])
def test_selectable_hash(name):
    h = get_hasher(name).digest
    log = MerkleLog(leaves(6), hasher=name)
    assert log.root() == h(h(h(h(b"d0") + h(b"d1")) + h(h(b"d2") + h(b"d3"))) + h(h(b"d4") + h(b"d5")))
    assert log.verify_consistency(log.consistency_proof(3, 6), 3, 6)


def test_rejects_bad_entries_and_ranges():
    log = MerkleLog()
    with pytest.raises(ValueError):
        log.append(b"")
    with pytest.raises(TypeError):
        log.append("text")
    with pytest.raises(ValueError):
        log.root()
    log.extend(leaves(4))
    with pytest.raises(IndexError):
        log.membership_proof(4, 4)
    with pytest.raises(ValueError):
        log.consistency_proof(4, 4)
    with pytest.raises(ValueError):
        log.consistency_proof(0, 4)
    with pytest.raises(ValueError):
        log.root(5)


def test_empty_consistency_proof_never_verifies():
    log = MerkleLog(leaves(2))
    assert not verify_consistency([], log.root(1), log.root(2), H)


def test_anchor_side_is_ignored():
    log = MerkleLog(leaves(8))
    proof = log.consistency_proof(5, 8)
    flipped = [ProofElement(Side.RIGHT, proof[0].digest)] + proof[1:]
    assert mth_dual(flipped, None, H) == mth_dual(proof, None, H)


def test_wire_roundtrip_and_strictness():
    proof = MerkleLog(leaves(5)).membership_proof(2)
    text = proof_to_json(proof)
    assert json.loads(text)[0] == {"side": 1, "hash": proof[0].digest.hex()}
    assert proof_from_json(text) == proof
    for bad in ('{"side":0}', '[{"side":2,"hash":"' + "00" * 32 + '"}]', '[{"side":true,"hash":"' + "00" * 32 + '"}]',
                '[{"side":0,"hash":"' + "AB" * 32 + '"}]', '[{"side":0,"hash":"00"}]',
                '[{"side":0,"hash":"' + "00" * 32 + '","x":1}]', "not json"):
        with pytest.raises(ProofFormatError):
            proof_from_json(bad)


# -- properties ------------------------------------------------------------

entries = st.lists(st.binary(min_size=1, max_size=24), min_size=1, max_size=70)
# a side flip is invisible when sibling == accumulator, which needs duplicate entries
distinct_entries = st.lists(st.binary(min_size=1, max_size=24), min_size=1, max_size=70, unique=True)


@settings(max_examples=60, deadline=None)
@given(entries, st.data())
def test_membership_verifies_and_matches_dual_fold(data, draw):
    log = MerkleLog(data)
    i = draw.draw(st.integers(0, len(data) - 1))
    proof = log.membership_proof(i)
    leaf = H(data[i])
    assert membership_root(proof, leaf, H) == mth_dual(proof, leaf, H)[0] == log.root()
    assert verify_membership(data[i], proof, log.root(), H)


@settings(max_examples=60, deadline=None)
@given(entries, st.data())
def test_consistency_reproduces_both_roots(data, draw):
    if len(data) < 2:
        return
    n = draw.draw(st.integers(2, len(data)))
    m = draw.draw(st.integers(1, n - 1))
    log = MerkleLog(data)
    assert mth_dual(log.consistency_proof(m, n), None, H) == (log.root(n), log.root(m))


@settings(max_examples=60, deadline=None)
@given(distinct_entries, st.data())
def test_single_bit_flip_breaks_membership(data, draw):
    log = MerkleLog(data)
    i = draw.draw(st.integers(0, len(data) - 1))
    proof = log.membership_proof(i)
    target = draw.draw(st.integers(0, len(proof)))
    if target == len(proof):
        raw = bytearray(data[i])
        bit = draw.draw(st.integers(0, len(raw) * 8 - 1))
        raw[bit // 8] ^= 1 << (bit % 8)
        assert not verify_membership(bytes(raw), proof, log.root(), H)
    else:
        side, dig = proof[target]
        if draw.draw(st.booleans()):
            raw = bytearray(dig)
            bit = draw.draw(st.integers(0, 255))
            raw[bit // 8] ^= 1 << (bit % 8)
            proof[target] = ProofElement(side, bytes(raw))
        else:
            proof[target] = ProofElement(Side(1 - side), dig)
        assert not verify_membership(data[i], proof, log.root(), H)


@settings(max_examples=40, deadline=None)
@given(entries, st.data())
def test_replacing_a_historical_entry_breaks_consistency(data, draw):
    if len(data) < 2:
        return
    n = len(data)
    m = draw.draw(st.integers(1, n - 1))
    j = draw.draw(st.integers(0, m - 1))
    forged = list(data)
    forged[j] = forged[j] + b"!"
    honest, fork = MerkleLog(data), MerkleLog(forged)
    assert not verify_consistency(fork.consistency_proof(m, n), honest.root(m), fork.root(n), H)
