import os
import subprocess
import sys

import numpy as np
import pytest
from Crypto.Hash import keccak

from pdfs import _kernels
from pdfs.hashing import get_hasher, keccak256


def ref(m: bytes) -> bytes:
    return keccak.new(digest_bits=256, data=m).digest()


def test_known_vector():
    # Keccak-256 of the empty string (pre-standard padding, as used by Ethereum)
    assert keccak256(b"").hex() == "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"


@pytest.mark.parametrize("impl", ["numpy", "numba"])
def test_batch_matches_reference_across_block_boundaries(impl):
    fn = getattr(_kernels, f"keccak256_batch_{impl}")
    if fn is None:
        pytest.skip("numba unavailable")
    msgs = [bytes((i * 7 + j) % 256 for j in range(i)) for i in range(0, 400)]
    flat, offsets = _kernels.pack(msgs)
    out = fn(flat, offsets)
    assert out.shape == (len(msgs), 32)
    for m, row in zip(msgs, out):
        assert row.tobytes() == ref(m)


@pytest.mark.parametrize("impl", ["numpy", "numba"])
def test_fixed_width_pairs(impl):
    fn = getattr(_kernels, f"keccak256_fixed_{impl}")
    if fn is None:
        pytest.skip("numba unavailable")
    rng = np.random.default_rng(3)
    rows = rng.integers(0, 256, size=(97, 64), dtype=np.uint8)
    out = fn(rows)
    for r, o in zip(rows, out):
        assert o.tobytes() == ref(r.tobytes())


def test_backends_agree_on_random_batch():
    if _kernels.keccak256_batch_numba is None:
        pytest.skip("numba unavailable")
    rng = np.random.default_rng(11)
    msgs = [rng.bytes(int(n)) for n in rng.integers(0, 300, size=200)]
    flat, offsets = _kernels.pack(msgs)
    a = _kernels.keccak256_batch_numba(flat, offsets)
    b = _kernels.keccak256_batch_numpy(flat, offsets)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("count", [4, 150])  # scalar path and kernel path
def test_hasher_batch_methods_match_single(count):
    h = get_hasher("keccak256")
    msgs = ([b"a", b"bb" * 100, b"x" * 136, b"y" * 135] * 40)[:count]
    many = h.digest_many(msgs)
    assert [r.tobytes() for r in many] == [h.digest(m) for m in msgs]
    half = count // 2
    pairs = h.digest_pairs(many[:half], many[half: 2 * half])
    for k in (0, half - 1):
        assert pairs[k].tobytes() == h.digest(many[k].tobytes() + many[half + k].tobytes())


@pytest.mark.parametrize("name", ["sha256", "sha3_256"])
def test_other_hashes_batch_fallback(name):
    h = get_hasher(name)
    msgs = [b"one", b"two"]
    assert [r.tobytes() for r in h.digest_many(msgs)] == [h.digest(m) for m in msgs]


def test_env_flag_forces_numpy_backend():
    env = dict(os.environ, PDFS_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from pdfs import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
