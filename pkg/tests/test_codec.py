import pytest
from hypothesis import given, strategies as st

from pdfs.codec import CodecError, decode, encode

values = st.recursive(
    st.none() | st.booleans() | st.integers(-2 ** 300, 2 ** 300) | st.binary(max_size=40) | st.text(max_size=20),
    lambda inner: st.lists(inner, max_size=5) | st.dictionaries(st.text(max_size=8), inner, max_size=4),
    max_leaves=20,
)


@given(values)
def test_roundtrip(v):
    assert decode(encode(v)) == v


@given(values, values)
def test_injective(a, b):
    if encode(a) == encode(b):
        assert a == b


def test_bool_and_int_are_distinct():
    assert encode(True) != encode(1)
    assert encode(0) == b"i\x00\x00\x00\x00"


@pytest.mark.parametrize("raw", [
    b"",                          # nothing
    b"x",                         # unknown tag
    b"i\x00\x00\x00\x02\x00\x01",  # non-minimal int
    b"b\x00\x00\x00\x05ab",       # truncated
    b"nn",                        # trailing bytes
    b"s\x00\x00\x00\x01\xff",     # invalid utf-8
])
def test_rejects_non_canonical(raw):
    with pytest.raises(CodecError):
        decode(raw)


def test_rejects_unsorted_dict_keys():
    good = encode({"a": 1, "b": 2})
    # swap the two key/value records
    ka = good.index(b"s\x00\x00\x00\x01a")
    kb = good.index(b"s\x00\x00\x00\x01b")
    swapped = good[:ka] + good[kb:] + good[ka:kb]
    with pytest.raises(CodecError):
        decode(swapped)
