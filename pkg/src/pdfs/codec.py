"""Canonical byte encoding for transaction arguments and state digests.

Each value is a one-byte tag followed by a 4-byte big-endian length (or item
count) and a payload. Encoding is injective and decode rejects any
non-canonical input, so ``encode(decode(b)) == b`` whenever decode succeeds.
"""
from __future__ import annotations

import struct

_LEN = struct.Struct(">I")


class CodecError(ValueError):
    pass


def _int_bytes(v: int) -> bytes:
    if v == 0:
        return b""
    return v.to_bytes((v.bit_length() + 8) // 8, "big", signed=True)


def encode(value) -> bytes:
    out = bytearray()
    _enc(value, out)
    return bytes(out)


def _enc(v, out: bytearray) -> None:
    if v is None:
        out += b"n"
    elif v is True:
        out += b"t"
    elif v is False:
        out += b"f"
    elif isinstance(v, int):
        raw = _int_bytes(v)
        out += b"i" + _LEN.pack(len(raw)) + raw
    elif isinstance(v, (bytes, bytearray, memoryview)):
        raw = bytes(v)
        out += b"b" + _LEN.pack(len(raw)) + raw
    elif isinstance(v, str):
        raw = v.encode("utf-8")
        out += b"s" + _LEN.pack(len(raw)) + raw
    elif isinstance(v, (list, tuple)):
        out += b"l" + _LEN.pack(len(v))
        for item in v:
            _enc(item, out)
    elif isinstance(v, dict):
        keys = sorted(v)
        if not all(isinstance(k, str) for k in keys):
            raise CodecError("dict keys must be strings")
        out += b"d" + _LEN.pack(len(keys))
        for k in keys:
            _enc(k, out)
            _enc(v[k], out)
    else:
        raise CodecError(f"cannot encode {type(v).__name__}")


def decode(data: bytes):
    value, pos = _dec(memoryview(bytes(data)), 0)
    if pos != len(data):
        raise CodecError("trailing bytes after value")
    return value


def _read_len(buf: memoryview, pos: int) -> tuple[int, int]:
    if pos + 4 > len(buf):
        raise CodecError("truncated length")
    return _LEN.unpack_from(buf, pos)[0], pos + 4


def _dec(buf: memoryview, pos: int):
    if pos >= len(buf):
        raise CodecError("truncated value")
    tag = bytes(buf[pos:pos + 1])
    pos += 1
    if tag == b"n":
        return None, pos
    if tag == b"t":
        return True, pos
    if tag == b"f":
        return False, pos
    if tag in (b"i", b"b", b"s"):
        n, pos = _read_len(buf, pos)
        if pos + n > len(buf):
            raise CodecError("truncated payload")
        raw = bytes(buf[pos:pos + n])
        pos += n
        if tag == b"b":
            return raw, pos
        if tag == b"s":
            try:
                return raw.decode("utf-8"), pos
            except UnicodeDecodeError as exc:
                raise CodecError(str(exc)) from None
        v = int.from_bytes(raw, "big", signed=True)
        if _int_bytes(v) != raw:
            raise CodecError("non-canonical integer")
        return v, pos
    if tag == b"l":
        n, pos = _read_len(buf, pos)
        items = []
        for _ in range(n):
            item, pos = _dec(buf, pos)
            items.append(item)
        return items, pos
    if tag == b"d":
        n, pos = _read_len(buf, pos)
        out: dict = {}
        prev = None
        for _ in range(n):
            k, pos = _dec(buf, pos)
            if not isinstance(k, str) or (prev is not None and k <= prev):
                raise CodecError("dict keys must be strictly sorted strings")
            prev = k
            out[k], pos = _dec(buf, pos)
        return out, pos
    raise CodecError(f"unknown tag {tag!r}")
