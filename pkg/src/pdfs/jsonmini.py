"""Small recursive-descent JSON parser of the kind a contract can afford.

Supports objects, arrays, strings, integers and the three literals. Floats are
rejected; ``\\uXXXX`` escapes are kept verbatim rather than decoded. Every
token consumed is counted, which is the parse-cost figure the benchmark
reports. Top-level object members also carry their byte span so that callers
can recover an embedded document byte-for-byte.
"""
from __future__ import annotations

MAX_DEPTH = 32

_ESCAPES = {
    ord('"'): '"', ord("\\"): "\\", ord("/"): "/", ord("b"): "\b",
    ord("f"): "\f", ord("n"): "\n", ord("r"): "\r", ord("t"): "\t",
}
_WS = b" \t\r\n"
_DIGITS = b"0123456789"


class ParseError(ValueError):
    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at byte {pos}")
        self.pos = pos


class Parser:
    def __init__(self, data: bytes):
        if not isinstance(data, (bytes, bytearray)):
            raise TypeError("parser input must be bytes")
        self.data = bytes(data)
        self.pos = 0
        self.tokens = 0
        self.spans: dict[str, tuple[int, int]] = {}

    def _ws(self) -> None:
        d, p = self.data, self.pos
        while p < len(d) and d[p] in _WS:
            p += 1
        self.pos = p

    def _peek(self) -> int:
        self._ws()
        if self.pos >= len(self.data):
            raise ParseError("unexpected end of input", self.pos)
        return self.data[self.pos]

    def _expect(self, ch: bytes) -> None:
        if self._peek() != ch[0]:
            raise ParseError(f"expected {ch.decode()!r}", self.pos)
        self.pos += 1
        self.tokens += 1

    def parse_document(self):
        value = self.value(0, top=True)
        self._ws()
        if self.pos != len(self.data):
            raise ParseError("trailing data", self.pos)
        return value

    def value(self, depth: int, top: bool = False):
        if depth > MAX_DEPTH:
            raise ParseError("nesting too deep", self.pos)
        c = self._peek()
        if c == ord("{"):
            return self.obj(depth, top)
        if c == ord("["):
            return self.arr(depth)
        if c == ord('"'):
            return self.string()
        if c == ord("-") or c in _DIGITS:
            return self.integer()
        for word, val in ((b"true", True), (b"false", False), (b"null", None)):
            if self.data.startswith(word, self.pos):
                self.pos += len(word)
                self.tokens += 1
                return val
        raise ParseError(f"unexpected byte {chr(c)!r}", self.pos)

    def obj(self, depth: int, top: bool) -> dict:
        self._expect(b"{")
        out: dict = {}
        if self._peek() == ord("}"):
            self._expect(b"}")
            return out
        while True:
            if self._peek() != ord('"'):
                raise ParseError("object key must be a string", self.pos)
            key = self.string()
            if key in out:
                raise ParseError(f"duplicate key {key!r}", self.pos)
            self._expect(b":")
            self._ws()
            start = self.pos
            out[key] = self.value(depth + 1)
            if top:
                self.spans[key] = (start, self.pos)
            if self._peek() == ord(","):
                self._expect(b",")
                continue
            self._expect(b"}")
            return out

    def arr(self, depth: int) -> list:
        self._expect(b"[")
        out: list = []
        if self._peek() == ord("]"):
            self._expect(b"]")
            return out
        while True:
            out.append(self.value(depth + 1))
            if self._peek() == ord(","):
                self._expect(b",")
                continue
            self._expect(b"]")
            return out

    def string(self) -> str:
        d = self.data
        start = self.pos
        self.pos += 1  # opening quote, already peeked
        buf = bytearray()
        while True:
            if self.pos >= len(d):
                raise ParseError("unterminated string", start)
            c = d[self.pos]
            if c == ord('"'):
                self.pos += 1
                break
            if c < 0x20:
                raise ParseError("control character in string", self.pos)
            if c == ord("\\"):
                if self.pos + 1 >= len(d):
                    raise ParseError("unterminated escape", self.pos)
                e = d[self.pos + 1]
                if e == ord("u"):
                    hexpart = d[self.pos + 2: self.pos + 6]
                    if len(hexpart) != 4 or any(h not in b"0123456789abcdefABCDEF" for h in hexpart):
                        raise ParseError("bad \\u escape", self.pos)
                    buf += d[self.pos: self.pos + 6]
                    self.pos += 6
                    continue
                if e not in _ESCAPES:
                    raise ParseError("bad escape", self.pos)
                buf += _ESCAPES[e].encode()
                self.pos += 2
                continue
            buf.append(c)
            self.pos += 1
        self.tokens += 1
        try:
            return buf.decode("utf-8")
        except UnicodeDecodeError:
            raise ParseError("invalid UTF-8 in string", start) from None

    def integer(self) -> int:
        d = self.data
        start = self.pos
        if d[self.pos] == ord("-"):
            self.pos += 1
        digits_at = self.pos
        while self.pos < len(d) and d[self.pos] in _DIGITS:
            self.pos += 1
        digits = d[digits_at: self.pos]
        if not digits:
            raise ParseError("expected digits", self.pos)
        if len(digits) > 1 and digits[0] == ord("0"):
            raise ParseError("leading zero", digits_at)
        if self.pos < len(d) and d[self.pos] in b".eE":
            raise ParseError("non-integer numbers are not supported", self.pos)
        self.tokens += 1
        return int(d[start: self.pos])


def parse(data: bytes):
    """Parse a complete document; returns (value, tokens consumed)."""
    p = Parser(data)
    return p.parse_document(), p.tokens


def parse_with_spans(data: bytes):
    """Parse a top-level object; returns (value, tokens, {key: (start, end)})."""
    p = Parser(data)
    value = p.parse_document()
    if not isinstance(value, dict):
        raise ParseError("expected a top-level object", 0)
    return value, p.tokens, p.spans
