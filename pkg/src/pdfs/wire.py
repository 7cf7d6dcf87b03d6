"""Data-entry wire format: ``{"content": <entry bytes>, "proofs": [...]}``.

The content member is spliced in verbatim, never re-serialised, because the
leaf hash covers exactly those bytes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from . import jsonmini
from .merkle_log import ProofFormatError, SidedProof, proof_from_obj, proof_to_json


class WireError(ValueError):
    pass


@dataclass(frozen=True)
class EntryResponse:
    content: bytes
    proof: SidedProof
    index: int | None = None

    def to_bytes(self) -> bytes:
        return b'{"content":' + self.content + b',"proofs":' + proof_to_json(self.proof).encode() + b"}"


def decode_entry_response(raw: bytes) -> tuple[EntryResponse, int]:
    """Split a served entry back into exact content bytes and its proof.

    Returns the response and the number of parse tokens it took.
    """
    try:
        value, tokens, spans = jsonmini.parse_with_spans(raw)
    except jsonmini.ParseError as exc:
        raise WireError(f"entry response is not valid JSON: {exc}") from None
    if "content" not in value or "proofs" not in value:
        raise WireError("entry response needs 'content' and 'proofs'")
    start, end = spans["content"]
    try:
        proof = proof_from_obj(value["proofs"])
    except ProofFormatError as exc:
        raise WireError(str(exc)) from None
    return EntryResponse(raw[start:end], proof), tokens


def no_match_payload(filter_bytes: bytes) -> bytes:
    return json.dumps({"error": "no match", "filter": filter_bytes.decode("utf-8", "replace")},
                      separators=(",", ":")).encode()


def id_filter(entry_id: str) -> bytes:
    return json.dumps({"id": entry_id}, separators=(",", ":")).encode()
