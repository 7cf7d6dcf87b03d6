"""A relying contract: a two-party bet settled on a verified match result."""
from __future__ import annotations

from dataclasses import dataclass

from . import jsonmini
from .authoritative import encode_proof
from .chain_sim import Context, Contract, Revert, entry, register, require
from .wire import WireError, decode_entry_response

CODE_ID = "relying-bet"
OUTCOMES = ("local", "visitor")


@dataclass(frozen=True)
class MatchRecord:
    id: str
    date: str
    local: str
    visitor: str
    localGoals: int
    visitorGoals: int

    @property
    def outcome(self) -> str:
        if self.localGoals > self.visitorGoals:
            return "local"
        if self.localGoals < self.visitorGoals:
            return "visitor"
        return "draw"


_FIELDS = {"id": str, "date": str, "local": str, "visitor": str, "localGoals": int, "visitorGoals": int}


def parse_match(content: bytes) -> tuple[MatchRecord, int]:
    """Decode a match entry; returns the record and parse tokens consumed."""
    value, tokens = jsonmini.parse(content)
    if not isinstance(value, dict):
        raise jsonmini.ParseError("match entry must be an object", 0)
    for name, typ in _FIELDS.items():
        if name not in value:
            raise jsonmini.ParseError(f"missing field {name!r}", 0)
        v = value[name]
        if not isinstance(v, typ) or isinstance(v, bool):
            raise jsonmini.ParseError(f"field {name!r} must be {typ.__name__}", 0)
        if typ is int and v < 0:
            raise jsonmini.ParseError(f"field {name!r} must be non-negative", 0)
    return MatchRecord(**{k: value[k] for k in _FIELDS}), tokens


@register
class BetContract(Contract):
    """Escrows equal deposits from two parties and pays whoever called the result.

    The creator funds its deposit at deployment; the counterparty funds with
    ``fund``. A draw, or predictions that do not single out one winner,
    refunds both deposits.
    """

    code_id = CODE_ID

    def init(self, ctx: Context, cc: str, match_id: str, parties: list, deposit: int, predictions: list) -> None:
        require(isinstance(cc, str) and cc in ctx.ledger.contracts, "unknown authoritative contract")
        require(isinstance(match_id, str) and match_id != "", "match id required")
        require(isinstance(parties, list) and len(parties) == 2 and parties[0] != parties[1], "need two parties")
        require(isinstance(predictions, list) and len(predictions) == 2
                and all(p in OUTCOMES for p in predictions), "predictions must be 'local' or 'visitor'")
        require(isinstance(deposit, int) and deposit > 0, "deposit must be positive")
        require(ctx.sender in parties, "creator must be a party")
        require(ctx.value == deposit, "creator must attach the deposit")
        self.cc = cc
        self.match_id = match_id
        self.parties = list(parties)
        self.deposit = deposit
        self.predictions = dict(zip(parties, predictions))
        self.funded = {p: p == ctx.sender for p in parties}
        self.settled = False
        self.outcome: str | None = None
        self.payouts: dict[str, int] = {}
        self.settled_by: int | None = None

    def state(self) -> dict:
        return {
            "cc": self.cc,
            "match_id": self.match_id,
            "parties": self.parties,
            "deposit": self.deposit,
            "predictions": self.predictions,
            "funded": self.funded,
            "settled": self.settled,
            "outcome": self.outcome,
            "payouts": self.payouts,
        }

    @entry
    def fund(self, ctx: Context) -> None:
        require(ctx.sender in self.funded, "sender is not a party")
        require(not self.funded[ctx.sender], "already funded")
        require(ctx.value == self.deposit, "must attach exactly the deposit")
        self.funded[ctx.sender] = True

    def _verify(self, ctx: Context, data: bytes, proof: list) -> None:
        # membership reverts on failure, which unwinds this whole call
        ctx.call(self.cc, "membership", data, proof, value=ctx.value)

    def _settle(self, ctx: Context, data: bytes) -> dict:
        try:
            record, tokens = parse_match(data)
        except jsonmini.ParseError as exc:
            raise Revert(f"verified entry does not match the data structure: {exc}") from None
        ctx.meter.tokens += tokens
        if record.id != self.match_id:
            return {"outcome": "ignored", "entry_id": record.id}
        outcome = record.outcome
        winners = [p for p in self.parties if self.predictions[p] == outcome]
        if len(winners) == 1:
            self.payouts = {winners[0]: 2 * self.deposit}
        else:
            self.payouts = {p: self.deposit for p in self.parties}
        for party, amount in self.payouts.items():
            ctx.transfer(party, amount)
        self.settled = True
        self.outcome = outcome
        return {"outcome": outcome, "payouts": dict(self.payouts)}

    def _ready(self, ctx: Context) -> None:
        require(not self.settled, "already settled")
        require(ctx.sender in self.funded, "sender is not a party")
        require(all(self.funded.values()), "both deposits must be escrowed first")

    @entry(fee="FEE_mem")
    def submit_data(self, ctx: Context, data: bytes, proof_mem: "proof") -> dict:
        self._ready(ctx)
        require(isinstance(data, bytes), "data must be bytes")
        self._verify(ctx, data, proof_mem)
        return self._settle(ctx, data)

    @entry(fee="FEE_mem")
    def if_censorship(self, ctx: Context, id: int) -> dict:
        self._ready(ctx)
        raw = ctx.call(self.cc, "get_response", id)
        require(raw != b"", "no response stored for this query yet")
        try:
            resp, tokens = decode_entry_response(raw)
        except WireError as exc:
            raise Revert(f"response carries no verifiable entry: {exc}") from None
        ctx.meter.tokens += tokens
        self._verify(ctx, resp.content, encode_proof(resp.proof))
        return self._settle(ctx, resp.content)
