"""Contract-party client: verify the manifest, deploy, settle, query on-ledger."""
from __future__ import annotations

import json
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import quote, urlsplit

from .authoritative import CODE_ID as AUTHORITATIVE, encode_proof
from .chain_sim import Account, Ledger, LedgerError, Revert
from .hashing import get_hasher
from .merkle_log import verify_membership
from .provider import Manifest, ManifestError
from .relying import CODE_ID as RELYING
from .wire import EntryResponse, WireError, decode_entry_response, id_filter

EXIT_OK = 0
EXIT_VERIFY = 2
EXIT_TRANSPORT = 3
EXIT_TIMEOUT = 4


class ClientError(Exception):
    exit_code = 1
    code = "error"


class VerificationError(ClientError):
    exit_code = EXIT_VERIFY
    code = "verification-failed"

    def __init__(self, msg: str, code: str | None = None):
        super().__init__(msg)
        if code:
            self.code = code


class TransportError(ClientError):
    exit_code = EXIT_TRANSPORT
    code = "transport-failed"


class CensorshipTimeout(ClientError):
    """No on-ledger response before the deadline; carries the public evidence."""

    exit_code = EXIT_TIMEOUT
    code = "censorship-timeout"

    def __init__(self, evidence: dict):
        super().__init__(f"query {evidence['query_id']} unanswered after {evidence['waited_s']:.1f}s "
                         f"(query tx at ledger position {evidence['query_position']})")
        self.evidence = evidence


@dataclass(frozen=True)
class TrustAnchor:
    domain: str
    public_key: bytes

    @classmethod
    def load(cls, path: str | Path) -> "TrustAnchor":
        doc = json.loads(Path(path).read_text())
        return cls(doc.get("subject") or doc["domain"], bytes.fromhex(doc["public_key"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps({"domain": self.domain, "public_key": self.public_key.hex()}) + "\n")


@dataclass
class QueryTicket:
    query_id: int
    position: int
    timestamp: int
    txid: str
    filter: bytes


@dataclass
class SettlementReport:
    contract: str
    status: str
    outcome: str | None = None
    payouts: dict = field(default_factory=dict)
    fee_spent: int = 0
    position: int | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def http_get(url: str, timeout: float = 5.0) -> bytes:
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            return resp.read()
    except urllib.error.HTTPError as exc:
        body = exc.read().decode("utf-8", "replace")
        raise TransportError(f"GET {url} -> HTTP {exc.code}: {body}") from None
    except (urllib.error.URLError, OSError) as exc:
        raise TransportError(f"GET {url} failed: {exc}; provider unreachable, "
                             "use `query` for a censorship-evident request") from None


class PartyClient:
    def __init__(self, provider_url: str, anchor: TrustAnchor, ledger: Ledger, account: Account,
                 http_timeout: float = 5.0):
        self.provider_url = provider_url.rstrip("/")
        self.anchor = anchor
        self.ledger = ledger
        self.account = account
        self.http_timeout = http_timeout
        self.manifest: Manifest | None = None

    # manifest -----------------------------------------------------------

    def fetch_and_verify_manifest(self) -> Manifest:
        raw = http_get(self.provider_url + "/manifest", self.http_timeout)
        try:
            manifest = Manifest.from_bytes(raw)
        except ManifestError as exc:
            raise VerificationError(str(exc), "bad-manifest") from None
        if not manifest.verify(self.anchor.public_key):
            raise VerificationError("manifest signature does not verify under the pinned key", "bad-signature")
        host = urlsplit(manifest.url).hostname
        if host != self.anchor.domain:
            raise VerificationError(f"manifest url host {host!r} is not the pinned domain {self.anchor.domain!r}",
                                    "wrong-domain")
        try:
            contract = self.ledger.contract(manifest.sc_address)
        except LedgerError:
            raise VerificationError(f"no contract at {manifest.sc_address}", "no-contract") from None
        if contract.code_id != AUTHORITATIVE:
            raise VerificationError("manifest points at a contract that is not authoritative", "no-contract")
        self.manifest = manifest
        # entry 0 must be exactly these manifest bytes, included under a retained root
        try:
            resp = self._get_entry_raw("/entries/0")
        except TransportError as exc:
            raise VerificationError(f"manifest is not committed to the log: {exc}", "not-committed") from None
        if resp.content != raw or not self.check_membership(resp):
            raise VerificationError("manifest is not committed to the log", "not-committed")
        return manifest

    def _require_manifest(self) -> Manifest:
        return self.manifest or self.fetch_and_verify_manifest()

    @property
    def cc(self) -> str:
        return self._require_manifest().sc_address

    def fees(self) -> tuple[int, int]:
        c = self.ledger.contract(self.cc)
        return c.fee_mem, c.fee_query

    # entries -----------------------------------------------------------

    def _get_entry_raw(self, path: str) -> EntryResponse:
        raw = http_get(self.provider_url + path, self.http_timeout)
        try:
            resp, _ = decode_entry_response(raw)
        except WireError as exc:
            raise VerificationError(f"malformed entry response: {exc}", "bad-response") from None
        return resp

    def fetch_entry(self, selector: int | str) -> EntryResponse:
        path = f"/entries/{selector}" if isinstance(selector, int) else f"/entries?id={quote(selector)}"
        return self._get_entry_raw(path)

    def check_membership(self, resp: EntryResponse) -> bool:
        """Local read-only check of an entry against the contract's retained roots."""
        contract = self.ledger.contract(self.cc)
        hash_fn = get_hasher(contract.hash_name).digest
        roots = [r for _, r in self.ledger.view(self.cc, "retained_roots")]
        return any(verify_membership(resp.content, resp.proof, r, hash_fn) for r in roots)

    # relying contract ----------------------------------------------------

    def deploy_relying(self, match_id: str, counterparty: str, deposit: int, prediction: str,
                       counter_prediction: str) -> str:
        r = self.ledger.deploy(self.account, RELYING,
                               [self.cc, match_id, [self.account.address, counterparty], deposit,
                                [prediction, counter_prediction]], fee=deposit)
        if not r.ok:
            raise ClientError(f"relying contract deployment failed: {r.error}")
        return r.value

    def fund(self, relying: str) -> None:
        deposit = self.ledger.contract(relying).deposit
        r = self.ledger.transact(self.account, relying, "fund", [], fee=deposit)
        if not r.ok:
            raise ClientError(f"funding failed: {r.error}")

    def _report(self, relying: str, receipt) -> SettlementReport:
        if not receipt.ok:
            err = receipt.error or "unknown failure"
            if "membership" in err or "verifiable" in err:
                raise VerificationError(f"settlement rejected at position {receipt.position}: {err}")
            return SettlementReport(relying, "failed", position=receipt.position, error=err)
        value = receipt.value or {}
        status = "ignored" if value.get("outcome") == "ignored" else "settled"
        fee_mem, _ = self.fees()
        return SettlementReport(relying, status, value.get("outcome"), value.get("payouts", {}), fee_mem,
                                receipt.position)

    def settle(self, relying: str, selector: int | str) -> SettlementReport:
        resp = self.fetch_entry(selector)
        return self.submit_entry(relying, resp)

    def submit_entry(self, relying: str, resp: EntryResponse) -> SettlementReport:
        fee_mem, _ = self.fees()
        r = self.ledger.transact(self.account, relying, "submit_data",
                                 [resp.content, encode_proof(resp.proof)], fee=fee_mem)
        return self._report(relying, r)

    def settle_from_query(self, relying: str, query_id: int) -> SettlementReport:
        fee_mem, _ = self.fees()
        r = self.ledger.transact(self.account, relying, "if_censorship", [query_id], fee=fee_mem)
        return self._report(relying, r)

    # censorship-evident path ---------------------------------------------

    def censor_query(self, flt: bytes | str) -> QueryTicket:
        if isinstance(flt, str):
            flt = id_filter(flt)
        _, fee_query = self.fees()
        r = self.ledger.transact(self.account, self.cc, "query", [flt], fee=fee_query)
        if not r.ok:
            raise ClientError(f"query rejected: {r.error}")
        return QueryTicket(r.value, r.position, r.timestamp, r.txid, flt)

    def await_response(self, query_id: int, timeout: float = 10.0, poll: float = 0.2) -> EntryResponse:
        start = time.monotonic()
        while True:
            if hasattr(self.ledger, "sync"):
                self.ledger.sync()
            try:
                raw = self.ledger.view(self.cc, "get_response", query_id)
            except Revert as exc:
                raise ClientError(f"cannot read response {query_id}: {exc.reason}") from None
            if raw:
                try:
                    resp, _ = decode_entry_response(raw)
                except WireError as exc:
                    raise VerificationError(f"provider answered without an entry: {raw[:200]!r} ({exc})",
                                            "no-match") from None
                return resp
            waited = time.monotonic() - start
            if waited >= timeout:
                raise CensorshipTimeout(self.censorship_evidence(query_id, waited))
            time.sleep(poll)

    def censorship_evidence(self, query_id: int, waited: float) -> dict:
        """Ledger positions proving the query was made and never answered."""
        query_tx = None
        for tx, rc in zip(self.ledger.transactions, self.ledger.receipts):
            if tx.target == self.cc and tx.function == "query" and rc.ok and rc.value == query_id:
                query_tx = (tx, rc)
                break
        if query_tx is None:
            raise ClientError(f"query {query_id} not found on the ledger")
        tx, rc = query_tx
        return {
            "query_id": query_id,
            "contract": self.cc,
            "query_position": rc.position,
            "query_timestamp": rc.timestamp,
            "query_txid": rc.txid,
            "filter": tx.decoded_args()[0].decode("utf-8", "replace"),
            "ledger_height": len(self.ledger.history),
            "answered": False,
            "waited_s": waited,
        }
