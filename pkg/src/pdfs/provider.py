"""Content provider: owns the log, signs the manifest, serves entries with proofs.

State directory layout::

    identity.key / identity.json   signing key standing in for the TLS keypair
    wallet.key                     ledger account that owns the contract
    admin.token                    shared secret for the admin HTTP endpoints
    entries.jsonl                  every appended entry, committed or staged
    service.json                   contract address, committed size, settings
"""
from __future__ import annotations

import json
import logging
import os
import secrets
import threading
from dataclasses import dataclass
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from .authoritative import CODE_ID as AUTHORITATIVE, DEFAULT_FEE_MEM, DEFAULT_FEE_QUERY, DEFAULT_K, \
    encode_proof, interface_descriptor
from .chain_sim import Account, Ledger, Receipt, verify_signature
from .hashing import DEFAULT_HASH
from .merkle_log import MerkleLog
from .wire import EntryResponse, no_match_payload

log = logging.getLogger(__name__)

MATCH_SCHEMA = "{id:string, date:string, local:string, visitor:string, localGoals:int, visitorGoals:int}"


class ProviderError(Exception):
    status = HTTPStatus.INTERNAL_SERVER_ERROR


class EntryNotFound(ProviderError):
    status = HTTPStatus.NOT_FOUND


class EntryNotCommitted(ProviderError):
    status = HTTPStatus.CONFLICT


class PublishRejected(ProviderError):
    """The contract refused an update; the batch stays staged and unserved."""

    status = HTTPStatus.CONFLICT

    def __init__(self, msg: str, receipt: Receipt | None = None):
        super().__init__(msg)
        self.receipt = receipt


# -- identity and manifest ----------------------------------------------------

class IdentityCredential:
    """Keypair plus certificate-like metadata for the provider's web identity."""

    def __init__(self, subject: str, account: Account):
        self.subject = subject
        self._account = account
        self.public_key = account.public_key

    @classmethod
    def generate(cls, subject: str) -> "IdentityCredential":
        return cls(subject, Account(Ed25519PrivateKey.generate()))

    def sign(self, message: bytes) -> bytes:
        return self._account.sign(message)

    def metadata(self) -> dict:
        return {"subject": self.subject, "public_key": self.public_key.hex(), "algorithm": "ed25519"}

    def save(self, directory: Path) -> None:
        self._account.save(directory / "identity.key")
        (directory / "identity.json").write_text(json.dumps(self.metadata(), indent=2) + "\n")

    @classmethod
    def load(cls, directory: Path) -> "IdentityCredential":
        meta = json.loads((directory / "identity.json").read_text())
        return cls(meta["subject"], Account.load(directory / "identity.key"))


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class Manifest:
    url: str
    sc_address: str
    sc_interface: dict
    data_structure: str
    signature: str

    def signed_fields(self) -> dict:
        return {"url": self.url, "sc_address": self.sc_address, "sc_interface": self.sc_interface,
                "data_structure": self.data_structure}

    def signed_bytes(self) -> bytes:
        return canonical_json(self.signed_fields())

    def to_bytes(self) -> bytes:
        signed = json.loads(self.signed_bytes())
        return json.dumps({"signed": signed, "signature": self.signature},
                          separators=(",", ":"), ensure_ascii=False).encode("utf-8")

    def verify(self, public_key: bytes) -> bool:
        try:
            sig = bytes.fromhex(self.signature)
        except ValueError:
            return False
        return verify_signature(public_key, sig, self.signed_bytes())

    @classmethod
    def build(cls, identity: IdentityCredential, url: str, sc_address: str, sc_interface: dict,
              data_structure: str) -> "Manifest":
        unsigned = cls(url, sc_address, sc_interface, data_structure, "")
        return cls(url, sc_address, sc_interface, data_structure, identity.sign(unsigned.signed_bytes()).hex())

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Manifest":
        try:
            doc = json.loads(raw)
            signed = doc["signed"]
            return cls(signed["url"], signed["sc_address"], signed["sc_interface"], signed["data_structure"],
                       doc["signature"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ManifestError(f"malformed manifest: {exc}") from None


# -- the service -------------------------------------------------------------

def _entry_bytes(doc) -> bytes:
    if isinstance(doc, (bytes, bytearray)):
        return bytes(doc)
    if isinstance(doc, str):
        return doc.encode("utf-8")
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


@dataclass
class PublishResult:
    size: int
    root: bytes
    receipt: Receipt | None


class ProviderService:
    def __init__(self, state_dir: str | os.PathLike, ledger: Ledger):
        self.state_dir = Path(state_dir)
        self.ledger = ledger
        cfg = json.loads((self.state_dir / "service.json").read_text())
        self.url = cfg["url"]
        self.contract = cfg["contract"]
        self.committed = cfg["committed"]
        self.identity = IdentityCredential.load(self.state_dir)
        self.wallet = Account.load(self.state_dir / "wallet.key")
        self.log = MerkleLog(hasher=cfg.get("hash", DEFAULT_HASH))
        entries = [json.loads(line)["data"].encode("utf-8")
                   for line in (self.state_dir / "entries.jsonl").read_text().splitlines() if line.strip()]
        if entries:
            self.log.extend(entries)
        self._ids: dict[str, int] = {}
        self._index_ids(0, self.log.size)
        self._write_lock = threading.Lock()
        self._responder: threading.Thread | None = None
        self._stop = threading.Event()
        if self.committed and self._contract_root() not in (None, self.log.root(self.committed)):
            log.warning("committed log root differs from the contract's latest root")

    # setup ------------------------------------------------------------------

    @classmethod
    def init_service(cls, state_dir: str | os.PathLike, ledger: Ledger, url: str,
                     data_structure: str = MATCH_SCHEMA, fee_mem: int = DEFAULT_FEE_MEM,
                     fee_query: int = DEFAULT_FEE_QUERY, k: int = DEFAULT_K, hash_name: str = DEFAULT_HASH,
                     identity: IdentityCredential | None = None, wallet: Account | None = None,
                     commit_manifest: bool = True) -> "ProviderService":
        state_dir = Path(state_dir)
        if state_dir.exists() and any(state_dir.iterdir()):
            raise ProviderError(f"state directory {state_dir} is not empty; refusing to overwrite")
        state_dir.mkdir(parents=True, exist_ok=True)
        identity = identity or IdentityCredential.generate(urlsplit(url).hostname or url)
        wallet = wallet or Account.generate()
        identity.save(state_dir)
        wallet.save(state_dir / "wallet.key")
        (state_dir / "admin.token").write_text(secrets.token_hex(16) + "\n")

        receipt = ledger.deploy(wallet, AUTHORITATIVE, [fee_mem, fee_query, k, hash_name])
        if not receipt.ok:
            raise ProviderError(f"contract deployment failed: {receipt.error}")
        address = receipt.value
        manifest = Manifest.build(identity, url, address, interface_descriptor(), data_structure)
        manifest_bytes = manifest.to_bytes()
        (state_dir / "entries.jsonl").write_text(json.dumps({"data": manifest_bytes.decode("utf-8")}) + "\n")
        committed = 0
        if commit_manifest:
            root = MerkleLog([manifest_bytes], hasher=hash_name).root()
            receipt = ledger.transact(wallet, address, "update", [root, []])
            if not receipt.ok:
                raise ProviderError(f"initial root update failed: {receipt.error}")
            committed = 1
        cfg = {"url": url, "contract": address, "committed": committed, "hash": hash_name}
        (state_dir / "service.json").write_text(json.dumps(cfg, indent=2) + "\n")
        return cls(state_dir, ledger)

    def _save_config(self) -> None:
        path = self.state_dir / "service.json"
        cfg = json.loads(path.read_text())
        cfg["committed"] = self.committed
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(cfg, indent=2) + "\n")
        tmp.replace(path)

    def _index_ids(self, lo: int, hi: int) -> None:
        for i in range(lo, hi):
            try:
                doc = json.loads(self.log.entry(i))
            except ValueError:
                continue
            if isinstance(doc, dict) and isinstance(doc.get("id"), str):
                self._ids[doc["id"]] = i

    def _contract_root(self) -> bytes | None:
        return self.ledger.view(self.contract, "latest_root")[1]

    @property
    def admin_token(self) -> str:
        return (self.state_dir / "admin.token").read_text().strip()

    @property
    def manifest_bytes(self) -> bytes:
        return self.log.entry(0)

    @property
    def manifest(self) -> Manifest:
        return Manifest.from_bytes(self.manifest_bytes)

    def root_info(self) -> dict:
        ts, root = self.ledger.view(self.contract, "latest_root")
        return {"size": self.committed, "root": self.log.root(self.committed).hex() if self.committed else None,
                "timestamp": ts, "contract_root": root.hex() if root else None}

    # publishing ---------------------------------------------------------------

    def publish_entries(self, batch) -> PublishResult:
        with self._write_lock:
            data = [_entry_bytes(d) for d in batch]
            if not data:
                return PublishResult(self.committed, self.log.root(self.committed), None)
            for d in data:
                if not d:
                    raise ProviderError("empty entry rejected")
                d.decode("utf-8")
            first_new = self.log.size
            self.log.extend(data)
            with (self.state_dir / "entries.jsonl").open("a") as fh:
                for d in data:
                    fh.write(json.dumps({"data": d.decode("utf-8")}) + "\n")
            return self._commit_staged(first_new)

    def _commit_staged(self, first_new: int) -> PublishResult:
        old, new = self.committed, self.log.size
        root = self.log.root(new)
        proof = self.log.consistency_proof(old, new) if old else []
        receipt = self.ledger.transact(self.wallet, self.contract, "update", [root, encode_proof(proof)])
        if not receipt.ok:
            log.error("ALARM: contract rejected root update %d -> %d: %s", old, new, receipt.error)
            raise PublishRejected(f"contract rejected update {old} -> {new}: {receipt.error}", receipt)
        self.committed = new
        self._save_config()
        self._index_ids(min(first_new, old), new)
        return PublishResult(new, root, receipt)

    def lock_service(self) -> Receipt:
        receipt = self.ledger.transact(self.wallet, self.contract, "lock")
        if not receipt.ok:
            raise ProviderError(f"lock failed: {receipt.error}")
        return receipt

    # serving ------------------------------------------------------------------

    def serve_entry(self, selector: int | str) -> EntryResponse:
        committed = self.committed
        if isinstance(selector, int):
            index = selector
            if not 0 <= index < self.log.size:
                raise EntryNotFound(f"no entry {index}")
        else:
            index = self._ids.get(selector)
            if index is None:
                staged = self._find_staged(selector)
                if staged is None:
                    raise EntryNotFound(f"no entry with id {selector!r}")
                index = staged
        if index >= committed:
            raise EntryNotCommitted(f"entry {index} is staged but not yet committed on-ledger")
        return EntryResponse(self.log.entry(index), self.log.membership_proof(index, committed), index)

    def _find_staged(self, entry_id: str) -> int | None:
        for i in range(self.committed, self.log.size):
            try:
                doc = json.loads(self.log.entry(i))
            except ValueError:
                continue
            if isinstance(doc, dict) and doc.get("id") == entry_id:
                return i
        return None

    # censorship responder -------------------------------------------------------

    def resolve_filter(self, filter_bytes: bytes) -> bytes:
        try:
            flt = json.loads(filter_bytes)
            resp = self.serve_entry(flt["id"] if isinstance(flt, dict) else None)
        except (ValueError, KeyError, TypeError, ProviderError):
            return no_match_payload(filter_bytes)
        return resp.to_bytes()

    def pending_queries(self) -> list[int]:
        if hasattr(self.ledger, "sync"):
            self.ledger.sync()
        contract = self.ledger.contract(self.contract)
        return [i for i in range(1, contract.counter + 1) if i not in contract.responses]

    def respond_pending(self) -> list[Receipt]:
        """Answer every unanswered on-ledger query once."""
        receipts = []
        with self._write_lock:
            contract = self.ledger.contract(self.contract)
            for qid in self.pending_queries():
                payload = self.resolve_filter(contract.queries[qid])
                r = self.ledger.transact(self.wallet, self.contract, "store_response", [qid, payload])
                if not r.ok:
                    log.error("store_response for query %d failed: %s", qid, r.error)
                receipts.append(r)
                contract = self.ledger.contract(self.contract)
        return receipts

    def start_responder(self, poll_interval: float = 0.5) -> threading.Thread:
        self._stop.clear()

        def loop():
            while not self._stop.is_set():
                try:
                    self.respond_pending()
                except Exception:  # keep the duty alive; errors are logged
                    log.exception("censorship responder iteration failed")
                self._stop.wait(poll_interval)

        self._responder = threading.Thread(target=loop, name="pdfs-responder", daemon=True)
        self._responder.start()
        return self._responder

    def stop_responder(self) -> None:
        self._stop.set()
        if self._responder is not None:
            self._responder.join(timeout=5)
            self._responder = None


# -- HTTP front end ------------------------------------------------------------

def make_http_server(service: ProviderService, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """Serve the provider over HTTP; port 0 picks a free port."""
    token = service.admin_token

    class Handler(BaseHTTPRequestHandler):
        server_version = "pdfs-provider"

        def log_message(self, fmt, *args):
            log.debug("http: " + fmt, *args)

        def _send(self, status: int, body: bytes, ctype: str = "application/json") -> None:
            self.send_response(status)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _error(self, status: int, msg: str) -> None:
            self._send(status, json.dumps({"error": msg}).encode())

        def do_GET(self):
            parts = urlsplit(self.path)
            path = parts.path.rstrip("/")
            try:
                if path == "/manifest":
                    return self._send(200, service.manifest_bytes)
                if path == "/root":
                    return self._send(200, json.dumps(service.root_info()).encode())
                if path == "/entries":
                    ids = parse_qs(parts.query).get("id")
                    if not ids:
                        return self._error(400, "missing id parameter")
                    return self._send(200, service.serve_entry(ids[0]).to_bytes())
                if path.startswith("/entries/"):
                    tail = path[len("/entries/"):]
                    if not tail.isdigit():
                        return self._error(400, "entry index must be a non-negative integer")
                    return self._send(200, service.serve_entry(int(tail)).to_bytes())
            except ProviderError as exc:
                return self._error(exc.status, str(exc))
            self._error(404, "not found")

        def do_POST(self):
            if self.headers.get("X-Admin-Token") != token:
                return self._error(403, "admin token required")
            path = urlsplit(self.path).path.rstrip("/")
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length) if length else b""
            try:
                if path == "/admin/publish":
                    docs = json.loads(body or b"[]")
                    if isinstance(docs, dict):
                        docs = docs.get("entries", [])
                    res = service.publish_entries(docs)
                    return self._send(200, json.dumps({"size": res.size, "root": res.root.hex()}).encode())
                if path == "/admin/lock":
                    service.lock_service()
                    return self._send(200, b'{"locked":true}')
            except ValueError as exc:
                return self._error(400, str(exc))
            except ProviderError as exc:
                return self._error(exc.status, str(exc))
            self._error(404, "not found")

    return ThreadingHTTPServer((host, port), Handler)


def serve_in_thread(server: ThreadingHTTPServer) -> threading.Thread:
    t = threading.Thread(target=server.serve_forever, name="pdfs-http", daemon=True)
    t.start()
    return t
