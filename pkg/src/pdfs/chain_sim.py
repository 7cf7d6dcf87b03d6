"""Deterministic in-process ledger that hosts contract state machines.

Transactions are signed (Ed25519) calls carrying canonical argument bytes and
an attached fee. The ledger orders them, stamps a block time, runs the target
contract's handler atomically and records everything, including failed calls,
in a public trace that can be replayed from genesis.
"""
from __future__ import annotations

import copy
import inspect
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, ClassVar

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.serialization import Encoding, NoEncryption, PrivateFormat, PublicFormat
from filelock import FileLock

from . import codec
from .hashing import get_hasher, keccak256

log = logging.getLogger(__name__)

ZERO_ADDRESS = "0x" + "00" * 20


# -- accounts ---------------------------------------------------------------

def address_of(public_key: bytes) -> str:
    return "0x" + keccak256(public_key)[-20:].hex()


def verify_signature(public_key: bytes, signature: bytes, message: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True


class Account:
    """Signing keypair plus its derived ledger address."""

    def __init__(self, private_key: Ed25519PrivateKey):
        self._key = private_key
        self.public_key = private_key.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
        self.address = address_of(self.public_key)

    def __repr__(self) -> str:
        return f"Account({self.address})"

    @classmethod
    def generate(cls) -> "Account":
        return cls(Ed25519PrivateKey.generate())

    @classmethod
    def from_seed(cls, seed: bytes | str) -> "Account":
        if isinstance(seed, str):
            seed = seed.encode()
        return cls(Ed25519PrivateKey.from_private_bytes(keccak256(seed)))

    def private_bytes(self) -> bytes:
        return self._key.private_bytes(Encoding.Raw, PrivateFormat.Raw, NoEncryption())

    def save(self, path: str | os.PathLike) -> None:
        Path(path).write_text(self.private_bytes().hex() + "\n")
        os.chmod(path, 0o600)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Account":
        return cls(Ed25519PrivateKey.from_private_bytes(bytes.fromhex(Path(path).read_text().strip())))

    def sign(self, message: bytes) -> bytes:
        return self._key.sign(message)

    def sign_call(self, target: str, function: str, args: bytes, fee: int, nonce: int) -> "Transaction":
        tx = Transaction(self.address, target, function, args, fee, nonce, self.public_key, b"")
        return replace(tx, signature=self.sign(tx.signing_bytes()))


# -- transactions -----------------------------------------------------------

@dataclass(frozen=True)
class Transaction:
    sender: str
    target: str
    function: str
    args: bytes
    fee: int
    nonce: int
    pubkey: bytes
    signature: bytes
    timestamp: int | None = None  # assigned by the ledger on inclusion

    def signing_bytes(self) -> bytes:
        return codec.encode(["pdfs-tx", self.sender, self.target, self.function, self.args, self.fee, self.nonce])

    def signature_ok(self) -> bool:
        return address_of(self.pubkey) == self.sender and verify_signature(
            self.pubkey, self.signature, self.signing_bytes()
        )

    @property
    def txid(self) -> str:
        return keccak256(self.signing_bytes() + self.signature).hex()

    def decoded_args(self) -> list:
        return codec.decode(self.args)

    def to_record(self) -> dict:
        return {
            "sender": self.sender,
            "target": self.target,
            "function": self.function,
            "args": self.args.hex(),
            "fee": self.fee,
            "nonce": self.nonce,
            "pubkey": self.pubkey.hex(),
            "signature": self.signature.hex(),
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Transaction":
        return cls(
            rec["sender"], rec["target"], rec["function"], bytes.fromhex(rec["args"]), int(rec["fee"]),
            int(rec["nonce"]), bytes.fromhex(rec["pubkey"]), bytes.fromhex(rec["signature"]), rec.get("timestamp"),
        )


@dataclass
class Receipt:
    status: str  # "ok" | "failed" | "rejected"
    position: int | None = None
    timestamp: int | None = None
    value: Any = None
    error: str | None = None
    hash_ops: int = 0
    parse_tokens: int = 0
    txid: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


class Revert(Exception):
    """Contract-level failure: the transaction is recorded but has no effect."""

    def __init__(self, reason: str, value: Any = None):
        super().__init__(reason)
        self.reason = reason
        self.value = value


def require(cond: bool, reason: str) -> None:
    if not cond:
        raise Revert(reason)


class LedgerError(Exception):
    pass


class Meter:
    """Per-transaction work counters: hash invocations and parse tokens."""

    def __init__(self):
        self.count = 0
        self.tokens = 0


# -- contracts --------------------------------------------------------------

CONTRACT_CODES: dict[str, type["Contract"]] = {}


def register(cls: type["Contract"]) -> type["Contract"]:
    CONTRACT_CODES[cls.code_id] = cls
    return cls


def entry(fn: Callable | None = None, *, view: bool = False, fee: str | None = None):
    """Mark a contract method as externally callable."""

    def wrap(f):
        f._pdfs_entry = {"view": view, "fee": fee}
        return f

    return wrap(fn) if fn is not None else wrap


class Contract:
    code_id: ClassVar[str] = ""

    def __init__(self, address: str, owner: str):
        self.address = address
        self.owner = owner

    def init(self, ctx: "Context", *params) -> None:
        pass

    def state(self) -> dict:
        """Canonical view of contract state (codec-encodable)."""
        raise NotImplementedError

    @classmethod
    def interface(cls) -> list[dict]:
        out = []
        for name, fn in inspect.getmembers(cls, inspect.isfunction):
            meta = getattr(fn, "_pdfs_entry", None)
            if meta is None:
                continue
            params = list(inspect.signature(fn).parameters.values())[2:]  # self, ctx
            out.append({
                "name": name,
                "inputs": [{"name": p.name, "type": _type_name(p.annotation)} for p in params],
                "view": meta["view"],
                "fee": meta["fee"],
            })
        return out


def _type_name(annotation) -> str:
    if annotation is inspect.Parameter.empty:
        return "any"
    return annotation if isinstance(annotation, str) else getattr(annotation, "__name__", str(annotation))


class Context:
    """What a handler sees: caller, attached value, block time, hashing, calls."""

    def __init__(self, ledger: "Ledger", address: str, sender: str, value: int, timestamp: int,
                 meter: Meter, depth: int = 0):
        self.ledger = ledger
        self.address = address
        self.sender = sender
        self.value = value
        self.timestamp = timestamp
        self.meter = meter
        self.depth = depth
        contract = ledger.contracts.get(address)
        self._hash_fn = ledger._hash_for(contract) if contract is not None else keccak256

    def hash(self, data: bytes) -> bytes:
        self.meter.count += 1
        return self._hash_fn(data)

    def now(self) -> int:
        return self.timestamp

    @property
    def balance(self) -> int:
        return self.ledger.balances.get(self.address, 0)

    def transfer(self, to: str, amount: int) -> None:
        self.ledger._move(self.address, to, amount)

    def call(self, target: str, function: str, *args, value: int = 0):
        require(self.depth < 8, "call depth exceeded")
        contract = self.ledger.contracts.get(target)
        require(contract is not None, f"no contract at {target}")
        self.ledger._move(self.address, target, value)
        sub = Context(self.ledger, target, self.address, value, self.timestamp, self.meter, self.depth + 1)
        return _dispatch(contract, sub, function, list(args))


def _dispatch(contract: Contract, ctx: Context, function: str, args: list):
    fn = getattr(contract, function, None)
    if fn is None or not hasattr(fn, "_pdfs_entry"):
        raise Revert(f"unknown function {function!r}")
    try:
        return fn(ctx, *args)
    except TypeError as exc:
        raise Revert(f"bad arguments for {function}: {exc}") from None


# -- the ledger -------------------------------------------------------------

@dataclass
class _Included:
    tx: Transaction
    receipt: Receipt


class Ledger:
    """Single serialization point for all transactions.

    ``clock="logical"`` stamps transaction i with time i + 1. ``clock="wall"``
    uses whole seconds of wall time, so several transactions can share a
    stamp.
    """

    def __init__(self, genesis: dict[str, int] | None = None, clock: str = "logical"):
        if clock not in ("logical", "wall"):
            raise ValueError("clock must be 'logical' or 'wall'")
        self.genesis = dict(genesis or {})
        if any(v < 0 for v in self.genesis.values()):
            raise ValueError("genesis balances must be non-negative")
        self.clock_mode = clock
        self.clock = 1
        self.balances: dict[str, int] = dict(self.genesis)
        self.contracts: dict[str, Contract] = {}
        self.nonces: dict[str, int] = {}
        self.history: list[_Included] = []
        self._mutex = threading.RLock()

    # public read API ---------------------------------------------------

    @property
    def transactions(self) -> list[Transaction]:
        return [inc.tx for inc in self.history]

    @property
    def receipts(self) -> list[Receipt]:
        return [inc.receipt for inc in self.history]

    def balance(self, address: str) -> int:
        return self.balances.get(address, 0)

    def next_nonce(self, address: str) -> int:
        return self.nonces.get(address, 0)

    def contract(self, address: str) -> Contract:
        try:
            return self.contracts[address]
        except KeyError:
            raise LedgerError(f"no contract at {address}") from None

    def total_supply(self) -> int:
        return sum(self.balances.values())

    # writes ------------------------------------------------------------

    def submit(self, tx: Transaction) -> Receipt:
        return self._apply(tx, None)

    def transact(self, account: Account, target: str, function: str, args: list | tuple = (), fee: int = 0) -> Receipt:
        with self._mutex:
            tx = account.sign_call(target, function, codec.encode(list(args)), fee, self.next_nonce(account.address))
            return self.submit(tx)

    def deploy(self, account: Account, code_id: str, params: list | tuple = (), fee: int = 0) -> Receipt:
        return self.transact(account, "", "__deploy__", [code_id, list(params)], fee)

    def transfer(self, account: Account, to: str, amount: int) -> Receipt:
        return self.transact(account, to, "", [], amount)

    def view(self, target: str, function: str, *args, sender: str = ZERO_ADDRESS, fee: int = 0):
        """Evaluate a call against current state and discard every effect."""
        with self._mutex:
            return self._view(target, function, args, sender, fee)

    def _view(self, target: str, function: str, args: tuple, sender: str, fee: int):
        snapshot = self._snapshot()
        try:
            contract = self.contract(target)
            self.balances[sender] = self.balances.get(sender, 0) + fee
            self._move(sender, target, fee)
            ctx = Context(self, target, sender, fee, self.clock, Meter())
            return _dispatch(contract, ctx, function, list(args))
        finally:
            self._restore(snapshot)

    # internals ---------------------------------------------------------

    @staticmethod
    def _hash_for(contract: Contract):
        return get_hasher(getattr(contract, "hash_name", None)).digest

    def _snapshot(self):
        return copy.deepcopy((self.contracts, self.balances))

    def _restore(self, snap) -> None:
        self.contracts, self.balances = snap

    def _move(self, src: str, dst: str, amount: int) -> None:
        if amount < 0:
            raise Revert("negative transfer")
        if amount == 0:
            return
        have = self.balances.get(src, 0)
        if have < amount:
            raise Revert(f"insufficient balance in {src}")
        self.balances[src] = have - amount
        self.balances[dst] = self.balances.get(dst, 0) + amount

    def _next_timestamp(self) -> int:
        if self.clock_mode == "logical":
            return self.clock
        return max(int(time.time()), self.clock)

    def _apply(self, tx: Transaction, timestamp: int | None) -> Receipt:
        with self._mutex:
            return self._apply_locked(tx, timestamp)

    def _apply_locked(self, tx: Transaction, timestamp: int | None) -> Receipt:
        if not tx.signature_ok():
            return Receipt("rejected", error="bad signature")
        if tx.fee < 0:
            return Receipt("rejected", error="negative fee")
        if tx.nonce != self.next_nonce(tx.sender):
            return Receipt("rejected", error=f"bad nonce {tx.nonce}, expected {self.next_nonce(tx.sender)}")
        if self.balance(tx.sender) < tx.fee:
            return Receipt("rejected", error="insufficient balance")
        try:
            args = tx.decoded_args()
        except codec.CodecError as exc:
            return Receipt("rejected", error=f"malformed args: {exc}")
        if not isinstance(args, list):
            return Receipt("rejected", error="args must encode a list")

        ts = self._next_timestamp() if timestamp is None else timestamp
        tx = replace(tx, timestamp=ts)
        position = len(self.history)
        receipt = Receipt("ok", position=position, timestamp=ts, txid=tx.txid)
        snapshot = self._snapshot()
        meter = Meter()
        try:
            receipt.value = self._execute(tx, args, meter)
        except Revert as exc:
            self._restore(snapshot)
            receipt.status, receipt.error, receipt.value = "failed", exc.reason, exc.value
        receipt.hash_ops = meter.count
        receipt.parse_tokens = meter.tokens
        self.nonces[tx.sender] = tx.nonce + 1
        self.clock = ts + 1 if self.clock_mode == "logical" else max(self.clock, ts)
        self.history.append(_Included(tx, receipt))
        log.debug("tx %d %s.%s -> %s", position, tx.target, tx.function, receipt.status)
        return receipt

    def _execute(self, tx: Transaction, args: list, meter: Meter):
        if tx.function == "__deploy__":
            require(tx.target == "" and len(args) == 2, "malformed deploy")
            code_id, params = args
            cls = CONTRACT_CODES.get(code_id)
            require(cls is not None, f"unknown contract code {code_id!r}")
            address = "0x" + keccak256(codec.encode(["contract", tx.sender, tx.nonce]))[-20:].hex()
            require(address not in self.contracts, "address collision")
            contract = cls(address, tx.sender)
            self.contracts[address] = contract
            self._move(tx.sender, address, tx.fee)
            ctx = Context(self, address, tx.sender, tx.fee, tx.timestamp, meter)
            contract.init(ctx, *params)
            return address
        if tx.target not in self.contracts:
            require(tx.function == "", f"no contract at {tx.target}")
            self._move(tx.sender, tx.target, tx.fee)
            return None
        contract = self.contracts[tx.target]
        self._move(tx.sender, tx.target, tx.fee)
        ctx = Context(self, tx.target, tx.sender, tx.fee, tx.timestamp, meter)
        return _dispatch(contract, ctx, tx.function, args)

    # replay and digests ----------------------------------------------

    @classmethod
    def replay(cls, genesis: dict[str, int], transactions: list[Transaction], clock: str = "logical") -> "Ledger":
        ledger = cls(genesis, clock=clock)
        for tx in transactions:
            r = ledger._apply(tx, tx.timestamp)
            if r.status == "rejected":
                raise LedgerError(f"replayed transaction rejected: {r.error}")
        return ledger

    def state(self) -> dict:
        return {
            "balances": {a: b for a, b in sorted(self.balances.items()) if b},
            "nonces": dict(sorted(self.nonces.items())),
            "clock": self.clock,
            "contracts": {a: {"code": c.code_id, "owner": c.owner, "state": c.state()}
                          for a, c in sorted(self.contracts.items())},
        }

    def state_digest(self) -> str:
        return keccak256(codec.encode(self.state())).hex()

    # trace export -------------------------------------------------------

    def dump(self) -> list[dict]:
        rows = []
        for inc in self.history:
            tx, r = inc.tx, inc.receipt
            rows.append({
                "position": r.position,
                "timestamp": r.timestamp,
                "sender": tx.sender,
                "target": tx.target,
                "function": tx.function,
                "args": tx.args.hex(),
                "fee": tx.fee,
                "status": r.status,
                "error": r.error,
                "nonce": tx.nonce,
                "pubkey": tx.pubkey.hex(),
                "signature": tx.signature.hex(),
                "txid": r.txid,
            })
        return rows

    def dump_jsonl(self) -> str:
        return "".join(json.dumps(row, separators=(",", ":")) + "\n" for row in self.dump())

    def dump_text(self) -> str:
        lines = []
        for row, inc in zip(self.dump(), self.history):
            try:
                shown = _short_args(inc.tx.decoded_args())
            except codec.CodecError:
                shown = row["args"]
            target = row["target"] or "(deploy)"
            lines.append(f"#{row['position']:<5} t={row['timestamp']:<10} {row['status']:<6} "
                         f"{row['sender']} -> {target} {row['function'] or '(transfer)'}"
                         f"({shown}) fee={row['fee']}" + (f"  error: {row['error']}" if row["error"] else ""))
        return "\n".join(lines)


def _short_args(args, limit: int = 120) -> str:
    def show(v):
        if isinstance(v, bytes):
            try:
                return repr(v.decode("utf-8"))
            except UnicodeDecodeError:
                return "0x" + v.hex()
        if isinstance(v, list):
            return "[" + ", ".join(show(x) for x in v) + "]"
        return repr(v)

    text = ", ".join(show(a) for a in args)
    return text if len(text) <= limit else text[: limit - 3] + "..."


# -- file-backed ledger shared between processes ---------------------------

class FileLedger(Ledger):
    """A Ledger persisted as JSON Lines and shared across processes.

    The first line holds genesis balances and the clock mode; every later
    line is one included transaction. Each process replays the file and
    catches up under a file lock before it writes.
    """

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        if not self.path.exists():
            raise LedgerError(f"no ledger at {self.path}; create one first")
        with self.path.open() as fh:
            header = json.loads(fh.readline())
        super().__init__(header["genesis"], clock=header.get("clock", "logical"))
        self._lock = FileLock(str(self.path) + ".lock")
        self._offset = len(self.path.read_bytes().split(b"\n", 1)[0]) + 1
        self.sync()

    @classmethod
    def create(cls, path: str | os.PathLike, genesis: dict[str, int] | None = None,
               clock: str = "logical") -> "FileLedger":
        path = Path(path)
        if path.exists():
            raise LedgerError(f"ledger {path} already exists")
        path.write_text(json.dumps({"genesis": dict(genesis or {}), "clock": clock}) + "\n")
        return cls(path)

    def sync(self) -> int:
        """Apply transactions appended by other processes; returns how many."""
        with self._mutex:
            return self._sync()

    def _sync(self) -> int:
        with self.path.open("rb") as fh:
            fh.seek(self._offset)
            chunk = fh.read()
        applied = 0
        complete = chunk.split(b"\n")[:-1]  # a trailing fragment is a write in progress
        for line in complete:
            if not line.strip():
                continue
            tx = Transaction.from_record(json.loads(line))
            r = self._apply(tx, tx.timestamp)
            if r.status == "rejected":
                raise LedgerError(f"ledger file holds an invalid transaction: {r.error}")
            applied += 1
        self._offset += sum(len(line) + 1 for line in complete)
        return applied

    def submit(self, tx: Transaction) -> Receipt:
        with self._mutex, self._lock:
            self.sync()
            return self._submit_locked(tx)

    def _submit_locked(self, tx: Transaction) -> Receipt:
        receipt = self._apply(tx, None)
        if receipt.status != "rejected":
            stored = replace(tx, timestamp=receipt.timestamp)
            line = (json.dumps(stored.to_record(), separators=(",", ":")) + "\n").encode()
            with self.path.open("ab") as fh:
                fh.write(line)
            self._offset += len(line)
        return receipt

    def transact(self, account: Account, target: str, function: str, args: list | tuple = (), fee: int = 0) -> Receipt:
        with self._mutex, self._lock:
            self.sync()
            tx = account.sign_call(target, function, codec.encode(list(args)), fee, self.next_nonce(account.address))
            return self._submit_locked(tx)

    def view(self, target: str, function: str, *args, sender: str = ZERO_ADDRESS, fee: int = 0):
        with self._mutex:
            self.sync()
            return super().view(target, function, *args, sender=sender, fee=fee)
