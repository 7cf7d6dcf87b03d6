"""Command line: ``pdfs ledger|provider|party|bench ...``."""
from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading
from pathlib import Path

from . import bench
from .chain_sim import Account, FileLedger
from .party import EXIT_OK, ClientError, PartyClient, TrustAnchor
from .provider import ProviderError, ProviderService, make_http_server, serve_in_thread
from .wire import id_filter


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, default=lambda o: o.hex() if isinstance(o, bytes) else str(o)))


# -- ledger ----------------------------------------------------------------

def cmd_ledger_create(args) -> int:
    genesis = {}
    for item in args.fund or []:
        addr, _, amount = item.partition("=")
        genesis[addr.lower()] = int(amount)
    FileLedger.create(args.path, genesis, clock=args.clock)
    print(f"created ledger {args.path} with {len(genesis)} funded accounts")
    return 0


def cmd_ledger_account(args) -> int:
    acct = Account.generate()
    acct.save(args.key)
    print(acct.address)
    return 0


def cmd_ledger_dump(args) -> int:
    ledger = FileLedger(args.path)
    sys.stdout.write(ledger.dump_jsonl() if args.format == "jsonl" else ledger.dump_text() + "\n")
    return 0


# -- provider --------------------------------------------------------------

def cmd_provider_init(args) -> int:
    ledger = FileLedger(args.ledger)
    svc = ProviderService.init_service(args.state, ledger, args.url, fee_mem=args.fee_mem,
                                       fee_query=args.fee_query, k=args.k, hash_name=args.hash)
    _print_json({"contract": svc.contract, "owner": svc.wallet.address, "identity": svc.identity.metadata(),
                 "manifest_leaf_root": svc.log.root().hex()})
    return 0


def _load_docs(path: str) -> list:
    text = Path(path).read_text()
    try:
        docs = json.loads(text)
        return docs if isinstance(docs, list) else [docs]
    except ValueError:
        # JSON Lines: each non-blank line is one entry, kept byte-for-byte
        return [line.encode("utf-8") for line in text.splitlines() if line.strip()]


def cmd_provider_publish(args) -> int:
    svc = ProviderService(args.state, FileLedger(args.ledger))
    res = svc.publish_entries(_load_docs(args.entries))
    _print_json({"size": res.size, "root": res.root.hex(),
                 "position": res.receipt.position if res.receipt else None})
    return 0


def cmd_provider_lock(args) -> int:
    svc = ProviderService(args.state, FileLedger(args.ledger))
    r = svc.lock_service()
    print(f"contract {svc.contract} locked at ledger position {r.position}")
    return 0


def cmd_provider_respond(args) -> int:
    svc = ProviderService(args.state, FileLedger(args.ledger))
    receipts = svc.respond_pending()
    print(f"answered {len(receipts)} pending queries")
    return 0


def cmd_provider_serve(args) -> int:
    svc = ProviderService(args.state, FileLedger(args.ledger))
    server = make_http_server(svc, args.host, args.port)
    serve_in_thread(server)
    if not args.no_responder:
        svc.start_responder(args.poll)
    host, port = server.server_address[:2]
    print(f"serving {svc.url} for contract {svc.contract} on http://{host}:{port}", flush=True)
    done = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: done.set())
    try:
        done.wait()
    except KeyboardInterrupt:
        pass
    svc.stop_responder()
    server.shutdown()
    return 0


# -- party -----------------------------------------------------------------

def _party(args) -> PartyClient:
    cfg = json.loads(Path(args.config).read_text()) if args.config else {}
    url = args.provider_url or cfg.get("provider_url")
    key = args.pinned_key or cfg.get("pinned_key")
    ledger_path = args.ledger or cfg.get("ledger")
    account = args.account or cfg.get("account")
    missing = [n for n, v in (("provider_url", url), ("pinned_key", key), ("ledger", ledger_path),
                              ("account", account)) if not v]
    if missing:
        raise ClientError(f"missing configuration: {', '.join(missing)}")
    anchor = TrustAnchor.load(key)
    if args.domain or cfg.get("provider_domain"):
        anchor = TrustAnchor(args.domain or cfg["provider_domain"], anchor.public_key)
    return PartyClient(url, anchor, FileLedger(ledger_path), Account.load(account),
                       http_timeout=float(cfg.get("http_timeout", 5.0)))


def _selector(args):
    if args.index is not None:
        return args.index
    if args.id is not None:
        return args.id
    raise ClientError("give --index or --id")


def cmd_manifest_verify(args) -> int:
    m = _party(args).fetch_and_verify_manifest()
    _print_json({"verified": True, "url": m.url, "sc_address": m.sc_address, "data_structure": m.data_structure})
    return EXIT_OK


def cmd_deploy_relying(args) -> int:
    p = _party(args)
    address = p.deploy_relying(args.match_id, args.counterparty.lower(), args.deposit, args.prediction,
                               args.counter_prediction)
    print(address)
    return EXIT_OK


def cmd_fund(args) -> int:
    _party(args).fund(args.contract)
    print("funded")
    return EXIT_OK


def cmd_fetch_entry(args) -> int:
    p = _party(args)
    resp = p.fetch_entry(_selector(args))
    ok = p.check_membership(resp)
    sys.stdout.write(resp.to_bytes().decode("utf-8") + "\n")
    print(f"membership against retained roots: {'ok' if ok else 'FAILED'}", file=sys.stderr)
    return EXIT_OK if ok else 2


def cmd_settle(args) -> int:
    rep = _party(args).settle(args.contract, _selector(args))
    _print_json(rep.to_dict())
    return EXIT_OK if rep.status != "failed" else 1


def cmd_query(args) -> int:
    p = _party(args)
    ticket = p.censor_query(id_filter(args.id) if args.id else args.filter.encode())
    _print_json({"query_id": ticket.query_id, "position": ticket.position, "timestamp": ticket.timestamp,
                 "txid": ticket.txid, "filter": ticket.filter.decode()})
    return EXIT_OK


def cmd_await_response(args) -> int:
    p = _party(args)
    resp = p.await_response(args.query_id, timeout=args.timeout, poll=args.poll)
    if args.settle:
        _print_json(p.settle_from_query(args.settle, args.query_id).to_dict())
    else:
        sys.stdout.write(resp.to_bytes().decode("utf-8") + "\n")
    return EXIT_OK


def cmd_party_ledger_dump(args) -> int:
    p = _party(args)
    sys.stdout.write(p.ledger.dump_jsonl() if args.format == "jsonl" else p.ledger.dump_text() + "\n")
    return EXIT_OK


# -- bench -----------------------------------------------------------------

def cmd_bench_run(args) -> int:
    samples, report = bench.run_suite(bench.parse_sizes(args.sizes), trials=args.trials, seed=args.seed)
    bench.write_csv(samples, args.out)
    fit_path = args.fit or str(Path(args.out).with_suffix(".fit.json"))
    Path(fit_path).write_text(json.dumps(report, indent=2, default=str) + "\n")
    print(f"wrote {len(samples)} rows to {args.out}, fit report to {fit_path}")
    for kind in ("membership", "consistency"):
        if kind in report:
            f = report[kind]["hash_ops_fit"]
            print(f"{kind:12s} hash_ops = {f['a']:.2f} + {f['b']:.2f}*log2(n)   R^2 = {f['r2']:.4f}")
    return 0


def cmd_bench_censorship(args) -> int:
    samples, report = bench.censorship_size_sweep()
    bench.write_csv(samples, args.out)
    _print_json(report)
    return 0


def cmd_bench_backends(args) -> int:
    _print_json(bench.compare_backends(bench.parse_sizes(args.n)[0]))
    return 0


# -- wiring ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pdfs", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    top = ap.add_subparsers(dest="group", required=True)

    lg = top.add_parser("ledger", help="shared file-backed ledger").add_subparsers(dest="cmd", required=True)
    p = lg.add_parser("create")
    p.add_argument("path")
    p.add_argument("--fund", action="append", metavar="ADDR=AMOUNT")
    p.add_argument("--clock", choices=["logical", "wall"], default="logical")
    p.set_defaults(fn=cmd_ledger_create)
    p = lg.add_parser("new-account")
    p.add_argument("key", help="where to write the private key")
    p.set_defaults(fn=cmd_ledger_account)
    p = lg.add_parser("dump")
    p.add_argument("path")
    p.add_argument("--format", choices=["jsonl", "text"], default="jsonl")
    p.set_defaults(fn=cmd_ledger_dump)

    pv = top.add_parser("provider", help="content provider").add_subparsers(dest="cmd", required=True)
    for name, fn in (("init", cmd_provider_init), ("publish", cmd_provider_publish), ("lock", cmd_provider_lock),
                     ("respond", cmd_provider_respond), ("serve", cmd_provider_serve)):
        p = pv.add_parser(name)
        p.add_argument("--state", required=True)
        p.add_argument("--ledger", required=True)
        p.set_defaults(fn=fn)
        if name == "init":
            p.add_argument("--url", required=True)
            p.add_argument("--fee-mem", type=int, default=10)
            p.add_argument("--fee-query", type=int, default=25)
            p.add_argument("--k", type=int, default=16)
            p.add_argument("--hash", default="keccak256")
        elif name == "publish":
            p.add_argument("entries", help="JSON array or JSON Lines file of entries")
        elif name == "serve":
            p.add_argument("--host", default="127.0.0.1")
            p.add_argument("--port", type=int, default=8080)
            p.add_argument("--poll", type=float, default=1.0)
            p.add_argument("--no-responder", action="store_true")

    pt = top.add_parser("party", help="contract party client").add_subparsers(dest="cmd", required=True)

    def party_cmd(name, fn):
        p = pt.add_parser(name)
        p.add_argument("--config", help="JSON config: provider_url, pinned_key, ledger, account")
        p.add_argument("--provider-url")
        p.add_argument("--pinned-key", help="identity.json of the provider (public part)")
        p.add_argument("--domain")
        p.add_argument("--ledger")
        p.add_argument("--account")
        p.set_defaults(fn=fn)
        return p

    party_cmd("manifest-verify", cmd_manifest_verify)
    p = party_cmd("deploy-relying", cmd_deploy_relying)
    p.add_argument("--match-id", required=True)
    p.add_argument("--counterparty", required=True)
    p.add_argument("--deposit", type=int, required=True)
    p.add_argument("--prediction", choices=["local", "visitor"], required=True)
    p.add_argument("--counter-prediction", choices=["local", "visitor"], required=True)
    p = party_cmd("fund", cmd_fund)
    p.add_argument("--contract", required=True)
    for name, fn in (("fetch-entry", cmd_fetch_entry), ("settle", cmd_settle)):
        p = party_cmd(name, fn)
        p.add_argument("--index", type=int)
        p.add_argument("--id")
        if name == "settle":
            p.add_argument("--contract", required=True)
    p = party_cmd("query", cmd_query)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--id", help="entry id to ask for")
    g.add_argument("--filter", help="raw filter document")
    p = party_cmd("await-response", cmd_await_response)
    p.add_argument("--query-id", type=int, required=True)
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--poll", type=float, default=0.5)
    p.add_argument("--settle", metavar="CONTRACT", help="settle this relying contract from the response")
    p = party_cmd("ledger-dump", cmd_party_ledger_dump)
    p.add_argument("--format", choices=["jsonl", "text"], default="jsonl")

    bn = top.add_parser("bench", help="cost-trend benchmark").add_subparsers(dest="cmd", required=True)
    p = bn.add_parser("run")
    p.add_argument("--sizes", default="2^1,2^5,2^10,2^15,2^20")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="results.csv")
    p.add_argument("--fit", help="fit report path (default: <out>.fit.json)")
    p.set_defaults(fn=cmd_bench_run)
    p = bn.add_parser("censorship")
    p.add_argument("--out", default="censorship.csv")
    p.set_defaults(fn=cmd_bench_censorship)
    p = bn.add_parser("backends")
    p.add_argument("--n", default="2^16")
    p.set_defaults(fn=cmd_bench_backends)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ClientError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        if getattr(exc, "evidence", None):
            print(json.dumps(exc.evidence, indent=2), file=sys.stderr)
        return exc.exit_code
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
