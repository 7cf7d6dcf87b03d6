import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from pdfs.chain_sim import Account, Ledger  # noqa: E402


@pytest.fixture
def accounts():
    return {name: Account.from_seed(f"test-{name}") for name in ("owner", "alice", "bob", "mallory")}


@pytest.fixture
def ledger(accounts):
    return Ledger({a.address: 10_000 for a in accounts.values()})


def leaves(n: int, tag: str = "d") -> list[bytes]:
    return [f"{tag}{i}".encode() for i in range(n)]


def make_feed(ledger, owner, entries, k=16, fee_mem=10, fee_query=25):
    """Deploy an authoritative contract and commit a log of ``entries`` to it."""
    from pdfs.authoritative import CODE_ID
    from pdfs.merkle_log import MerkleLog

    cc = ledger.deploy(owner, CODE_ID, [fee_mem, fee_query, k]).value
    log = MerkleLog(entries)
    assert ledger.transact(owner, cc, "update", [log.root(), []]).ok
    return cc, log


@pytest.fixture
def service(tmp_path, ledger, accounts):
    from pdfs.provider import ProviderService

    return ProviderService.init_service(tmp_path / "provider", ledger, "https://feed.example.org/v1",
                                        wallet=accounts["owner"])


@pytest.fixture
def http_service(service):
    from pdfs.provider import make_http_server, serve_in_thread

    server = make_http_server(service)
    serve_in_thread(server)
    host, port = server.server_address[:2]
    yield service, f"http://{host}:{port}"
    service.stop_responder()
    server.shutdown()
    server.server_close()
