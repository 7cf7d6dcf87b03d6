import json
import random
import re

import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_feed
from pdfs import jsonmini
from pdfs.authoritative import encode_proof
from pdfs.bench import FIXED_MATCH
from pdfs.merkle_log import MerkleLog
from pdfs.relying import CODE_ID as RELYING, MatchRecord, parse_match
from pdfs.wire import EntryResponse, WireError, decode_entry_response, id_filter, no_match_payload

# The published data-entry example, with the comma missing after "date" restored.
SAMPLE_ENTRY = b'''{
    "id":"341576",
    "date":"2018-07-15T18:00:00Z",
    "local":"France",
    "visitor":"Croatia",
    "localGoals":4,
    "visitorGoals":2
  }'''
SAMPLE_AS_PUBLISHED = SAMPLE_ENTRY.replace(b'18:00:00Z",', b'18:00:00Z"', 1)

_LEX = re.compile(rb'\s*("(?:[^"\\]|\\.)*"|-?\d+|true|false|null|[{}\[\]:,])')


def lex_count(raw: bytes) -> int:
    """Independent token count: one per structural char, string, number or literal."""
    pos, n = 0, 0
    while pos < len(raw.rstrip()):
        m = _LEX.match(raw, pos)
        assert m, raw[pos:]
        pos, n = m.end(), n + 1
    return n


# -- parser ------------------------------------------------------------------

def test_sample_entry_parses():
    rec, tokens = parse_match(SAMPLE_ENTRY)
    assert rec == MatchRecord("341576", "2018-07-15T18:00:00Z", "France", "Croatia", 4, 2)
    assert rec.outcome == "local"
    assert tokens == lex_count(SAMPLE_ENTRY) == 25


def test_published_sample_missing_comma_rejected():
    with pytest.raises(jsonmini.ParseError):
        parse_match(SAMPLE_AS_PUBLISHED)


@pytest.mark.parametrize("doc,msg", [
    (b"{}", "missing field 'id'"),
    (b"[]", "must be an object"),
    (FIXED_MATCH.replace(b'"localGoals":4', b'"localGoals":"4"'), "must be int"),
    (FIXED_MATCH.replace(b'"localGoals":4', b'"localGoals":-4'), "non-negative"),
    (FIXED_MATCH.replace(b'"localGoals":4', b'"localGoals":true'), "must be int"),
])
def test_schema_violations(doc, msg):
    with pytest.raises(jsonmini.ParseError, match=msg):
        parse_match(doc)


@pytest.mark.parametrize("doc", [
    b"", b"{", b'{"a":1,}', b'{"a" 1}', b"[1 2]", b"01", b"1.5", b"1e3", b'{"a":1}x', b'"\x01"',
    b'"\\q"', b'"\\u12"', b'{"a":1,"a":2}', b"tru", b"[" * 40 + b"]" * 40, b'"\xff"', b"{1:2}", b"-",
])
def test_malformed_inputs_raise_parse_error(doc):
    with pytest.raises(jsonmini.ParseError):
        jsonmini.parse(doc)


# printable ASCII only: \uXXXX escapes are deliberately left undecoded
printable = st.text(st.characters(min_codepoint=32, max_codepoint=0x7e), max_size=12)
json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-10 ** 12, 10 ** 12) | printable,
    lambda inner: st.lists(inner, max_size=4) | st.dictionaries(printable, inner, max_size=4),
    max_leaves=15,
)


@settings(max_examples=200)
@given(json_values, st.booleans())
def test_agrees_with_stdlib_json(v, spaced):
    raw = json.dumps(v, separators=(", ", ": ") if spaced else (",", ":"), ensure_ascii=False).encode()
    value, tokens = jsonmini.parse(raw)
    assert value == json.loads(raw)
    assert tokens == lex_count(raw)


def test_mutation_fuzz_never_escapes_parse_error():
    rng = random.Random(2024)
    base = bytearray(FIXED_MATCH)
    for _ in range(1000):
        doc = bytearray(base)
        for _ in range(rng.randint(1, 4)):
            op = rng.random()
            i = rng.randrange(len(doc) or 1)
            if op < 0.4 and doc:
                doc[i] = rng.randrange(256)
            elif op < 0.7:
                doc.insert(i, rng.randrange(256))
            elif doc:
                del doc[i]
        try:
            parse_match(bytes(doc))
        except jsonmini.ParseError:
            pass


def test_spans_recover_embedded_bytes():
    raw = b'{"content": ' + SAMPLE_ENTRY + b' ,"proofs":[]}'
    _, _, spans = jsonmini.parse_with_spans(raw)
    s, e = spans["content"]
    assert raw[s:e] == SAMPLE_ENTRY


# -- wire format ---------------------------------------------------------------

def test_entry_response_roundtrip_keeps_bytes():
    log = MerkleLog([b"x", SAMPLE_ENTRY, b"y"])
    resp = EntryResponse(SAMPLE_ENTRY, log.membership_proof(1))
    back, tokens = decode_entry_response(resp.to_bytes())
    assert back.content == SAMPLE_ENTRY and back.proof == resp.proof
    assert tokens == lex_count(resp.to_bytes())


@pytest.mark.parametrize("raw", [b"[]", b'{"content":1}', b'{"content":{},"proofs":[{"side":3,"hash":""}]}', b"{"])
def test_bad_entry_responses(raw):
    with pytest.raises(WireError):
        decode_entry_response(raw)


def test_filters():
    assert id_filter("341576") == b'{"id":"341576"}'
    assert json.loads(no_match_payload(b'{"id":"x"}')) == {"error": "no match", "filter": '{"id":"x"}'}


# -- relying contract ------------------------------------------------------------

DRAW = FIXED_MATCH.replace(b'"localGoals":4', b'"localGoals":2')
OTHER = FIXED_MATCH.replace(b'"id":"341576"', b'"id":"999"')


@pytest.fixture
def bet(ledger, accounts):
    owner, alice, bob = accounts["owner"], accounts["alice"], accounts["bob"]
    cc, log = make_feed(ledger, owner, [b"manifest", FIXED_MATCH, DRAW, OTHER, b"not json"])
    rc = ledger.deploy(alice, RELYING, [cc, "341576", [alice.address, bob.address], 100, ["local", "visitor"]],
                       fee=100).value
    assert ledger.transact(bob, rc, "fund", [], fee=100).ok
    return ledger, cc, rc, log


def submit(ledger, who, rc, log, i, fee=10, data=None):
    data = log.entry(i) if data is None else data
    return ledger.transact(who, rc, "submit_data", [data, encode_proof(log.membership_proof(i))], fee=fee)


def test_settles_to_single_winner(bet, accounts):
    ledger, cc, rc, log = bet
    alice, bob, owner = accounts["alice"], accounts["bob"], accounts["owner"]
    r = submit(ledger, bob, rc, log, 1)
    assert r.ok and r.value == {"outcome": "local", "payouts": {alice.address: 200}}
    assert r.parse_tokens == 25
    assert ledger.balance(alice.address) == 10_000 - 100 + 200
    assert ledger.balance(bob.address) == 10_000 - 100 - 10
    assert ledger.balance(owner.address) == 10_000 + 10
    assert ledger.balance(rc) == 0
    assert submit(ledger, alice, rc, log, 1).error == "already settled"


def test_draw_refunds_both(bet, accounts):
    ledger, cc, rc, log = bet
    r = submit(ledger, accounts["alice"], rc, log, 2)
    assert r.value["outcome"] == "draw"
    assert r.value["payouts"] == {accounts["alice"].address: 100, accounts["bob"].address: 100}


def test_other_match_is_ignored(bet, accounts):
    ledger, cc, rc, log = bet
    r = submit(ledger, accounts["alice"], rc, log, 3)
    assert r.ok and r.value["outcome"] == "ignored"
    assert not ledger.contract(rc).settled


def test_tampered_goals_fail_membership(bet, accounts):
    ledger, cc, rc, log = bet
    forged = FIXED_MATCH.replace(b'"localGoals":4', b'"localGoals":1')
    alice = accounts["alice"]
    bal = ledger.balance(alice.address)
    r = submit(ledger, alice, rc, log, 1, data=forged)
    assert r.status == "failed" and r.error == "membership verification failed"
    assert ledger.balance(alice.address) == bal
    assert not ledger.contract(rc).settled


def test_verified_non_match_entry_reverts(bet, accounts):
    ledger, cc, rc, log = bet
    r = submit(ledger, accounts["alice"], rc, log, 4)
    assert r.status == "failed" and "data structure" in r.error


def test_wrong_fee_and_outsider(bet, accounts):
    ledger, cc, rc, log = bet
    assert "FEE_mem" in submit(ledger, accounts["alice"], rc, log, 1, fee=9).error
    assert submit(ledger, accounts["mallory"], rc, log, 1).error == "sender is not a party"


def test_unfunded_bet_cannot_settle(ledger, accounts):
    owner, alice, bob = accounts["owner"], accounts["alice"], accounts["bob"]
    cc, log = make_feed(ledger, owner, [b"m", FIXED_MATCH])
    rc = ledger.deploy(alice, RELYING, [cc, "341576", [alice.address, bob.address], 50, ["local", "visitor"]],
                       fee=50).value
    assert "deposits" in submit(ledger, alice, rc, log, 1).error
    assert ledger.transact(bob, rc, "fund", [], fee=49).status == "failed"
    assert ledger.transact(bob, rc, "fund", [], fee=50).ok
    assert ledger.transact(bob, rc, "fund", [], fee=50).error == "already funded"


@pytest.mark.parametrize("params,fee", [
    (lambda cc, a, b: [cc, "1", [a, b], 10, ["local", "draw"]], 10),
    (lambda cc, a, b: [cc, "1", [a, a], 10, ["local", "visitor"]], 10),
    (lambda cc, a, b: [cc, "1", [a, b], 10, ["local", "visitor"]], 9),
    (lambda cc, a, b: ["0x" + "00" * 20, "1", [a, b], 10, ["local", "visitor"]], 10),
])
def test_deploy_validation(ledger, accounts, params, fee):
    cc, _ = make_feed(ledger, accounts["owner"], [b"m"])
    a, b = accounts["alice"].address, accounts["bob"].address
    assert ledger.deploy(accounts["alice"], RELYING, params(cc, a, b), fee=fee).status == "failed"
    assert ledger.balance(a) == 10_000


def test_if_censorship_paths(bet, accounts):
    ledger, cc, rc, log = bet
    alice, bob, owner = accounts["alice"], accounts["bob"], accounts["owner"]
    qid = ledger.transact(alice, cc, "query", [id_filter("341576")], fee=25).value
    assert "no response" in ledger.transact(alice, rc, "if_censorship", [qid], fee=10).error
    assert ledger.transact(owner, cc, "store_response", [qid, no_match_payload(b"x")]).ok
    assert "no verifiable entry" in ledger.transact(alice, rc, "if_censorship", [qid], fee=10).error
    resp = EntryResponse(log.entry(1), log.membership_proof(1))
    qid2 = ledger.transact(alice, cc, "query", [id_filter("341576")], fee=25).value
    assert ledger.transact(owner, cc, "store_response", [qid2, resp.to_bytes()]).ok
    r = ledger.transact(bob, rc, "if_censorship", [qid2], fee=10)
    assert r.ok and r.value == {"outcome": "local", "payouts": {alice.address: 200}}
    assert r.parse_tokens > 25  # response envelope plus the match record
