"""The provider-owned contract that stores log roots and answers verifications."""
from __future__ import annotations

from .chain_sim import Context, Contract, Revert, entry, register, require
from .hashing import DEFAULT_HASH, get_hasher
from .merkle_log import ProofElement, Side, SidedProof, membership_root, mth_dual

CODE_ID = "authoritative"

DEFAULT_FEE_MEM = 10
DEFAULT_FEE_QUERY = 25
DEFAULT_K = 16


def encode_proof(proof: SidedProof) -> list:
    """Proof as transaction arguments: [[side, digest], ...]."""
    return [[int(el.side), el.digest] for el in proof]


def decode_proof(raw) -> SidedProof:
    if not isinstance(raw, list):
        raise Revert("proof must be a list")
    out = []
    for item in raw:
        if (not isinstance(item, list) or len(item) != 2 or item[0] not in (0, 1)
                or isinstance(item[0], bool) or not isinstance(item[1], bytes) or len(item[1]) != 32):
            raise Revert("malformed proof element")
        out.append(ProofElement(Side(item[0]), item[1]))
    return out


@register
class AuthoritativeContract(Contract):
    code_id = CODE_ID

    def init(self, ctx: Context, fee_mem: int = DEFAULT_FEE_MEM, fee_query: int = DEFAULT_FEE_QUERY,
             k: int = DEFAULT_K, hash_name: str = DEFAULT_HASH) -> None:
        require(isinstance(fee_mem, int) and fee_mem >= 0, "FEE_mem must be a non-negative integer")
        require(isinstance(fee_query, int) and fee_query >= 0, "FEE_query must be a non-negative integer")
        require(isinstance(k, int) and k >= 1, "K must be at least 1")
        try:
            get_hasher(hash_name)
        except ValueError as exc:
            raise Revert(str(exc)) from None
        self.fee_mem = fee_mem
        self.fee_query = fee_query
        self.k = k
        self.hash_name = hash_name
        self.roots: dict[int, bytes] = {}
        self.time = 0
        self.locked = False
        self.counter = 0
        self.queries: dict[int, bytes] = {}
        self.responses: dict[int, bytes] = {}

    def state(self) -> dict:
        return {
            "fee_mem": self.fee_mem,
            "fee_query": self.fee_query,
            "k": self.k,
            "hash": self.hash_name,
            "roots": [[t, r] for t, r in self.roots.items()],
            "time": self.time,
            "locked": self.locked,
            "counter": self.counter,
            "queries": [[i, q] for i, q in sorted(self.queries.items())],
            "responses": [[i, r] for i, r in sorted(self.responses.items())],
        }

    # root maintenance -----------------------------------------------------

    def check_consistency(self, ctx: Context, root: bytes, proof: SidedProof) -> bool:
        if self.time == 0:
            return True
        if not proof:
            return False
        root_new, root_old = mth_dual(proof, None, ctx.hash)
        return root_new == root and root_old == self.roots[self.time]

    @entry
    def update(self, ctx: Context, root: "bytes32", proof_cons: "proof") -> bool:
        require(ctx.sender == self.owner, "sender is not the owner")
        require(not self.locked, "contract is locked")
        require(isinstance(root, bytes) and len(root) == 32, "root must be 32 bytes")
        proof = decode_proof(proof_cons)
        if not self.check_consistency(ctx, root, proof):
            # state is left untouched; the failed receipt is the only trace
            raise Revert("consistency check failed", value=False)
        now = ctx.now()
        require(now > self.time, "duplicate block timestamp for update")
        self.time = now
        self.roots[now] = root
        while len(self.roots) > self.k:
            del self.roots[min(self.roots)]
        return True

    @entry
    def lock(self, ctx: Context) -> None:
        require(ctx.sender == self.owner, "sender is not the owner")
        self.locked = True

    # verification --------------------------------------------------------

    def _forward_fee(self, ctx: Context) -> None:
        if ctx.value:
            ctx.transfer(self.owner, ctx.value)

    @entry(fee="FEE_mem")
    def membership(self, ctx: Context, data: bytes, proof_mem: "proof") -> bool:
        require(ctx.value == self.fee_mem, f"fee must equal FEE_mem={self.fee_mem}")
        require(isinstance(data, bytes), "data must be bytes")
        proof = decode_proof(proof_mem)
        leaf = ctx.hash(data)
        root_mem = membership_root(proof, leaf, ctx.hash)
        if root_mem not in self.roots.values():
            raise Revert("membership verification failed", value=False)
        self._forward_fee(ctx)
        return True

    @entry(view=True)
    def consistency(self, ctx: Context, root: "bytes32", proof_cons: "proof") -> bool:
        return self.check_consistency(ctx, root, decode_proof(proof_cons))

    @entry(view=True)
    def latest_root(self, ctx: Context) -> list:
        return [self.time, self.roots.get(self.time)]

    @entry(view=True)
    def retained_roots(self, ctx: Context) -> list:
        return [[t, r] for t, r in self.roots.items()]

    # censorship-evident queries ---------------------------------------------

    @entry(fee="FEE_query")
    def query(self, ctx: Context, filter: bytes) -> int:
        require(ctx.value == self.fee_query, f"fee must equal FEE_query={self.fee_query}")
        require(isinstance(filter, bytes), "filter must be bytes")
        self.counter += 1
        self.queries[self.counter] = filter
        self._forward_fee(ctx)
        return self.counter

    @entry
    def store_response(self, ctx: Context, id: int, data: bytes) -> None:
        require(ctx.sender == self.owner, "sender is not the owner")
        require(isinstance(id, int) and 1 <= id <= self.counter, "unknown query id")
        require(isinstance(data, bytes), "data must be bytes")
        self.responses[id] = data

    @entry(view=True)
    def get_response(self, ctx: Context, id: int) -> bytes:
        require(isinstance(id, int) and 1 <= id <= self.counter, "unknown query id")
        return self.responses.get(id, b"")

    @entry(view=True)
    def get_query(self, ctx: Context, id: int) -> bytes:
        require(isinstance(id, int) and 1 <= id <= self.counter, "unknown query id")
        return self.queries[id]


def interface_descriptor() -> dict:
    """Machine-readable interface published in the manifest."""
    return {"contract": CODE_ID, "functions": AuthoritativeContract.interface()}
