"""Authenticated data feeds for contracts: a Merkle log committed on-ledger."""

from . import authoritative, relying  # noqa: F401  (registers contract codes)
from .chain_sim import Account, FileLedger, Ledger, Receipt, Revert, Transaction
from .hashing import Hasher, get_hasher, keccak256
from .merkle_log import MerkleLog, ProofElement, Side, SidedProof, mth_dual, proof_from_json, proof_to_json

__all__ = [
    "Account", "FileLedger", "Hasher", "Ledger", "MerkleLog", "ProofElement", "Receipt", "Revert", "Side",
    "SidedProof", "Transaction", "get_hasher", "keccak256", "mth_dual", "proof_from_json", "proof_to_json",
]

__version__ = "0.1.0"
