"""
Ledger core: canonical encoding, hashing, the block chain and the world state.
"""

from .chain import (
    ChainLinkError,
    DataHashError,
    append_block,
    build_block,
    dump_ledger_json,
    export_ledger,
    import_ledger,
    validate_chain,
    validate_ledger_file,
)
from .encoding import DecodeError, decode_block, encode_block
from .hashing import (
    hash_header,
    merkle_proof,
    merkle_root,
    proposal_hash,
    rw_set_hash,
    verify_merkle_proof,
)
from .state import StateEntry, WorldState, apply_block, replay

__all__ = [
    "ChainLinkError",
    "DataHashError",
    "DecodeError",
    "StateEntry",
    "WorldState",
    "append_block",
    "apply_block",
    "build_block",
    "decode_block",
    "dump_ledger_json",
    "encode_block",
    "export_ledger",
    "hash_header",
    "import_ledger",
    "merkle_proof",
    "merkle_root",
    "proposal_hash",
    "replay",
    "rw_set_hash",
    "validate_chain",
    "validate_ledger_file",
    "verify_merkle_proof",
]
