"""
Content hashing: Merkle trees, header hashes, proposal ids and transaction ids.

All digests are SHA-256. Merkle leaves are prefixed with 0x00 and interior
nodes with 0x01; an odd node at any level is paired with itself.
"""

import hashlib
from typing import List, Sequence, Tuple

from src.app.models.pydantic.common import ZERO_HASH
from src.app.models.pydantic.ledger import (
    BlockHeader,
    Endorsement,
    KVRead,
    KVWrite,
    SignedProposal,
    Transaction,
)

from .encoding import encode_header, encode_proposal_body, encode_rw_set, encode_transaction_body

LEAF_PREFIX = b"\x00"
NODE_PREFIX = b"\x01"
ENDORSEMENT_DOMAIN = b"edgechain/endorsement"


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def _leaf(value: bytes) -> bytes:
    return sha256(LEAF_PREFIX + value)


def _node(left: bytes, right: bytes) -> bytes:
    return sha256(NODE_PREFIX + left + right)


def _next_level(level: List[bytes]) -> List[bytes]:
    if len(level) % 2:
        level = level + [level[-1]]
    return [_node(level[i], level[i + 1]) for i in range(0, len(level), 2)]


def merkle_root(leaves: Sequence[bytes]) -> bytes:
    """Root over ordered leaves; the empty list yields the all-zero hash."""
    if not leaves:
        return ZERO_HASH
    level = [_leaf(leaf) for leaf in leaves]
    while len(level) > 1:
        level = _next_level(level)
    return level[0]


def merkle_proof(leaves: Sequence[bytes], index: int) -> List[bytes]:
    """Sibling hashes from leaf ``index`` up to the root."""
    if not 0 <= index < len(leaves):
        raise IndexError(f"leaf index {index} out of range for {len(leaves)} leaves")
    proof: List[bytes] = []
    level = [_leaf(leaf) for leaf in leaves]
    position = index
    while len(level) > 1:
        sibling = position ^ 1
        proof.append(level[sibling] if sibling < len(level) else level[position])
        level = _next_level(level)
        position //= 2
    return proof


def verify_merkle_proof(leaf: bytes, proof: Sequence[bytes], root: bytes, index: int) -> bool:
    if index < 0 or index >= 2 ** len(proof):
        return False
    node = _leaf(leaf)
    position = index
    for sibling in proof:
        node = _node(node, sibling) if position % 2 == 0 else _node(sibling, node)
        position //= 2
    return node == root


def hash_header(header: BlockHeader) -> bytes:
    return sha256(encode_header(header))


def proposal_hash(proposal: SignedProposal) -> bytes:
    """Proposal id: covers every client-signed field."""
    return sha256(encode_proposal_body(proposal))


def rw_set_hash(reads: Sequence[KVRead], writes: Sequence[KVWrite]) -> bytes:
    return sha256(encode_rw_set(reads, writes))


def endorsement_message(proposal_id: bytes, rw_hash: bytes) -> bytes:
    return ENDORSEMENT_DOMAIN + proposal_id + rw_hash


def compute_transaction_id(
    proposal: SignedProposal,
    read_set: Sequence[KVRead],
    write_set: Sequence[KVWrite],
    endorsements: Sequence[Endorsement],
) -> bytes:
    return sha256(encode_transaction_body(proposal, read_set, write_set, endorsements))


def recompute_id(tx: Transaction) -> bytes:
    return compute_transaction_id(tx.proposal, tx.read_set, tx.write_set, tx.endorsements)


def assemble_transaction(
    proposal: SignedProposal,
    read_set: Sequence[KVRead],
    write_set: Sequence[KVWrite],
    endorsements: Sequence[Endorsement],
) -> Transaction:
    """Build a transaction whose id recomputes from its content."""
    reads: Tuple[KVRead, ...] = tuple(read_set)
    writes: Tuple[KVWrite, ...] = tuple(write_set)
    signed: Tuple[Endorsement, ...] = tuple(endorsements)
    return Transaction(
        id=compute_transaction_id(proposal, reads, writes, signed),
        proposal=proposal,
        read_set=reads,
        write_set=writes,
        endorsements=signed,
    )
