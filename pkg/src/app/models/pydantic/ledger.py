"""
Pydantic models for ledger data: proposals, transactions, endorsements and blocks.

This module contains the data that is hashed and chained. Hashing and encoding
functions live in ``src.app.ledger``.
"""

from enum import Enum
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .common import Hash, HexBytes, Pseudonym, TransactionId, Version
from .identity import Certificate


class ValidityFlag(str, Enum):
    """Per-transaction validation outcome recorded as block metadata."""

    PENDING = "pending"
    VALID = "valid"
    CONFLICT_INVALID = "conflict-invalid"
    ENDORSEMENT_INVALID = "endorsement-invalid"
    SIGNATURE_INVALID = "signature-invalid"
    DUPLICATE_INVALID = "duplicate-invalid"


class KVRead(BaseModel):
    """A state key read during simulation, with the version observed (None if absent)."""

    model_config = ConfigDict(frozen=True)

    key: str
    version: Optional[Version] = None


class KVWrite(BaseModel):
    """A proposed state write."""

    model_config = ConfigDict(frozen=True)

    key: str
    value: HexBytes


class SignedProposal(BaseModel):
    """Client-signed contract invocation, the execute-phase input."""

    model_config = ConfigDict(frozen=True)

    creator: Pseudonym
    creator_certificate: Certificate
    contract: str
    operation: str
    args: Tuple[HexBytes, ...] = ()
    payload: HexBytes = Field(..., min_length=1)
    nonce: int = Field(..., ge=0)
    created_at: int = Field(..., ge=0, description="Simulation timestamp (ms)")
    client_signature: HexBytes = b""


class Endorsement(BaseModel):
    """A peer's signature over a proposal and the read/write set it produced."""

    model_config = ConfigDict(frozen=True)

    peer: Pseudonym
    proposal_hash: Hash
    rw_set_hash: Hash
    signature: HexBytes


class Transaction(BaseModel):
    """An endorsed transaction as ordered into blocks."""

    model_config = ConfigDict(frozen=True)

    id: TransactionId
    proposal: SignedProposal
    read_set: Tuple[KVRead, ...] = ()
    write_set: Tuple[KVWrite, ...] = ()
    endorsements: Tuple[Endorsement, ...] = ()

    @model_validator(mode="after")
    def _distinct_keys(self) -> "Transaction":
        if len({r.key for r in self.read_set}) != len(self.read_set):
            raise ValueError("read_set keys must be distinct")
        if len({w.key for w in self.write_set}) != len(self.write_set):
            raise ValueError("write_set keys must be distinct")
        return self

    @property
    def creator(self) -> Pseudonym:
        return self.proposal.creator

    @property
    def contract(self) -> str:
        return self.proposal.contract

    @property
    def operation(self) -> str:
        return self.proposal.operation

    @property
    def payload(self) -> bytes:
        return self.proposal.payload

    @property
    def client_signature(self) -> bytes:
        return self.proposal.client_signature

    @property
    def created_at(self) -> int:
        return self.proposal.created_at

    @property
    def size(self) -> int:
        """Approximate wire size used for block byte limits."""
        return len(self.proposal.payload) + sum(len(a) for a in self.proposal.args) + sum(
            len(w.value) for w in self.write_set
        )


class BlockHeader(BaseModel):
    """Hashed part of a block."""

    model_config = ConfigDict(frozen=True)

    number: int = Field(..., ge=0)
    previous_hash: Hash
    data_hash: Hash


class Block(BaseModel):
    """Header, ordered transactions and per-transaction validity metadata."""

    model_config = ConfigDict(frozen=True)

    header: BlockHeader
    transactions: Tuple[Transaction, ...] = ()
    validity: Tuple[ValidityFlag, ...] = ()

    @model_validator(mode="after")
    def _validity_length(self) -> "Block":
        if len(self.validity) != len(self.transactions):
            raise ValueError("validity must have one flag per transaction")
        return self

    @property
    def number(self) -> int:
        return self.header.number

    def with_validity(self, flags: Tuple[ValidityFlag, ...]) -> "Block":
        if len(flags) != len(self.transactions):
            raise ValueError("validity must have one flag per transaction")
        return self.model_copy(update={"validity": tuple(flags)})
