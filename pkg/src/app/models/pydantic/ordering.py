"""
Pydantic models for the ordering service: envelopes, Raft log entries and the
block cut policy.
"""

from enum import Enum
from typing import Union

from pydantic import BaseModel, ConfigDict, Field

from src.app.core.config.settings import settings

from .ledger import Transaction


class Envelope(BaseModel):
    """Client-assembled endorsed transaction as submitted to the orderers."""

    model_config = ConfigDict(frozen=True)

    transaction: Transaction
    received_at: int = Field(default=0, ge=0)

    @property
    def size(self) -> int:
        return self.transaction.size


class CutMarker(BaseModel):
    """Replicated instruction to cut the pending batch as block ``block_number``."""

    model_config = ConfigDict(frozen=True)

    block_number: int = Field(..., ge=0)


class LogEntry(BaseModel):
    """One Raft log slot."""

    model_config = ConfigDict(frozen=True)

    term: int = Field(..., ge=0)
    item: Union[Envelope, CutMarker]


class RaftRole(str, Enum):
    FOLLOWER = "follower"
    CANDIDATE = "candidate"
    LEADER = "leader"


class BlockCutPolicy(BaseModel):
    """Batching limits for turning committed envelopes into blocks."""

    model_config = ConfigDict(frozen=True)

    max_message_count: int = Field(default=settings.BLOCK_MAX_MESSAGE_COUNT, gt=0)
    max_bytes: int = Field(default=settings.BLOCK_MAX_BYTES, gt=0)
    batch_timeout_ms: float = Field(default=settings.BLOCK_BATCH_TIMEOUT_MS, gt=0)


class RaftTiming(BaseModel):
    model_config = ConfigDict(frozen=True)

    election_timeout_min_ms: float = Field(default=settings.ELECTION_TIMEOUT_MIN_MS, gt=0)
    election_timeout_max_ms: float = Field(default=settings.ELECTION_TIMEOUT_MAX_MS, gt=0)
    heartbeat_ms: float = Field(default=settings.HEARTBEAT_MS, gt=0)
