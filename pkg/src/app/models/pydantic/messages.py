"""
Wire messages exchanged between simulated nodes.

Every message is a frozen pydantic model. ``trace_key`` gives a short,
deterministic identifier that the network folds into its event trace digest.
"""

from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from .common import Hash, Pseudonym, TransactionId
from .contracts import GeoPoint, IncidentKind, QueryResult
from .identity import Certificate
from .ledger import Block, Endorsement, KVRead, KVWrite, SignedProposal, ValidityFlag
from .network import NodeAddress
from .ordering import Envelope, LogEntry


class WireMessage(BaseModel):
    model_config = ConfigDict(frozen=True)

    def trace_key(self) -> str:
        return ""


# Peer endorsement flow


class ProposalMessage(WireMessage):
    """Proposal sent to a peer; ``standby`` proposals are held back for takeover."""

    proposal: SignedProposal
    proposal_id: Hash
    standby: bool = False

    def trace_key(self) -> str:
        return self.proposal_id.hex()[:16] + (":standby" if self.standby else "")


class ProposalResponse(WireMessage):
    proposal_id: Hash
    peer: NodeAddress
    endorsement: Optional[Endorsement] = None
    read_set: Tuple[KVRead, ...] = ()
    write_set: Tuple[KVWrite, ...] = ()
    error: Optional[str] = None

    def trace_key(self) -> str:
        return f"{self.proposal_id.hex()[:16]}:{'err' if self.error else 'ok'}"


class Withdraw(WireMessage):
    """Cancels a standby proposal once the endorsement policy is met."""

    proposal_id: Hash

    def trace_key(self) -> str:
        return self.proposal_id.hex()[:16]


# Ordering flow


class SubmitEnvelope(WireMessage):
    envelope: Envelope

    def trace_key(self) -> str:
        return self.envelope.transaction.id.hex()[:16]


class SubmitAck(WireMessage):
    txid: TransactionId

    def trace_key(self) -> str:
        return self.txid.hex()[:16]


class Redirect(WireMessage):
    txid: TransactionId
    leader: NodeAddress

    def trace_key(self) -> str:
        return f"{self.txid.hex()[:16]}:{self.leader}"


class NoLeaderResponse(WireMessage):
    txid: TransactionId

    def trace_key(self) -> str:
        return self.txid.hex()[:16]


class SubmitRejected(WireMessage):
    txid: TransactionId
    reason: str

    def trace_key(self) -> str:
        return self.txid.hex()[:16]


# Raft


class RequestVote(WireMessage):
    term: int = Field(..., ge=0)
    candidate: int
    last_log_index: int = Field(..., ge=0)
    last_log_term: int = Field(..., ge=0)

    def trace_key(self) -> str:
        return f"t{self.term}:c{self.candidate}"


class RequestVoteResponse(WireMessage):
    term: int = Field(..., ge=0)
    voter: int
    vote_granted: bool

    def trace_key(self) -> str:
        return f"t{self.term}:v{self.voter}:{int(self.vote_granted)}"


class AppendEntries(WireMessage):
    term: int = Field(..., ge=0)
    leader: int
    prev_log_index: int = Field(..., ge=0)
    prev_log_term: int = Field(..., ge=0)
    entries: Tuple[LogEntry, ...] = ()
    leader_commit: int = Field(..., ge=0)

    def trace_key(self) -> str:
        return f"t{self.term}:p{self.prev_log_index}:n{len(self.entries)}:c{self.leader_commit}"


class AppendEntriesResponse(WireMessage):
    term: int = Field(..., ge=0)
    follower: int
    success: bool
    match_index: int = Field(..., ge=0)

    def trace_key(self) -> str:
        return f"t{self.term}:f{self.follower}:{int(self.success)}:m{self.match_index}"


# Block delivery


class BlockDeliver(WireMessage):
    block: Block

    def trace_key(self) -> str:
        return str(self.block.number)


class BlockAck(WireMessage):
    peer: int
    next_expected: int = Field(..., ge=0)

    def trace_key(self) -> str:
        return f"p{self.peer}:{self.next_expected}"


# Vehicle-facing


class Notification(WireMessage):
    """Urgent-event push sent by a peer after committing a high-priority transaction."""

    zone: str
    kind: IncidentKind
    gps: GeoPoint
    reporter: Pseudonym
    image_hash: Hash
    reported_at: int
    block_number: int
    txid: TransactionId
    proposal_id: Hash
    peer: NodeAddress

    def trace_key(self) -> str:
        return f"{self.txid.hex()[:16]}:{self.peer}"


class CommitConfirmation(WireMessage):
    txid: TransactionId
    proposal_id: Hash
    flag: ValidityFlag
    block_number: int

    def trace_key(self) -> str:
        return f"{self.txid.hex()[:16]}:{self.flag.value}"


class Register(WireMessage):
    pseudonym: Pseudonym
    certificate: Certificate

    def trace_key(self) -> str:
        return self.pseudonym.hex()[:16]


class Deregister(WireMessage):
    pseudonym: Pseudonym

    def trace_key(self) -> str:
        return self.pseudonym.hex()[:16]


class Query(WireMessage):
    """Read-only information request answered from committed state."""

    request_id: int
    target: str = Field(..., description="Zone id or vehicle pseudonym hex")

    def trace_key(self) -> str:
        return f"{self.request_id}:{self.target}"


class QueryResponse(WireMessage):
    request_id: int
    result: QueryResult

    def trace_key(self) -> str:
        return f"{self.request_id}:{len(self.result.incidents)}"
