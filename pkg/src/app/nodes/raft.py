"""
Raft consensus core.

``RaftCore`` is a message-driven state machine with no knowledge of the
network or clock: every input (a Raft message or a timer expiry) goes through
``step`` and produces a ``RaftOutput`` listing messages to send, timer
requests and newly committed entries. The orderer node wraps it with timers
and delivery.

Log indices are 1-based; index 0 with term 0 is the empty-log sentinel.
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Literal, Optional, Tuple, Union

from src.app.models.pydantic.messages import (
    AppendEntries,
    AppendEntriesResponse,
    RequestVote,
    RequestVoteResponse,
    WireMessage,
)
from src.app.models.pydantic.ordering import CutMarker, Envelope, LogEntry, RaftRole

logger = logging.getLogger(__name__)

MAX_ENTRIES_PER_APPEND = 64


@dataclass
class RaftPersistentState:
    """State that survives a crash: current term, vote and log."""

    current_term: int = 0
    voted_for: Optional[int] = None
    log: List[LogEntry] = field(default_factory=list)


@dataclass(frozen=True)
class TimerFired:
    kind: Literal["election", "heartbeat"]


RaftEvent = Union[WireMessage, TimerFired]


@dataclass
class RaftOutput:
    messages: List[Tuple[int, WireMessage]] = field(default_factory=list)
    reset_election: bool = False
    became_leader: bool = False
    committed: List[Tuple[int, LogEntry]] = field(default_factory=list)


class RaftCore:
    """Election, replication and commit rules for one orderer."""

    def __init__(self, node_id: int, cluster: Iterable[int], storage: RaftPersistentState) -> None:
        self.id = node_id
        self.cluster = sorted(set(cluster) | {node_id})
        self.peers = [member for member in self.cluster if member != node_id]
        self.storage = storage
        self.role = RaftRole.FOLLOWER
        self.leader_id: Optional[int] = None
        self.commit_index = 0
        self.last_applied = 0
        self.votes: set = set()
        self.next_index: dict = {}
        self.match_index: dict = {}

    # Persistent state accessors

    @property
    def current_term(self) -> int:
        return self.storage.current_term

    @property
    def voted_for(self) -> Optional[int]:
        return self.storage.voted_for

    @property
    def log(self) -> List[LogEntry]:
        return self.storage.log

    @property
    def last_log_index(self) -> int:
        return len(self.storage.log)

    @property
    def last_log_term(self) -> int:
        return self.storage.log[-1].term if self.storage.log else 0

    @property
    def quorum(self) -> int:
        return len(self.cluster) // 2 + 1

    def term_at(self, index: int) -> int:
        if 1 <= index <= len(self.storage.log):
            return self.storage.log[index - 1].term
        return 0

    # Transitions

    def _become_follower(self, term: int, leader: Optional[int] = None) -> None:
        if term > self.storage.current_term:
            self.storage.current_term = term
            self.storage.voted_for = None
        if self.role != RaftRole.FOLLOWER:
            logger.debug("Orderer %d steps down in term %d", self.id, term)
        self.role = RaftRole.FOLLOWER
        self.leader_id = leader
        self.votes = set()

    def _start_election(self, out: RaftOutput) -> None:
        self.role = RaftRole.CANDIDATE
        self.storage.current_term += 1
        self.storage.voted_for = self.id
        self.leader_id = None
        self.votes = {self.id}
        out.reset_election = True
        logger.debug("Orderer %d starts election for term %d", self.id, self.current_term)
        if len(self.votes) >= self.quorum:
            self._become_leader(out)
            return
        request = RequestVote(
            term=self.current_term,
            candidate=self.id,
            last_log_index=self.last_log_index,
            last_log_term=self.last_log_term,
        )
        out.messages.extend((peer, request) for peer in self.peers)

    def _become_leader(self, out: RaftOutput) -> None:
        self.role = RaftRole.LEADER
        self.leader_id = self.id
        self.next_index = {peer: self.last_log_index + 1 for peer in self.peers}
        self.match_index = {peer: 0 for peer in self.peers}
        out.became_leader = True
        logger.info("Orderer %d became leader for term %d", self.id, self.current_term)

    # Replication

    def _append_for(self, peer: int) -> AppendEntries:
        prev = self.next_index[peer] - 1
        return AppendEntries(
            term=self.current_term,
            leader=self.id,
            prev_log_index=prev,
            prev_log_term=self.term_at(prev),
            entries=tuple(self.log[prev : prev + MAX_ENTRIES_PER_APPEND]),
            leader_commit=self.commit_index,
        )

    def broadcast_append(self, out: RaftOutput) -> None:
        if self.role != RaftRole.LEADER:
            return
        out.messages.extend((peer, self._append_for(peer)) for peer in self.peers)

    def propose(self, item: Union[Envelope, CutMarker]) -> Tuple[Optional[int], RaftOutput]:
        """Append ``item`` to the leader's log and replicate it; None when not leader."""
        out = RaftOutput()
        if self.role != RaftRole.LEADER:
            return None, out
        self.log.append(LogEntry(term=self.current_term, item=item))
        index = self.last_log_index
        self.broadcast_append(out)
        self._advance_commit()
        self._apply(out)
        return index, out

    def _advance_commit(self) -> None:
        for index in range(self.last_log_index, self.commit_index, -1):
            if self.term_at(index) != self.current_term:
                break
            replicated = 1 + sum(1 for peer in self.peers if self.match_index.get(peer, 0) >= index)
            if replicated >= self.quorum:
                self.commit_index = index
                return

    def _apply(self, out: RaftOutput) -> None:
        while self.last_applied < self.commit_index:
            self.last_applied += 1
            out.committed.append((self.last_applied, self.log[self.last_applied - 1]))

    # Inputs

    def step(self, event: RaftEvent) -> RaftOutput:
        out = RaftOutput()
        if isinstance(event, TimerFired):
            if event.kind == "election" and self.role != RaftRole.LEADER:
                self._start_election(out)
            elif event.kind == "heartbeat":
                self.broadcast_append(out)
        elif isinstance(event, RequestVote):
            self._on_request_vote(event, out)
        elif isinstance(event, RequestVoteResponse):
            self._on_vote_response(event, out)
        elif isinstance(event, AppendEntries):
            self._on_append_entries(event, out)
        elif isinstance(event, AppendEntriesResponse):
            self._on_append_response(event, out)
        self._apply(out)
        return out

    def _log_up_to_date(self, last_index: int, last_term: int) -> bool:
        if last_term != self.last_log_term:
            return last_term > self.last_log_term
        return last_index >= self.last_log_index

    def _on_request_vote(self, message: RequestVote, out: RaftOutput) -> None:
        if message.term > self.current_term:
            self._become_follower(message.term)
        granted = (
            message.term == self.current_term
            and self.voted_for in (None, message.candidate)
            and self._log_up_to_date(message.last_log_index, message.last_log_term)
        )
        if granted:
            self.storage.voted_for = message.candidate
            out.reset_election = True
        out.messages.append(
            (
                message.candidate,
                RequestVoteResponse(term=self.current_term, voter=self.id, vote_granted=granted),
            )
        )

    def _on_vote_response(self, message: RequestVoteResponse, out: RaftOutput) -> None:
        if message.term > self.current_term:
            self._become_follower(message.term)
            out.reset_election = True
            return
        if self.role != RaftRole.CANDIDATE or message.term != self.current_term:
            return
        if message.vote_granted:
            self.votes.add(message.voter)
            if len(self.votes) >= self.quorum:
                self._become_leader(out)

    def _on_append_entries(self, message: AppendEntries, out: RaftOutput) -> None:
        if message.term < self.current_term:
            out.messages.append(
                (
                    message.leader,
                    AppendEntriesResponse(
                        term=self.current_term, follower=self.id, success=False, match_index=0
                    ),
                )
            )
            return

        self._become_follower(message.term, message.leader)
        out.reset_election = True

        prev = message.prev_log_index
        if prev > self.last_log_index or self.term_at(prev) != message.prev_log_term:
            hint = self.last_log_index if prev > self.last_log_index else prev - 1
            out.messages.append(
                (
                    message.leader,
                    AppendEntriesResponse(
                        term=self.current_term,
                        follower=self.id,
                        success=False,
                        match_index=max(0, hint),
                    ),
                )
            )
            return

        index = prev
        for entry in message.entries:
            index += 1
            if index <= self.last_log_index:
                if self.term_at(index) == entry.term:
                    continue
                del self.log[index - 1 :]
            self.log.append(entry)

        last_new = prev + len(message.entries)
        if message.leader_commit > self.commit_index:
            self.commit_index = max(self.commit_index, min(message.leader_commit, last_new))
        out.messages.append(
            (
                message.leader,
                AppendEntriesResponse(
                    term=self.current_term, follower=self.id, success=True, match_index=last_new
                ),
            )
        )

    def _on_append_response(self, message: AppendEntriesResponse, out: RaftOutput) -> None:
        if message.term > self.current_term:
            self._become_follower(message.term)
            out.reset_election = True
            return
        if self.role != RaftRole.LEADER or message.term != self.current_term:
            return
        peer = message.follower
        if message.success:
            self.match_index[peer] = max(self.match_index.get(peer, 0), message.match_index)
            self.next_index[peer] = self.match_index[peer] + 1
            self._advance_commit()
            if self.next_index[peer] <= self.last_log_index:
                out.messages.append((peer, self._append_for(peer)))
        else:
            self.next_index[peer] = max(1, min(self.next_index[peer] - 1, message.match_index + 1))
            out.messages.append((peer, self._append_for(peer)))


def raft_step(core: RaftCore, event: RaftEvent) -> RaftOutput:
    """Feed one message or timer expiry to ``core``."""
    return core.step(event)
