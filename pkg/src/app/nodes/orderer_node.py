"""
Orderer node: a Raft member that turns committed envelopes into blocks and,
while leader, delivers them to the peers.
"""

import logging
import random
from typing import Any, Dict, List, Optional, Sequence, Tuple

from src.app.core.config.settings import settings
from src.app.core.errors import EdgeChainError
from src.app.ledger.hashing import recompute_id
from src.app.models.pydantic.ledger import Block
from src.app.models.pydantic.messages import (
    AppendEntries,
    AppendEntriesResponse,
    BlockAck,
    BlockDeliver,
    NoLeaderResponse,
    Redirect,
    RequestVote,
    RequestVoteResponse,
    SubmitAck,
    SubmitEnvelope,
    SubmitRejected,
    WireMessage,
)
from src.app.models.pydantic.network import NodeAddress, orderer
from src.app.models.pydantic.ordering import BlockCutPolicy, CutMarker, Envelope, RaftRole, RaftTiming
from src.app.network.simulator import SimNode

from .block_cutter import BatchProjection, BlockCutter
from .raft import RaftCore, RaftOutput, RaftPersistentState, TimerFired

logger = logging.getLogger(__name__)

RAFT_MESSAGES = (AppendEntries, AppendEntriesResponse, RequestVote, RequestVoteResponse)


class NoLeader(EdgeChainError):
    """No leader is known to this orderer."""

    pass


class OrdererNode(SimNode):
    def __init__(
        self,
        index: int,
        cluster_size: int,
        peers: Sequence[NodeAddress],
        policy: Optional[BlockCutPolicy] = None,
        timing: Optional[RaftTiming] = None,
        seed: int = 0,
        resend_window: int = settings.DELIVERY_RESEND_WINDOW,
    ) -> None:
        super().__init__(orderer(index))
        self.index = index
        self.cluster = list(range(cluster_size))
        self.peers = list(peers)
        self.policy = policy or BlockCutPolicy()
        self.timing = timing or RaftTiming()
        self.resend_window = resend_window
        self.rng = random.Random(f"edgechain-orderer-{seed}-{index}")
        self.storage = RaftPersistentState()
        self._reset_volatile()

    def _reset_volatile(self) -> None:
        self.raft = RaftCore(self.index, self.cluster, self.storage)
        self.cutter = BlockCutter(self.policy)
        self.projection: Optional[BatchProjection] = None
        self._election_timer: Optional[int] = None
        self._heartbeat_timer: Optional[int] = None
        self._batch_timer: Optional[int] = None
        self._acked: Dict[int, int] = {}
        self._last_sent: Dict[Tuple[int, int], float] = {}

    @property
    def role(self) -> RaftRole:
        return self.raft.role

    @property
    def is_leader(self) -> bool:
        return self.raft.role == RaftRole.LEADER

    @property
    def blocks(self) -> List[Block]:
        return self.cutter.blocks

    @property
    def leader_hint(self) -> Optional[NodeAddress]:
        return None if self.raft.leader_id is None else orderer(self.raft.leader_id)

    # Lifecycle

    def on_start(self) -> None:
        self._arm_election()

    def on_restart(self) -> None:
        self._reset_volatile()
        self._arm_election()

    # Timers

    def _arm_election(self) -> None:
        self.cancel_timer(self._election_timer)
        delay = self.rng.uniform(self.timing.election_timeout_min_ms, self.timing.election_timeout_max_ms)
        self._election_timer = self.set_timer(delay, "election")

    def _arm_heartbeat(self) -> None:
        self.cancel_timer(self._heartbeat_timer)
        self._heartbeat_timer = self.set_timer(self.timing.heartbeat_ms, "heartbeat")

    def _sync_batch_timer(self, cut: Optional[int]) -> None:
        if cut is not None and self._batch_timer is not None:
            self.cancel_timer(self._batch_timer)
            self._batch_timer = None
        if self.projection is not None and self.projection.has_pending and self._batch_timer is None:
            self._batch_timer = self.set_timer(self.policy.batch_timeout_ms, "batch")

    def on_timer(self, name: str, data: Any) -> None:
        if name == "election":
            self._election_timer = None
            self._handle(self.raft.step(TimerFired("election")))
        elif name == "heartbeat":
            self._heartbeat_timer = None
            if self.is_leader:
                self._handle(self.raft.step(TimerFired("heartbeat")))
                self._resend_blocks()
                self._arm_heartbeat()
        elif name == "batch":
            self._batch_timer = None
            if self.is_leader and self.projection is not None and self.projection.has_pending:
                self._propose(CutMarker(block_number=self.projection.next_number))

    # Raft plumbing

    def _handle(self, out: RaftOutput) -> None:
        was_leader = self.projection is not None
        for target, message in out.messages:
            self.send(orderer(target), message)
        self._apply_committed(out)
        if out.became_leader:
            self._on_become_leader()
        elif was_leader and not self.is_leader:
            self._on_step_down()
        if out.reset_election and not self.is_leader:
            self._arm_election()

    def _on_become_leader(self) -> None:
        self.cancel_timer(self._election_timer)
        self._election_timer = None
        projection = BatchProjection(self.policy)
        projection.next_number = self.cutter.next_number
        projection.count = len(self.cutter.pending)
        projection.bytes = self.cutter.pending_bytes
        for entry in self.raft.log[self.raft.last_applied :]:
            projection.feed(entry.item)
        self.projection = projection
        self._acked = {}
        self._last_sent = {}
        self._propose(CutMarker(block_number=projection.next_number))
        self._arm_heartbeat()

    def _on_step_down(self) -> None:
        logger.info("Orderer %d lost leadership", self.index)
        self.cancel_timer(self._heartbeat_timer)
        self.cancel_timer(self._batch_timer)
        self._heartbeat_timer = None
        self._batch_timer = None
        self.projection = None
        self._arm_election()

    def _propose(self, item: Envelope | CutMarker) -> Optional[int]:
        index, out = self.raft.propose(item)
        if index is None:
            return None
        _, cut = self.projection.feed(item)
        self._sync_batch_timer(cut)
        self._handle(out)
        return index

    def _apply_committed(self, out: RaftOutput) -> None:
        for _, entry in out.committed:
            for block in self.cutter.feed(entry.item):
                if self.is_leader:
                    self._deliver(block)

    # Delivery

    def _send_block(self, peer_index: int, block: Block) -> None:
        self._last_sent[(peer_index, block.number)] = self.now
        self.send(self.peers[peer_index], BlockDeliver(block=block))

    def _deliver(self, block: Block) -> None:
        for peer_index in range(len(self.peers)):
            self._send_block(peer_index, block)

    def _resend_blocks(self) -> None:
        height = len(self.cutter.blocks)
        if height == 0:
            return
        for peer_index in range(len(self.peers)):
            acked = self._acked.get(peer_index)
            if acked is None:
                numbers = [height - 1]
            else:
                numbers = list(range(acked, min(height, acked + self.resend_window)))
            for number in numbers:
                last = self._last_sent.get((peer_index, number))
                if last is None or self.now - last >= self.timing.heartbeat_ms:
                    self._send_block(peer_index, self.cutter.blocks[number])

    # Client submission

    def submit_envelope(self, envelope: Envelope) -> WireMessage:
        """Append ``envelope`` if leader; otherwise point the client at the leader.

        Raises ``NoLeader`` when no leader is known.
        """
        txid = envelope.transaction.id
        if self.is_leader:
            if recompute_id(envelope.transaction) != txid:
                return SubmitRejected(txid=txid, reason="transaction id does not match content")
            self._propose(envelope.model_copy(update={"received_at": int(self.now)}))
            return SubmitAck(txid=txid)
        if self.raft.leader_id is not None:
            return Redirect(txid=txid, leader=orderer(self.raft.leader_id))
        raise NoLeader(f"orderer {self.index} knows no leader")

    def on_message(self, src: NodeAddress, message: WireMessage) -> None:
        if isinstance(message, RAFT_MESSAGES):
            self._handle(self.raft.step(message))
        elif isinstance(message, SubmitEnvelope):
            try:
                reply = self.submit_envelope(message.envelope)
            except NoLeader:
                reply = NoLeaderResponse(txid=message.envelope.transaction.id)
            self.send(src, reply)
        elif isinstance(message, BlockAck):
            current = self._acked.get(message.peer)
            self._acked[message.peer] = message.next_expected if current is None else max(current, message.next_expected)
        else:
            logger.debug("Orderer %d ignores %s from %s", self.index, type(message).__name__, src)
