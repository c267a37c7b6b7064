"""
Edge-server peer: endorser and committer for one zone.

Endorsement simulates a proposal against committed state and signs the
resulting read/write set. Commitment validates ordered blocks (duplicates,
client signature, endorsement policy, MVCC), appends them, updates the world
state and pushes notifications for urgent events to connected vehicles.

Work is serialized on a single simulated CPU: blocks first, then
high-priority proposals, then low-priority ones, FIFO within a class. Each
job occupies the CPU for the time given by the compute cost model.
"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Any, Deque, Dict, List, Optional, Sequence, Set, Tuple

from src.app.contracts import ContractError, ContractRegistry, classify_priority, contract_registry
from src.app.contracts.query_contract import decode_query_result, query_info, query_target
from src.app.core.config.settings import settings
from src.app.core.auth.identity import (
    AuthFailure,
    MembershipDirectory,
    sign_endorsement,
    verify_certificate,
    verify_proposal_signature,
)
from src.app.core.errors import EdgeChainError
from src.app.ledger.chain import ChainLinkError, append_block, check_link
from src.app.ledger.hashing import proposal_hash, rw_set_hash
from src.app.ledger.state import WorldState, apply_block, replay
from src.app.models.pydantic.common import Version
from src.app.models.pydantic.contracts import (
    ContractCall,
    IncidentReport,
    Priority,
    QueryResult,
    ReadWriteSet,
)
from src.app.models.pydantic.identity import Certificate, IdentityRecord, Role
from src.app.models.pydantic.ledger import Block, Endorsement, SignedProposal, Transaction, ValidityFlag
from src.app.models.pydantic.messages import (
    BlockAck,
    BlockDeliver,
    CommitConfirmation,
    Deregister,
    Notification,
    ProposalMessage,
    ProposalResponse,
    Query,
    QueryResponse,
    Register,
    Withdraw,
    WireMessage,
)
from src.app.models.pydantic.network import FREE_COMPUTE, ComputeCostModel, NodeAddress, peer
from src.app.network.simulator import SimNode

logger = logging.getLogger(__name__)


class EndorseRefused(EdgeChainError):
    """The contract rejected the proposal during simulation."""

    pass


def proposal_call(proposal: SignedProposal) -> ContractCall:
    return ContractCall(
        contract=proposal.contract,
        operation=proposal.operation,
        args=proposal.args,
        payload=proposal.payload,
    )


@dataclass
class ConnectedVehicle:
    certificate: Certificate
    address: Optional[NodeAddress] = None


@dataclass
class _Job:
    kind: str
    src: Optional[NodeAddress] = None
    proposal: Optional[ProposalMessage] = None
    block: Optional[Block] = None


class PeerNode(SimNode):
    def __init__(
        self,
        index: int,
        identity: IdentityRecord,
        membership: MembershipDirectory,
        zone: str,
        endorsement_required: int = 1,
        cost: ComputeCostModel = FREE_COMPUTE,
        registry: ContractRegistry = contract_registry,
        standby_takeover_ms: float = settings.STANDBY_TAKEOVER_MS,
    ) -> None:
        super().__init__(peer(index))
        self.index = index
        self.identity = identity
        self.membership = membership
        self.zone = zone
        self.endorsement_required = endorsement_required
        self.cost = cost
        self.registry = registry
        self.standby_takeover_ms = standby_takeover_ms
        # Durable across crashes
        self.chain: List[Block] = []
        self.connected: Dict[bytes, ConnectedVehicle] = {}
        self.notifications_sent = 0
        self._reset_volatile()

    def _reset_volatile(self) -> None:
        self.world: WorldState = replay(self.chain)
        self._seen_proposals: Set[bytes] = {
            proposal_hash(tx.proposal) for block in self.chain for tx in block.transactions
        }
        self._valid_commits: Dict[bytes, int] = {}
        for block in self.chain:
            self._record_valid(block)
        self.received_upto = len(self.chain)
        self._buffer: Dict[int, Block] = {}
        self._blocks: Deque[_Job] = deque()
        self._high: Deque[_Job] = deque()
        self._low: Deque[_Job] = deque()
        self._current: Optional[_Job] = None
        self._standby: Dict[bytes, Tuple[NodeAddress, ProposalMessage]] = {}
        self._withdrawn: Set[bytes] = set()

    @property
    def ca_public_key(self) -> bytes:
        return self.membership.ca_public_key

    @property
    def height(self) -> int:
        return len(self.chain)

    def state_hash(self) -> bytes:
        return self.world.state_hash()

    @property
    def queue_depth(self) -> int:
        return len(self._blocks) + len(self._high) + len(self._low)

    # Endorsement

    def endorse(self, proposal: SignedProposal) -> Tuple[Endorsement, ReadWriteSet]:
        """Simulate ``proposal`` against committed state and sign the result."""
        if not verify_proposal_signature(proposal, self.ca_public_key):
            raise AuthFailure("client certificate or signature does not verify")
        pid = proposal_hash(proposal)
        try:
            rw_set = self.registry.execute(
                proposal_call(proposal), self.world, creator=proposal.creator, proposal_id=pid
            )
        except ContractError as e:
            raise EndorseRefused(str(e)) from e
        endorsement = sign_endorsement(self.identity, pid, rw_set_hash(rw_set.reads, rw_set.writes))
        return endorsement, rw_set

    def _respond_to_proposal(self, src: NodeAddress, message: ProposalMessage) -> None:
        try:
            endorsement, rw_set = self.endorse(message.proposal)
        except (AuthFailure, EndorseRefused) as e:
            logger.info("Peer %d refused proposal %s: %s", self.index, message.proposal_id.hex()[:16], e)
            response = ProposalResponse(
                proposal_id=message.proposal_id,
                peer=self.address,
                error=f"{type(e).__name__}: {e}",
            )
        else:
            response = ProposalResponse(
                proposal_id=message.proposal_id,
                peer=self.address,
                endorsement=endorsement,
                read_set=rw_set.reads,
                write_set=rw_set.writes,
            )
        self.send(src, response)

    # Validation and commit

    def _transaction_flag(
        self,
        tx: Transaction,
        seen: Set[bytes],
        overlay: Dict[str, Version],
    ) -> ValidityFlag:
        pid = proposal_hash(tx.proposal)
        if pid in seen:
            return ValidityFlag.DUPLICATE_INVALID
        seen.add(pid)
        if not verify_proposal_signature(tx.proposal, self.ca_public_key):
            return ValidityFlag.SIGNATURE_INVALID
        rw_hash = rw_set_hash(tx.read_set, tx.write_set)
        valid = self.membership.count_valid(tx.endorsements, pid, rw_hash, tx.created_at)
        if valid < self.endorsement_required:
            return ValidityFlag.ENDORSEMENT_INVALID
        for read in tx.read_set:
            current = overlay[read.key] if read.key in overlay else self.world.version(read.key)
            if read.version != current:
                return ValidityFlag.CONFLICT_INVALID
        return ValidityFlag.VALID

    def validate_block(self, block: Block) -> Tuple[ValidityFlag, ...]:
        """Per-transaction validity flags; identical on every honest peer."""
        check_link(self.chain, block)
        seen = set(self._seen_proposals)
        overlay: Dict[str, Version] = {}
        flags: List[ValidityFlag] = []
        for index, tx in enumerate(block.transactions):
            flag = self._transaction_flag(tx, seen, overlay)
            if flag == ValidityFlag.VALID:
                for write in tx.write_set:
                    overlay[write.key] = Version(block.number, index)
            flags.append(flag)
        return tuple(flags)

    def commit_block(self, block: Block, flags: Sequence[ValidityFlag]) -> List[Tuple[NodeAddress, Notification]]:
        committed = block.with_validity(tuple(flags))
        self.chain = append_block(self.chain, committed)
        self.world = apply_block(self.world, committed)
        self._seen_proposals.update(proposal_hash(tx.proposal) for tx in committed.transactions)
        self._record_valid(committed)
        logger.debug(
            "Peer %d committed block %d (%d valid of %d)",
            self.index,
            committed.number,
            sum(1 for f in flags if f == ValidityFlag.VALID),
            len(flags),
        )
        notifications = self.deliver_events(committed)
        self._confirm(committed)
        return notifications

    def deliver_events(self, block: Block) -> List[Tuple[NodeAddress, Notification]]:
        """Push a notification for each valid high-priority transaction to every connected vehicle."""
        sent: List[Tuple[NodeAddress, Notification]] = []
        for tx, flag in zip(block.transactions, block.validity):
            if flag != ValidityFlag.VALID:
                continue
            if classify_priority(proposal_call(tx.proposal)) != Priority.HIGH:
                continue
            incident = IncidentReport.model_validate_json(tx.proposal.args[0])
            notification = Notification(
                zone=incident.zone,
                kind=incident.kind,
                gps=incident.gps,
                reporter=incident.reporter,
                image_hash=incident.image_hash,
                reported_at=incident.reported_at,
                block_number=block.number,
                txid=tx.id,
                proposal_id=proposal_hash(tx.proposal),
                peer=self.address,
            )
            for vehicle in self.connected.values():
                if vehicle.address is None:
                    continue
                if self.network is not None:
                    self.send(vehicle.address, notification)
                sent.append((vehicle.address, notification))
        self.notifications_sent += len(sent)
        return sent

    def _record_valid(self, block: Block) -> None:
        for tx, flag in zip(block.transactions, block.validity):
            if flag == ValidityFlag.VALID:
                self._valid_commits.setdefault(bytes(tx.id), block.number)

    def confirmation_for(self, tx: Transaction, flag: ValidityFlag, block_number: int) -> CommitConfirmation:
        """Outcome reported to the creator; a resubmitted copy reports the original commit."""
        original = self._valid_commits.get(bytes(tx.id))
        if flag == ValidityFlag.DUPLICATE_INVALID and original is not None:
            flag, block_number = ValidityFlag.VALID, original
        return CommitConfirmation(
            txid=tx.id,
            proposal_id=proposal_hash(tx.proposal),
            flag=flag,
            block_number=block_number,
        )

    def _confirm(self, block: Block) -> None:
        if self.network is None:
            return
        for tx, flag in zip(block.transactions, block.validity):
            vehicle = self.connected.get(tx.creator)
            if vehicle is None or vehicle.address is None:
                continue
            self.send(vehicle.address, self.confirmation_for(tx, flag, block.number))

    # Membership and queries

    def register_vehicle(
        self, pseudonym: bytes, certificate: Certificate, address: Optional[NodeAddress] = None
    ) -> None:
        if certificate.role != Role.VEHICLE or certificate.subject != pseudonym:
            raise AuthFailure("registration needs a vehicle certificate for this pseudonym")
        if not verify_certificate(certificate, self.ca_public_key, int(self.now)):
            raise AuthFailure("vehicle certificate does not verify or has expired")
        if pseudonym not in self.connected:
            logger.info("Peer %d registered vehicle %s", self.index, pseudonym.hex()[:16])
        self.connected[pseudonym] = ConnectedVehicle(certificate=certificate, address=address)

    def deregister_vehicle(self, pseudonym: bytes) -> None:
        self.connected.pop(pseudonym, None)

    def query(self, target: str) -> QueryResult:
        return decode_query_result(query_info(self.registry, query_target(target), self.world))

    # Work queue

    def _enqueue_proposal(self, src: NodeAddress, message: ProposalMessage) -> None:
        job = _Job(kind="proposal", src=src, proposal=message)
        if classify_priority(proposal_call(message.proposal)) == Priority.HIGH:
            self._high.append(job)
        else:
            self._low.append(job)
        self._pump()

    def _job_cost(self, job: _Job) -> float:
        if job.kind == "block":
            return sum(self.cost.validate_ms(len(tx.payload)) for tx in job.block.transactions)
        return self.cost.endorse_ms(len(job.proposal.proposal.payload))

    def _pump(self) -> None:
        if self._current is not None or self.crashed:
            return
        for queue in (self._blocks, self._high, self._low):
            if queue:
                self._current = queue.popleft()
                self.set_timer(self._job_cost(self._current), "work")
                return

    def _finish_job(self) -> None:
        job, self._current = self._current, None
        if job is None:
            return
        if job.kind == "block":
            try:
                flags = self.validate_block(job.block)
            except ChainLinkError as e:
                logger.error("Peer %d cannot link block %d: %s", self.index, job.block.number, e)
            else:
                self.commit_block(job.block, flags)
        else:
            self._respond_to_proposal(job.src, job.proposal)
        self._pump()

    def _receive_block(self, src: NodeAddress, block: Block) -> None:
        number = block.number
        if number >= self.received_upto:
            self._buffer.setdefault(number, block)
            while self.received_upto in self._buffer:
                self._blocks.append(_Job(kind="block", block=self._buffer.pop(self.received_upto)))
                self.received_upto += 1
            self._pump()
        self.send(src, BlockAck(peer=self.index, next_expected=self.received_upto))

    def _withdraw(self, proposal_id: bytes) -> None:
        self._withdrawn.add(proposal_id)
        self._standby.pop(proposal_id, None)
        for queue in (self._high, self._low):
            kept = [job for job in queue if job.proposal.proposal_id != proposal_id]
            queue.clear()
            queue.extend(kept)

    # Network hooks

    def on_restart(self) -> None:
        self._reset_volatile()

    def on_timer(self, name: str, data: Any) -> None:
        if name == "work":
            self._finish_job()
        elif name == "standby":
            held = self._standby.pop(data, None)
            if held is not None:
                self._enqueue_proposal(*held)

    def on_message(self, src: NodeAddress, message: WireMessage) -> None:
        if isinstance(message, ProposalMessage):
            pid = bytes(message.proposal_id)
            if pid in self._withdrawn:
                return
            if message.standby:
                self._standby[pid] = (src, message)
                self.set_timer(self.standby_takeover_ms, "standby", pid)
            else:
                self._enqueue_proposal(src, message)
        elif isinstance(message, Withdraw):
            self._withdraw(bytes(message.proposal_id))
        elif isinstance(message, BlockDeliver):
            self._receive_block(src, message.block)
        elif isinstance(message, Register):
            try:
                self.register_vehicle(message.pseudonym, message.certificate, src)
            except AuthFailure as e:
                logger.warning("Peer %d rejected registration from %s: %s", self.index, src, e)
        elif isinstance(message, Deregister):
            self.deregister_vehicle(message.pseudonym)
        elif isinstance(message, Query):
            self.send(src, QueryResponse(request_id=message.request_id, result=self.query(message.target)))
        else:
            logger.debug("Peer %d ignores %s from %s", self.index, type(message).__name__, src)
