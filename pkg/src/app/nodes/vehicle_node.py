"""
Virtual vehicle: client side of the execute-order-validate flow.

A vehicle signs proposals, collects endorsements (from its home peer in
single mode, from preferred peers with the rest on standby in multiple mode),
assembles the envelope and submits it to the orderer leader. A request
completes when the home peer confirms the commit or pushes a notification
carrying its transaction id. Vehicles with a road route react to incident
notifications by rerouting around the reported edge.
"""

import hashlib
import logging
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from src.app.contracts.situation_contract import report_call
from src.app.contracts.vehicle_contract import update_call
from src.app.core.auth.identity import sign_proposal
from src.app.core.config.settings import settings
from src.app.core.errors import EdgeChainError
from src.app.ledger.hashing import assemble_transaction, proposal_hash
from src.app.models.pydantic.contracts import (
    ContractCall,
    GeoPoint,
    IncidentKind,
    IncidentReport,
    QueryResult,
    VehicleRecord,
)
from src.app.models.pydantic.fleet import CommunicationMode, RequestPlan, RerouteEvent
from src.app.models.pydantic.identity import IdentityRecord
from src.app.models.pydantic.ledger import Endorsement, SignedProposal, Transaction, ValidityFlag
from src.app.models.pydantic.messages import (
    CommitConfirmation,
    NoLeaderResponse,
    Notification,
    ProposalMessage,
    ProposalResponse,
    Query,
    QueryResponse,
    Redirect,
    Register,
    SubmitAck,
    SubmitEnvelope,
    SubmitRejected,
    Withdraw,
    WireMessage,
)
from src.app.models.pydantic.network import NodeAddress, vehicle
from src.app.models.pydantic.ordering import Envelope
from src.app.network.simulator import SimNode
from src.app.services.routing_service import RoadGraph, reroute_on_incident

logger = logging.getLogger(__name__)

PAYLOAD_MAGIC = b"EDGECHAIN-PAYLOAD\x00"


class RequestFailed(EdgeChainError):
    pass


class EndorsementTimeout(RequestFailed):
    pass


class CommitTimeout(RequestFailed):
    pass


class EndorsementRejected(RequestFailed):
    """Too many peers refused to endorse."""

    pass


class SubmissionRejected(RequestFailed):
    pass


class InvalidatedTransaction(RequestFailed):
    """Committed with a non-valid flag other than a retryable conflict."""

    pass


@dataclass
class ClientTimeouts:
    endorsement_ms: float = settings.ENDORSEMENT_TIMEOUT_MS
    submit_ack_ms: float = settings.SUBMIT_ACK_TIMEOUT_MS
    commit_ms: float = settings.COMMIT_TIMEOUT_MS
    no_leader_backoff_ms: float = settings.NO_LEADER_BACKOFF_MS
    max_retries: int = settings.CLIENT_MAX_RETRIES


@dataclass
class RequestRecord:
    seq: int
    call: ContractCall
    mode: CommunicationMode
    started_at: float
    proposal: Optional[SignedProposal] = None
    proposal_id: bytes = b""
    targets: Tuple[NodeAddress, ...] = ()
    standby: Tuple[NodeAddress, ...] = ()
    responses: Dict[bytes, Dict[NodeAddress, ProposalResponse]] = field(default_factory=dict)
    refusals: int = 0
    envelope: Optional[Envelope] = None
    state: str = "endorsing"
    token: int = 0
    attempts: int = 0
    submissions: int = 0
    submitted_at: Optional[float] = None
    completed_at: Optional[float] = None
    block_number: Optional[int] = None
    error: Optional[RequestFailed] = None

    @property
    def txid(self) -> Optional[bytes]:
        return self.envelope.transaction.id if self.envelope else None

    @property
    def latency_ms(self) -> Optional[float]:
        return None if self.completed_at is None else self.completed_at - self.started_at

    @property
    def done(self) -> bool:
        return self.state in ("committed", "failed")


@dataclass
class VehicleEvent:
    kind: str  # submitted | committed | failed | notification | reroute | query
    time_ms: float
    vehicle: NodeAddress
    record: Optional[RequestRecord] = None
    notification: Optional[Notification] = None
    reroute: Optional[RerouteEvent] = None
    query: Optional[QueryResult] = None


Listener = Callable[[VehicleEvent], None]


class VehicleNode(SimNode):
    def __init__(
        self,
        index: int,
        identity: IdentityRecord,
        home_peer: NodeAddress,
        peers: Sequence[NodeAddress],
        orderers: Sequence[NodeAddress],
        company: str = "red",
        zone: str = "red",
        endorsement_required: int = 1,
        timeouts: Optional[ClientTimeouts] = None,
        seed: int = 0,
    ) -> None:
        super().__init__(vehicle(index))
        self.index = index
        self.identity = identity
        self.home_peer = home_peer
        self.peers = list(peers)
        self.orderers = list(orderers)
        self.company = company
        self.zone = zone
        self.endorsement_required = endorsement_required
        self.timeouts = timeouts or ClientTimeouts()
        self.rng = random.Random(f"edgechain-vehicle-{seed}-{index}")
        self.listeners: List[Listener] = []

        self.requests: Dict[int, RequestRecord] = {}
        self._by_proposal: Dict[bytes, RequestRecord] = {}
        self._by_txid: Dict[bytes, RequestRecord] = {}
        self._next_seq = 0
        self._nonce = 0
        self._leader_hint = 0

        self.plan: Optional[RequestPlan] = None
        self._planned = 0

        self.inbox: Dict[bytes, Notification] = {}
        self.query_results: Dict[int, QueryResult] = {}
        self._next_query = 0

        self.road: Optional[RoadGraph] = None
        self.position: Optional[int] = None
        self.destination: Optional[int] = None
        self.route: List[int] = []
        self.reroutes: List[RerouteEvent] = []

    @property
    def pseudonym(self) -> bytes:
        return self.identity.pseudonym

    @property
    def insurance_ref(self) -> str:
        """Opaque policy reference; unlinkable to the fleet index."""
        return hashlib.sha256(self.company.encode("utf-8") + self.pseudonym).hexdigest()[:16]

    def add_listener(self, listener: Listener) -> None:
        self.listeners.append(listener)

    def _emit(self, kind: str, **fields: Any) -> None:
        event = VehicleEvent(kind=kind, time_ms=self.now, vehicle=self.address, **fields)
        for listener in self.listeners:
            listener(event)

    # Setup

    def on_start(self) -> None:
        self.send(self.home_peer, Register(pseudonym=self.pseudonym, certificate=self.identity.certificate))
        self._fill_window()

    def set_route(self, road: RoadGraph, position: int, destination: int, route: Sequence[int]) -> None:
        self.road = road
        self.position = position
        self.destination = destination
        self.route = list(route)

    def load_plan(self, plan: RequestPlan) -> None:
        self.plan = plan
        self._planned = 0
        if self.network is not None and self.network.started:
            self._fill_window()

    @property
    def in_flight(self) -> int:
        return sum(1 for r in self.requests.values() if not r.done)

    @property
    def plan_finished(self) -> bool:
        return self.plan is None or (self._planned >= self.plan.count and self.in_flight == 0)

    def _fill_window(self) -> None:
        if self.plan is None or self.crashed:
            return
        while self._planned < self.plan.count and self.in_flight < self.plan.window:
            self._planned += 1
            self.submit_request(self._planned_call(self.plan), self.plan.mode)

    # Payloads

    def make_payload(self, size_kib: int, label: str) -> bytes:
        header = PAYLOAD_MAGIC + f"{self.pseudonym.hex()[:16]}:{label}\x00".encode("ascii")
        size = max(size_kib * 1024, len(header) + 1)
        return header + self.rng.randbytes(size - len(header))

    def current_gps(self) -> GeoPoint:
        if self.road is not None and self.position is not None:
            return self.road.position(self.position)
        return GeoPoint(lat=0.0, lon=0.0)

    def _planned_call(self, plan: RequestPlan) -> ContractCall:
        payload = self.make_payload(plan.payload_kib, str(self._planned))
        if self.rng.random() < plan.contract_mix.get("report", 0.0):
            return self.incident_call(IncidentKind.ACCIDENT, self.current_gps(), payload)
        record = VehicleRecord(
            pseudonym=self.pseudonym,
            owners=(self.pseudonym,),
            inspection_history=(),
            gps=self.current_gps(),
            connected_edge=str(self.home_peer),
            insurance_ref=self.insurance_ref,
        )
        return update_call(record, payload)

    def incident_call(self, kind: IncidentKind, gps: GeoPoint, image: bytes, zone: Optional[str] = None) -> ContractCall:
        incident = IncidentReport(
            reporter=self.pseudonym,
            gps=gps,
            kind=kind,
            image_hash=hashlib.sha256(image).digest(),
            zone=zone or self.zone,
            reported_at=int(self.now),
        )
        return report_call(incident, image)

    def report_incident(
        self,
        kind: IncidentKind,
        gps: GeoPoint,
        payload_kib: int = 16,
        mode: CommunicationMode = CommunicationMode.SINGLE,
        zone: Optional[str] = None,
    ) -> RequestRecord:
        image = self.make_payload(payload_kib, f"incident-{kind.value}")
        return self.submit_request(self.incident_call(kind, gps, image, zone), mode)

    # Endorsement phase

    def _sign(self, call: ContractCall) -> SignedProposal:
        self._nonce += 1
        proposal = SignedProposal(
            creator=self.pseudonym,
            creator_certificate=self.identity.certificate,
            contract=call.contract,
            operation=call.operation,
            args=call.args,
            payload=call.payload or b"\x00",
            nonce=self._nonce,
            created_at=int(self.now),
        )
        return sign_proposal(self.identity, proposal)

    def _choose_peers(self, mode: CommunicationMode, seq: int) -> Tuple[Tuple[NodeAddress, ...], Tuple[NodeAddress, ...]]:
        if mode == CommunicationMode.SINGLE:
            return (self.home_peer,), ()
        count = len(self.peers)
        start = (self.index + seq) % count
        rotated = [self.peers[(start + k) % count] for k in range(count)]
        required = min(self.endorsement_required, count)
        return tuple(rotated[:required]), tuple(rotated[required:])

    def submit_request(self, call: ContractCall, mode: CommunicationMode = CommunicationMode.SINGLE) -> RequestRecord:
        """Start the endorse, order and commit cycle for ``call``."""
        self._next_seq += 1
        record = RequestRecord(seq=self._next_seq, call=call, mode=mode, started_at=self.now)
        self.requests[record.seq] = record
        self._propose(record)
        return record

    def _propose(self, record: RequestRecord) -> None:
        record.attempts += 1
        record.state = "endorsing"
        record.responses = {}
        record.refusals = 0
        record.envelope = None
        record.proposal = self._sign(record.call)
        record.proposal_id = proposal_hash(record.proposal)
        record.targets, record.standby = self._choose_peers(record.mode, record.seq + record.attempts)
        self._by_proposal[record.proposal_id] = record
        for target in record.targets:
            self.send(target, ProposalMessage(proposal=record.proposal, proposal_id=record.proposal_id))
        for target in record.standby:
            self.send(
                target,
                ProposalMessage(proposal=record.proposal, proposal_id=record.proposal_id, standby=True),
            )
        self._arm(record, self.timeouts.endorsement_ms, "endorse-timeout")

    def _arm(self, record: RequestRecord, delay: float, name: str) -> None:
        record.token += 1
        self.set_timer(delay, name, (record.seq, record.token))

    def _on_proposal_response(self, response: ProposalResponse) -> None:
        record = self._by_proposal.get(bytes(response.proposal_id))
        if record is None or record.state != "endorsing" or bytes(response.proposal_id) != record.proposal_id:
            return
        tolerated = 0 if record.mode == CommunicationMode.SINGLE else len(self.peers) - self.endorsement_required
        if response.error or response.endorsement is None:
            record.refusals += 1
            if record.refusals > tolerated:
                self._fail(record, EndorsementRejected(response.error or "no endorsement"))
            return
        group = record.responses.setdefault(bytes(response.endorsement.rw_set_hash), {})
        group[response.peer] = response
        if len(group) < self.endorsement_required:
            return
        if record.standby:
            self.multicast(record.standby, Withdraw(proposal_id=record.proposal_id))
        first = next(iter(group.values()))
        endorsements: List[Endorsement] = [r.endorsement for _, r in sorted(group.items(), key=lambda kv: kv[0].index)]
        transaction: Transaction = assemble_transaction(record.proposal, first.read_set, first.write_set, endorsements)
        record.envelope = Envelope(transaction=transaction)
        record.submissions = 0
        self._by_txid[transaction.id] = record
        self._submit(record)

    # Ordering phase

    def _submit(self, record: RequestRecord) -> None:
        record.state = "submitting"
        record.submissions += 1
        if record.submitted_at is None:
            record.submitted_at = self.now
        if record.submissions == 1:
            self._emit("submitted", record=record)
        self.send(self.orderers[self._leader_hint % len(self.orderers)], SubmitEnvelope(envelope=record.envelope))
        self._arm(record, self.timeouts.submit_ack_ms, "ack-timeout")

    def _rotate_orderer(self) -> None:
        self._leader_hint = (self._leader_hint + 1) % len(self.orderers)

    def _record_for_tx(self, txid: bytes, state: str) -> Optional[RequestRecord]:
        record = self._by_txid.get(bytes(txid))
        if record is None or record.state != state or record.txid != bytes(txid):
            return None
        return record

    def _on_submit_reply(self, message: WireMessage) -> None:
        record = self._record_for_tx(message.txid, "submitting")
        if record is None:
            return
        if isinstance(message, SubmitAck):
            record.state = "committing"
            self._arm(record, self.timeouts.commit_ms, "commit-timeout")
        elif isinstance(message, Redirect):
            self._leader_hint = message.leader.index
            self._retry_submit(record, 0.0)
        elif isinstance(message, NoLeaderResponse):
            self._rotate_orderer()
            self._retry_submit(record, self.timeouts.no_leader_backoff_ms)
        elif isinstance(message, SubmitRejected):
            self._fail(record, SubmissionRejected(message.reason))

    def _retry_submit(self, record: RequestRecord, delay: float) -> None:
        if record.submissions > self.timeouts.max_retries:
            self._fail(record, CommitTimeout(f"gave up after {record.submissions} submissions"))
            return
        if delay <= 0:
            self._submit(record)
        else:
            self._arm(record, delay, "resubmit")

    # Completion

    def _complete(self, record: RequestRecord, block_number: int) -> None:
        record.state = "committed"
        record.token += 1
        record.completed_at = self.now
        record.block_number = block_number
        self._emit("committed", record=record)
        self._fill_window()

    def _fail(self, record: RequestRecord, error: RequestFailed) -> None:
        record.state = "failed"
        record.token += 1
        record.error = error
        record.completed_at = self.now
        logger.info("Vehicle %d request %d failed: %s", self.index, record.seq, error)
        self._emit("failed", record=record)
        self._fill_window()

    def _on_confirmation(self, message: CommitConfirmation) -> None:
        record = self._by_txid.get(bytes(message.txid))
        if record is None or record.done or record.txid != bytes(message.txid):
            return
        if message.flag == ValidityFlag.VALID:
            self._complete(record, message.block_number)
        elif message.flag == ValidityFlag.DUPLICATE_INVALID:
            return
        elif message.flag == ValidityFlag.CONFLICT_INVALID and record.attempts <= self.timeouts.max_retries:
            logger.debug("Vehicle %d retries request %d after conflict", self.index, record.seq)
            self._propose(record)
        else:
            self._fail(record, InvalidatedTransaction(f"committed as {message.flag.value}"))

    def _on_notification(self, notification: Notification) -> None:
        txid = bytes(notification.txid)
        own = self._by_txid.get(txid)
        if own is not None and not own.done and own.txid == txid:
            self._complete(own, notification.block_number)
        if txid in self.inbox:
            return
        self.inbox[txid] = notification
        self._emit("notification", notification=notification)
        self.handle_incident(notification)

    def handle_incident(self, notification: Notification) -> Optional[RerouteEvent]:
        """Penalize the incident's edge and reroute if it lies on the remaining route."""
        if self.road is None or self.position is None or self.destination is None or not self.route:
            return None
        edge = self.road.nearest_edge(notification.gps)
        new_route = reroute_on_incident(self.road, self.route, self.position, self.destination, [edge])
        if new_route is None:
            return None
        event = RerouteEvent(
            time_ms=self.now,
            vehicle=str(self.address),
            txid=bytes(notification.txid).hex(),
            edge=edge,
            old_route=list(self.route),
            new_route=new_route,
        )
        self.route = new_route
        self.reroutes.append(event)
        self._emit("reroute", reroute=event)
        return event

    # Queries

    def send_query(self, target: str, peer_address: Optional[NodeAddress] = None) -> int:
        self._next_query += 1
        self.send(peer_address or self.home_peer, Query(request_id=self._next_query, target=target))
        return self._next_query

    # Network hooks

    def on_timer(self, name: str, data: Any) -> None:
        seq, token = data
        record = self.requests.get(seq)
        if record is None or record.token != token or record.done:
            return
        if name == "endorse-timeout":
            self._fail(record, EndorsementTimeout(f"no endorsement within {self.timeouts.endorsement_ms} ms"))
        elif name == "ack-timeout":
            self._rotate_orderer()
            self._retry_submit(record, 0.0)
        elif name == "resubmit":
            self._submit(record)
        elif name == "commit-timeout":
            if record.submissions > self.timeouts.max_retries:
                self._fail(record, CommitTimeout(f"not committed after {record.submissions} submissions"))
            else:
                self._submit(record)

    def on_message(self, src: NodeAddress, message: WireMessage) -> None:
        if isinstance(message, ProposalResponse):
            self._on_proposal_response(message)
        elif isinstance(message, (SubmitAck, Redirect, NoLeaderResponse, SubmitRejected)):
            self._on_submit_reply(message)
        elif isinstance(message, CommitConfirmation):
            self._on_confirmation(message)
        elif isinstance(message, Notification):
            self._on_notification(message)
        elif isinstance(message, QueryResponse):
            self.query_results[message.request_id] = message.result
            self._emit("query", query=message.result)
