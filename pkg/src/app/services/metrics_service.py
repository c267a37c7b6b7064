"""
Metrics collection for benchmark cells and scenarios.

One ``MetricsCollector`` subscribes to every vehicle in a run and owns all
aggregation, so counts and spans are computed from a single event stream.
"""

import logging
from dataclasses import dataclass, field
from statistics import fmean
from typing import Dict, List, Optional, Tuple

from src.app.models.pydantic.bench import MetricsRow
from src.app.models.pydantic.fleet import CommunicationMode
from src.app.nodes.vehicle_node import VehicleEvent

logger = logging.getLogger(__name__)


@dataclass
class NotificationRecord:
    time_ms: float
    receiver: str
    txid: bytes
    peer: str
    block_number: int


@dataclass
class MetricsCollector:
    submitted: Dict[bytes, float] = field(default_factory=dict)
    committed: Dict[bytes, float] = field(default_factory=dict)
    latencies_ms: List[float] = field(default_factory=list)
    commit_times_ms: List[float] = field(default_factory=list)
    failures: List[Tuple[str, int, str]] = field(default_factory=list)
    notifications: List[NotificationRecord] = field(default_factory=list)
    reroutes: int = 0
    first_submission_ms: Optional[float] = None
    last_commit_ms: Optional[float] = None

    def __call__(self, event: VehicleEvent) -> None:
        self.record(event)

    def record(self, event: VehicleEvent) -> None:
        if event.kind == "submitted":
            # spans start at proposal time so endorsement is counted
            started = event.record.started_at
            self.submitted[event.record.txid] = started
            if self.first_submission_ms is None or started < self.first_submission_ms:
                self.first_submission_ms = started
        elif event.kind == "committed":
            self.committed[event.record.txid] = event.time_ms
            self.commit_times_ms.append(event.time_ms)
            self.latencies_ms.append(event.record.latency_ms)
            self.last_commit_ms = event.time_ms
        elif event.kind == "failed":
            self.failures.append((str(event.vehicle), event.record.seq, repr(event.record.error)))
        elif event.kind == "notification":
            n = event.notification
            self.notifications.append(
                NotificationRecord(
                    time_ms=event.time_ms,
                    receiver=str(event.vehicle),
                    txid=bytes(n.txid),
                    peer=str(n.peer),
                    block_number=n.block_number,
                )
            )
        elif event.kind == "reroute":
            self.reroutes += 1

    @property
    def committed_count(self) -> int:
        return len(self.committed)

    @property
    def failure_count(self) -> int:
        return len(self.failures)

    def span_s(self, start_ms: Optional[float] = None, end_ms: Optional[float] = None) -> float:
        start = self.first_submission_ms if start_ms is None else start_ms
        end = self.last_commit_ms if end_ms is None else end_ms
        if start is None or end is None:
            return 0.0
        return max(0.0, end - start) / 1000.0

    def tx_per_s(self) -> float:
        span = self.span_s()
        return self.committed_count / span if span > 0 else 0.0

    def rate_between(self, start_ms: float, end_ms: float) -> float:
        """Commits per second inside ``[start_ms, end_ms)``."""
        if end_ms <= start_ms:
            return 0.0
        count = sum(1 for t in self.commit_times_ms if start_ms <= t < end_ms)
        return count / ((end_ms - start_ms) / 1000.0)

    def mean_latency_s(self) -> float:
        return fmean(self.latencies_ms) / 1000.0 if self.latencies_ms else 0.0

    def notify_spans_s(self, receiver: str) -> List[float]:
        """Request start to first notification at ``receiver``, per transaction."""
        first_seen: Dict[bytes, float] = {}
        for record in self.notifications:
            if record.receiver == receiver and record.txid not in first_seen:
                first_seen[record.txid] = record.time_ms
        return [
            (first_seen[txid] - submitted) / 1000.0
            for txid, submitted in self.submitted.items()
            if txid in first_seen
        ]

    def row(
        self,
        mode: CommunicationMode,
        payload_kib: int,
        s_per_tx: Optional[float] = None,
        wall_time: float = 0.0,
    ) -> MetricsRow:
        tx_per_s = self.tx_per_s()
        return MetricsRow(
            mode=mode,
            payload_kib=payload_kib,
            tx_per_s=tx_per_s,
            kib_per_s=tx_per_s * payload_kib,
            s_per_tx=self.mean_latency_s() if s_per_tx is None else s_per_tx,
            failures=self.failure_count,
            wall_time=wall_time,
            committed=self.committed_count,
        )
