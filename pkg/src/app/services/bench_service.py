"""
Benchmark service: throughput, notification latency and single-failure runs.

Each (mode, payload size) cell runs on a freshly built deployment. Sending
vehicles register at peer 0; the notification receiver registers at peer 1.
"""

import json
import logging
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set, Tuple

import logfire
import pandas as pd

from src.app.core.errors import EdgeChainError
from src.app.ledger.chain import dump_ledger_json, export_ledger
from src.app.models.pydantic.bench import (
    DEFAULT_FAULTS,
    BenchmarkConfig,
    FaultEvent,
    FaultReport,
    MetricsRow,
)
from src.app.models.pydantic.fleet import DEFAULT_ZONES, CommunicationMode, FleetMember, RequestPlan
from src.app.models.pydantic.ledger import ValidityFlag
from src.app.services.metrics_service import MetricsCollector
from src.app.services.topology_service import Deployment, build_deployment

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["mode", "payload_kib", "tx_per_s", "kib_per_s", "s_per_tx", "failures"]
RATIO_COLUMNS = ["payload_kib", "single_tx_per_s", "multiple_tx_per_s", "ratio"]
LEADER_DEADLINE_MS = 10_000.0
SETTLE_MS = 5_000.0
STALL_WINDOW_MS = 60_000.0
PER_REQUEST_BUDGET_MS = 70_000.0

UPDATE_ONLY = {"update": 1.0, "report": 0.0}
REPORT_ONLY = {"update": 0.0, "report": 1.0}


class BenchAborted(EdgeChainError):
    """A cell exceeded the failure budget or its accounting did not match the chain."""

    pass


class FaultBenchFailed(EdgeChainError):
    def __init__(self, message: str, report: Optional[FaultReport] = None) -> None:
        super().__init__(message)
        self.report = report


class IoError(EdgeChainError):
    pass


class EmptyResults(EdgeChainError):
    """Nothing was measured, so there is no table to write."""

    pass


class BenchCell:
    """One deployment plus the collector observing its vehicles."""

    def __init__(
        self,
        config: BenchmarkConfig,
        mode: CommunicationMode,
        payload_kib: int,
        contract_mix: Dict[str, float],
        with_receiver: bool = False,
    ) -> None:
        self.config = config
        self.mode = mode
        self.payload_kib = payload_kib
        fleet = [
            FleetMember(
                company=DEFAULT_ZONES[i % len(DEFAULT_ZONES)],
                zone=f"zone-{i}" if contract_mix.get("report") else DEFAULT_ZONES[i % len(DEFAULT_ZONES)],
                home_peer=0,
            )
            for i in range(config.vehicles)
        ]
        if with_receiver:
            fleet.append(FleetMember(company="green", zone="blue", home_peer=1 % config.peers))
        self.deployment: Deployment = build_deployment(
            seed=config.seed,
            peers=config.peers,
            orderers=config.orderers,
            fleet=fleet,
            link=config.link,
            cost=config.cost,
            block_cut=config.block_cut,
            clock=config.clock,
            endorsement_required=config.endorsement_required,
        )
        self.collector = MetricsCollector()
        for vehicle in self.deployment.vehicles:
            vehicle.add_listener(self.collector)
        self.senders = self.deployment.vehicles[: config.vehicles]
        self.receiver = self.deployment.vehicles[-1] if with_receiver else None
        self.plan = RequestPlan(
            payload_kib=payload_kib,
            count=config.requests_per_vehicle,
            mode=mode,
            contract_mix=contract_mix,
            window=config.window,
        )
        self.wall_time = 0.0

    @property
    def total_requests(self) -> int:
        return self.config.vehicles * self.config.requests_per_vehicle

    @property
    def network(self):
        return self.deployment.network

    def finished(self) -> bool:
        return all(vehicle.plan_finished for vehicle in self.senders)

    def start(self) -> None:
        self.network.start()
        self.deployment.wait_for_leader(self.network.now + LEADER_DEADLINE_MS)
        for vehicle in self.senders:
            vehicle.load_plan(self.plan)

    def run(self) -> None:
        started = time.perf_counter()
        self.start()
        self.network.run_until(self.finished, self.network.now + self.budget_ms())
        self.settle()
        self.wall_time = time.perf_counter() - started

    def budget_ms(self) -> float:
        return self.config.requests_per_vehicle * PER_REQUEST_BUDGET_MS + LEADER_DEADLINE_MS

    def settle(self) -> None:
        """Let live peers reach the ordered height; best effort."""
        leader = self.deployment.leader()
        if leader is None:
            return
        height = len(leader.blocks)
        if any(p.height < height for p in self.deployment.live_peers()):
            self.network.run_for(SETTLE_MS)

    def committed_on_chain(self, peer_index: int = 0) -> Set[bytes]:
        creators = {vehicle.pseudonym for vehicle in self.senders}
        peer = self.deployment.peers[peer_index]
        return {
            bytes(tx.id)
            for block in peer.chain
            for tx, flag in zip(block.transactions, block.validity)
            if flag == ValidityFlag.VALID and bytes(tx.creator) in creators
        }

    def check_accounting(self) -> None:
        failures = self.collector.failure_count
        if failures > self.config.max_failure_rate * self.total_requests:
            raise BenchAborted(
                f"{self.mode.value}/{self.payload_kib} KiB: {failures} of {self.total_requests} requests failed"
            )
        observed = set(self.collector.committed)
        on_chain = self.committed_on_chain()
        if not observed <= on_chain or len(observed) != self.total_requests - failures:
            raise BenchAborted(
                f"{self.mode.value}/{self.payload_kib} KiB: {len(observed)} confirmed, "
                f"{len(observed & on_chain)} on chain, {failures} failed of {self.total_requests}"
            )


def _cells(config: BenchmarkConfig) -> List[Tuple[CommunicationMode, int]]:
    return [(mode, size) for mode in config.modes for size in config.payload_sizes]


def run_throughput_bench(config: BenchmarkConfig) -> List[MetricsRow]:
    """One row per (mode, payload size): committed tx/s over first submission to last commit."""
    rows: List[MetricsRow] = []
    for mode, size in _cells(config):
        with logfire.span("throughput cell {mode} {payload_kib} KiB", mode=mode.value, payload_kib=size):
            cell = BenchCell(config, mode, size, UPDATE_ONLY)
            cell.run()
            cell.check_accounting()
            row = cell.collector.row(mode, size, wall_time=cell.wall_time)
        logger.info(
            "Throughput %s %d KiB: %.3f tx/s, %d failures", mode.value, size, row.tx_per_s, row.failures
        )
        rows.append(row)
    return rows


def run_notify_bench(
    config: BenchmarkConfig, events_path: Optional[str | Path] = None
) -> List[MetricsRow]:
    """One row per cell; s_per_tx is the mean span from a sender's submission to the receiver's notification."""
    rows: List[MetricsRow] = []
    raw_events: List[dict] = []
    for mode, size in _cells(config):
        with logfire.span("notify cell {mode} {payload_kib} KiB", mode=mode.value, payload_kib=size):
            cell = BenchCell(config, mode, size, REPORT_ONLY, with_receiver=True)
            cell.run()
            cell.check_accounting()
            spans = cell.collector.notify_spans_s(str(cell.receiver.address))
            s_per_tx = sum(spans) / len(spans) if spans else 0.0
            row = cell.collector.row(mode, size, s_per_tx=s_per_tx, wall_time=cell.wall_time)
        raw_events.extend(
            {
                "mode": mode.value,
                "payload_kib": size,
                "time_ms": n.time_ms,
                "receiver": n.receiver,
                "peer": n.peer,
                "txid": n.txid.hex(),
                "block_number": n.block_number,
            }
            for n in cell.collector.notifications
        )
        logger.info("Notify %s %d KiB: %.3f s/transaction", mode.value, size, s_per_tx)
        rows.append(row)
    if events_path is not None:
        _write_json_lines(events_path, raw_events)
    return rows


def run_fault_bench(
    config: BenchmarkConfig,
    faults: Sequence[FaultEvent] = DEFAULT_FAULTS,
    mode: CommunicationMode = CommunicationMode.MULTIPLE,
    payload_kib: Optional[int] = None,
    out_dir: Optional[str | Path] = None,
) -> FaultReport:
    """Inject ``faults`` at their progress marks and check no committed transaction is lost."""
    size = payload_kib or config.payload_sizes[0]
    cell = BenchCell(config, mode, size, UPDATE_ONLY)
    network = cell.network
    fired: Set[int] = set()
    crashed: List[str] = []
    fault_time: List[float] = []

    def inject(_network, _event) -> None:
        progress = cell.collector.committed_count / cell.total_requests
        for index, fault in enumerate(faults):
            if index in fired or progress < fault.at_progress:
                continue
            fired.add(index)
            address = cell.deployment.apply(fault.target, fault.action)
            crashed.append(str(address))
            fault_time.append(network.now)
            logger.info("Fault %s %s at %.1f ms", fault.action, address, network.now)
            if fault.restart_after_ms is not None:
                network.call_at(network.now + fault.restart_after_ms, lambda a=address: network.restart(a), "restart")

    network.add_observer(inject)
    started = time.perf_counter()
    with logfire.span("fault bench {mode} {payload_kib} KiB", mode=mode.value, payload_kib=size):
        cell.start()

        def done_or_stalled() -> bool:
            last = cell.collector.last_commit_ms or network.now
            return cell.finished() or network.now - max(last, fault_time[-1] if fault_time else 0.0) > STALL_WINDOW_MS

        network.run_until(done_or_stalled, network.now + cell.budget_ms())
        stalled = not cell.finished()
        cell.settle()
    cell.wall_time = time.perf_counter() - started

    hashes = cell.deployment.state_hashes()
    converged = len(set(hashes.values())) <= 1
    observed = set(cell.collector.committed)
    lost = 0
    for peer in cell.deployment.live_peers():
        lost = max(lost, len(observed - cell.committed_on_chain(peer.index)))

    at = fault_time[0] if fault_time else None
    first = cell.collector.first_submission_ms or 0.0
    last = cell.collector.last_commit_ms or network.now
    before = cell.collector.rate_between(first, at) if at is not None else cell.collector.tx_per_s()
    after = cell.collector.rate_between(at, last + 1e-9) if at is not None else before
    report = FaultReport(
        payload_kib=size,
        mode=mode,
        submitted=len(cell.collector.submitted),
        committed=cell.collector.committed_count,
        failures=cell.collector.failure_count,
        lost_transactions=lost,
        crashed=crashed,
        state_hashes=hashes,
        converged=converged,
        stalled=stalled,
        tx_per_s_before=before,
        tx_per_s_after=after,
        throughput_dip=(1.0 - after / before) if before > 0 else 0.0,
        fault_time_ms=at,
    )
    if out_dir is not None:
        export_peer_ledgers(cell.deployment, out_dir)
    logfire.info("fault bench finished", lost=lost, converged=converged, stalled=stalled)
    if not stalled and (lost or not converged):
        raise FaultBenchFailed(
            f"lost={lost} converged={converged} hashes={hashes}", report=report
        )
    return report


def export_peer_ledgers(deployment: Deployment, out_dir: str | Path) -> List[Path]:
    """Write ``ledger-peer-<i>.bin`` and its JSON dump for every peer."""
    target = Path(out_dir)
    written: List[Path] = []
    try:
        target.mkdir(parents=True, exist_ok=True)
        for peer in deployment.peers:
            written.append(export_ledger(peer.chain, target / f"ledger-peer-{peer.index}.bin"))
            written.append(dump_ledger_json(peer.chain, target / f"ledger-peer-{peer.index}.json"))
    except OSError as e:
        raise IoError(f"cannot write ledgers to {target}: {e}")
    return written


def _write_json_lines(path: str | Path, records: Sequence[dict]) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as file:
            for record in records:
                file.write(json.dumps(record, sort_keys=True) + "\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}")


def rows_frame(rows: Sequence[MetricsRow]) -> pd.DataFrame:
    return pd.DataFrame([row.model_dump(mode="json") for row in rows])


def ratio_frame(rows: Sequence[MetricsRow]) -> pd.DataFrame:
    """Multiple/single tx-per-s ratio for every payload size measured in both modes."""
    frame = rows_frame(rows)
    pivot = frame.pivot_table(index="payload_kib", columns="mode", values="tx_per_s", aggfunc="first")
    if CommunicationMode.SINGLE.value not in pivot or CommunicationMode.MULTIPLE.value not in pivot:
        return pd.DataFrame(columns=RATIO_COLUMNS)
    ratios = pd.DataFrame(
        {
            "payload_kib": pivot.index.astype(int),
            "single_tx_per_s": pivot[CommunicationMode.SINGLE.value].to_numpy(),
            "multiple_tx_per_s": pivot[CommunicationMode.MULTIPLE.value].to_numpy(),
        }
    ).dropna()
    single = ratios["single_tx_per_s"]
    ratios["ratio"] = (ratios["multiple_tx_per_s"] / single.where(single > 0)).fillna(0.0)
    return ratios.sort_values("payload_kib").reset_index(drop=True)


def emit_tables(rows: Sequence[MetricsRow], out_dir: str | Path, name: str = "benchmark") -> Dict[str, Path]:
    """Write ``<name>.csv``, its JSON mirror and ``ratios.csv`` under ``out_dir``."""
    if not rows:
        raise EmptyResults("no benchmark rows to emit")
    target = Path(out_dir)
    frame = rows_frame(rows)
    paths = {
        "csv": target / f"{name}.csv",
        "json": target / f"{name}.json",
        "ratios": target / "ratios.csv",
    }
    try:
        target.mkdir(parents=True, exist_ok=True)
        frame[CSV_COLUMNS].to_csv(paths["csv"], index=False, float_format="%.6f")
        frame[CSV_COLUMNS + ["wall_time"]].to_json(paths["json"], orient="records", indent=2)
        ratio_frame(rows).to_csv(paths["ratios"], index=False, float_format="%.6f")
    except OSError as e:
        raise IoError(f"cannot write benchmark tables to {target}: {e}")
    logger.info("Wrote %d rows to %s", len(rows), paths["csv"])
    return paths
