#!/usr/bin/env python3
"""
Structural acceptance run for edgechain.

Checks throughput and notification trends across payload sizes, single-failure
tolerance, the adaptive-guidance reroute and same-seed determinism. The Raft
safety, MVCC and tamper-evidence suites live in pytest (``pytest -m slow``).
"""

import argparse
import logging
import sys
import tempfile
from pathlib import Path
from typing import Callable, List, Tuple

from src.app.core.config.settings import configure_logging
from src.app.core.errors import EdgeChainError
from src.app.models.pydantic.bench import BenchmarkConfig, MetricsRow
from src.app.models.pydantic.fleet import PAYLOAD_SIZES_KIB, CommunicationMode
from src.app.models.pydantic.network import ClockMode
from src.app.services.bench_service import (
    emit_tables,
    ratio_frame,
    run_fault_bench,
    run_notify_bench,
    run_throughput_bench,
)
from src.app.services.scenario_service import run_scenario_adaptive_guidance

logger = logging.getLogger(__name__)

MIN_MULTIPLE_RATIO = 1.5
SOFT_NOTIFY_BOUND_S = 2.0

Check = Tuple[str, Callable[[], List[str]]]


def _by_mode(rows: List[MetricsRow], mode: CommunicationMode) -> List[MetricsRow]:
    return sorted((r for r in rows if r.mode == mode), key=lambda r: r.payload_kib)


def _non_increasing(values: List[float]) -> bool:
    return all(b <= a for a, b in zip(values, values[1:]))


def check_throughput(config: BenchmarkConfig, out_dir: Path) -> List[str]:
    rows = run_throughput_bench(config)
    emit_tables(rows, out_dir, "benchmark")
    problems = []
    for mode in config.modes:
        cells = _by_mode(rows, mode)
        if not _non_increasing([r.tx_per_s for r in cells]):
            problems.append(f"{mode.value}: tx/s grows with payload size")
        if not _non_increasing([-r.kib_per_s for r in cells]):
            problems.append(f"{mode.value}: KiB/s shrinks with payload size")
    for _, ratio in ratio_frame(rows).iterrows():
        if ratio["ratio"] < MIN_MULTIPLE_RATIO:
            problems.append(f"{int(ratio['payload_kib'])} KiB: multiple/single ratio {ratio['ratio']:.2f}")
    return problems


def check_notify(config: BenchmarkConfig, out_dir: Path) -> List[str]:
    rows = run_notify_bench(config, events_path=out_dir / "notify-events.jsonl")
    emit_tables(rows, out_dir, "notify-benchmark")
    problems = []
    for mode in config.modes:
        spans = [r.s_per_tx for r in _by_mode(rows, mode)]
        if not all(b > a for a, b in zip(spans, spans[1:])):
            problems.append(f"{mode.value}: s/transaction does not grow with payload size")
    single = {r.payload_kib: r.s_per_tx for r in _by_mode(rows, CommunicationMode.SINGLE)}
    for r in _by_mode(rows, CommunicationMode.MULTIPLE):
        if r.payload_kib in single and r.s_per_tx >= single[r.payload_kib]:
            problems.append(f"{r.payload_kib} KiB: multiple mode is not faster to notify")
    largest = single.get(max(single, default=0))
    if largest is not None and largest > SOFT_NOTIFY_BOUND_S:
        logger.warning("Single-mode notification span %.2f s exceeds %.1f s", largest, SOFT_NOTIFY_BOUND_S)
    return problems


def check_fault(config: BenchmarkConfig, out_dir: Path) -> List[str]:
    report = run_fault_bench(config, out_dir=out_dir / "fault")
    problems = []
    if report.lost_transactions:
        problems.append(f"{report.lost_transactions} committed transactions lost")
    if not report.converged:
        problems.append(f"surviving peers disagree: {report.state_hashes}")
    if report.stalled:
        problems.append("run stalled after the fault")
    return problems


def check_guidance(out_dir: Path) -> List[str]:
    events = run_scenario_adaptive_guidance("default", seed=0, out_dir=out_dir / "guidance")
    reroutes = [e for e in events if e.step == "reroute"]
    return [] if len(reroutes) == 1 else [f"expected one reroute, saw {len(reroutes)}"]


def check_determinism(config: BenchmarkConfig, out_dir: Path) -> List[str]:
    virtual = config.model_copy(update={"clock": ClockMode.VIRTUAL, "payload_sizes": (16,)})
    first = emit_tables(run_throughput_bench(virtual), out_dir / "det-a")
    second = emit_tables(run_throughput_bench(virtual), out_dir / "det-b")
    traces = [
        [(e.time_ms, e.step, e.node) for e in run_scenario_adaptive_guidance("default", seed=7)] for _ in range(2)
    ]
    problems = []
    if first["csv"].read_bytes() != second["csv"].read_bytes():
        problems.append("throughput CSV differs between same-seed runs")
    if traces[0] != traces[1]:
        problems.append("scenario trace differs between same-seed runs")
    return problems


def run_acceptance(config: BenchmarkConfig, out_dir: Path) -> int:
    print("🚗 edgechain - Structural Acceptance Run")
    print("=" * 45)
    print(f"📊 {len(config.modes)} modes x {len(config.payload_sizes)} payload sizes, "
          f"{config.vehicles} vehicles x {config.requests_per_vehicle} requests, {config.clock.value} clock")
    print()

    fault_config = config.model_copy(update={"payload_sizes": (config.payload_sizes[0],)})
    checks: List[Check] = [
        ("Throughput trends and multiple/single ratio", lambda: check_throughput(config, out_dir)),
        ("Notification latency trends", lambda: check_notify(config, out_dir)),
        ("Single orderer + peer failure", lambda: check_fault(fault_config, out_dir)),
        ("Adaptive guidance reroute", lambda: check_guidance(out_dir)),
        ("Same-seed determinism", lambda: check_determinism(config, out_dir)),
    ]

    failed = 0
    for name, check in checks:
        try:
            problems = check()
        except EdgeChainError as e:
            problems = [f"{type(e).__name__}: {e}"]
        if problems:
            failed += 1
            print(f"❌ {name}")
            for problem in problems:
                print(f"   • {problem}")
        else:
            print(f"✅ {name}")

    print()
    print(f"📁 Tables and ledgers written to {out_dir}")
    print(f"{'✅' if not failed else '❌'} {len(checks) - failed}/{len(checks)} checks passed")
    return 1 if failed else 0


def main() -> int:
    parser = argparse.ArgumentParser(description="Structural acceptance run")
    parser.add_argument("--requests", type=int, default=100, help="requests per vehicle")
    parser.add_argument("--vehicles", type=int, default=3)
    parser.add_argument("--clock", choices=[c.value for c in ClockMode], default=ClockMode.REAL.value)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None, help="output directory (default: a temporary directory)")
    args = parser.parse_args()

    configure_logging()
    config = BenchmarkConfig(
        payload_sizes=PAYLOAD_SIZES_KIB,
        requests_per_vehicle=args.requests,
        vehicles=args.vehicles,
        clock=ClockMode(args.clock),
        seed=args.seed,
    )
    if args.out:
        return run_acceptance(config, Path(args.out))
    with tempfile.TemporaryDirectory(prefix="edgechain-acceptance-") as tmp:
        return run_acceptance(config, Path(tmp))


if __name__ == "__main__":
    sys.exit(main())
