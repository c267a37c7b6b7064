import json

import pandas as pd
import pytest

from src.app.core.errors import EdgeChainError
from src.app.models.pydantic.bench import BenchmarkConfig, FaultEvent, MetricsRow
from src.app.models.pydantic.fleet import CommunicationMode
from src.app.models.pydantic.network import LinkModel
from src.app.services.bench_service import (
    CSV_COLUMNS,
    RATIO_COLUMNS,
    EmptyResults,
    emit_tables,
    ratio_frame,
    run_fault_bench,
    run_notify_bench,
    run_throughput_bench,
)

SINGLE = CommunicationMode.SINGLE
MULTIPLE = CommunicationMode.MULTIPLE


def small_config(**overrides):
    options = dict(
        payload_sizes=(16,),
        requests_per_vehicle=2,
        vehicles=2,
        link=LinkModel(base_latency_ms=5, jitter_ms=1, loss_rate=0),
        max_failure_rate=0.5,
    )
    options.update(overrides)
    return BenchmarkConfig(**options)


def row(mode, size, tx_per_s, failures=0):
    return MetricsRow(
        mode=mode,
        payload_kib=size,
        tx_per_s=tx_per_s,
        kib_per_s=tx_per_s * size,
        s_per_tx=1 / tx_per_s if tx_per_s else 0.0,
        failures=failures,
    )


def test_config_rejects_unknown_sizes_and_policies():
    with pytest.raises(ValueError):
        BenchmarkConfig(payload_sizes=(48,))
    with pytest.raises(ValueError):
        BenchmarkConfig(peers=2, endorsement_required=3)
    with pytest.raises(ValueError):
        BenchmarkConfig(modes=())


def test_throughput_rows_cover_every_cell():
    rows = run_throughput_bench(small_config())
    assert [(r.mode, r.payload_kib) for r in rows] == [(SINGLE, 16), (MULTIPLE, 16)]
    for r in rows:
        assert r.committed + r.failures == 4
        assert r.tx_per_s > 0
        assert r.kib_per_s == pytest.approx(r.tx_per_s * 16)


def test_same_seed_gives_the_same_table(tmp_path):
    config = small_config(modes=(SINGLE,))
    first = emit_tables(run_throughput_bench(config), tmp_path / "a")
    second = emit_tables(run_throughput_bench(config), tmp_path / "b")
    assert first["csv"].read_text() == second["csv"].read_text()


def test_emit_tables_writes_csv_json_and_ratios(tmp_path):
    rows = [row(SINGLE, 16, 2.0), row(MULTIPLE, 16, 1.0, failures=1), row(SINGLE, 32, 1.5)]
    paths = emit_tables(rows, tmp_path, name="grid")
    assert paths["csv"].name == "grid.csv"

    table = pd.read_csv(paths["csv"])
    assert list(table.columns) == CSV_COLUMNS
    assert list(table["failures"]) == [0, 1, 0]
    records = json.loads(paths["json"].read_text())
    assert [r["mode"] for r in records] == ["single", "multiple", "single"]
    assert "wall_time" in records[0]

    ratios = pd.read_csv(paths["ratios"])
    assert list(ratios.columns) == RATIO_COLUMNS
    assert list(ratios["payload_kib"]) == [16]
    assert ratios["ratio"][0] == pytest.approx(0.5)

    with pytest.raises(EmptyResults) as excinfo:
        emit_tables([], tmp_path / "empty")
    assert isinstance(excinfo.value, EdgeChainError)
    assert not (tmp_path / "empty").exists()


def test_ratio_frame_handles_missing_modes_and_zero_rates():
    assert list(ratio_frame([row(SINGLE, 16, 2.0)]).columns) == RATIO_COLUMNS
    assert ratio_frame([row(SINGLE, 16, 2.0)]).empty
    frame = ratio_frame([row(MULTIPLE, 64, 1.0), row(SINGLE, 64, 0.0), row(MULTIPLE, 16, 3.0), row(SINGLE, 16, 1.0)])
    assert list(frame["payload_kib"]) == [16, 64]
    assert list(frame["ratio"]) == pytest.approx([3.0, 0.0])


def test_notify_bench_measures_receiver_latency(tmp_path):
    events = tmp_path / "notify-events.jsonl"
    rows = run_notify_bench(small_config(modes=(SINGLE,)), events_path=events)
    assert len(rows) == 1 and rows[0].s_per_tx > 0
    lines = [json.loads(line) for line in events.read_text().splitlines()]
    at_receiver = [line for line in lines if line["receiver"] == "vehicle-2"]
    assert at_receiver and {line["peer"] for line in at_receiver} == {"peer-1"}


def test_fault_bench_loses_no_committed_transaction(tmp_path):
    config = small_config(requests_per_vehicle=4)
    report = run_fault_bench(config, out_dir=tmp_path)
    assert report.lost_transactions == 0
    assert not report.stalled and report.converged
    assert "peer-2" in report.crashed
    assert any(name.startswith("orderer-") for name in report.crashed)
    assert report.committed + report.failures == 8
    assert (tmp_path / "ledger-peer-0.bin").exists()


def test_follower_crash_with_restart():
    faults = [FaultEvent(at_progress=0.25, target="orderer-follower", restart_after_ms=1_000)]
    report = run_fault_bench(small_config(requests_per_vehicle=4), faults=faults, mode=SINGLE)
    assert report.lost_transactions == 0 and report.converged
    assert report.fault_time_ms is not None


@pytest.mark.slow
def test_virtual_clock_tables_show_payload_and_mode_trends():
    config = small_config(payload_sizes=(16, 100), vehicles=3, requests_per_vehicle=4)
    throughput = run_throughput_bench(config)
    assert all(r.failures == 0 for r in throughput)
    for mode in (SINGLE, MULTIPLE):
        rates = [r.tx_per_s for r in sorted(throughput, key=lambda r: r.payload_kib) if r.mode == mode]
        assert len(rates) == 2 and rates[1] <= rates[0]
    ratios = ratio_frame(throughput)
    assert list(ratios["payload_kib"]) == [16, 100]
    assert (ratios["ratio"] >= 1.5).all()

    notify = {(r.mode, r.payload_kib): r.s_per_tx for r in run_notify_bench(config)}
    for size in (16, 100):
        assert 0 < notify[(MULTIPLE, size)] < notify[(SINGLE, size)]
