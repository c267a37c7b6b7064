import json

import pytest

from src.app.ledger.chain import validate_ledger_file
from src.app.models.pydantic.fleet import FleetMember, RequestPlan
from src.app.models.pydantic.scenario import CrashEvent, PartitionEvent, ScenarioConfig
from src.app.services.scenario_service import (
    ScenarioAssertionFailed,
    adaptive_guidance_config,
    run_scenario,
    run_scenario_adaptive_guidance,
)


def steps(events):
    return [e.step for e in events]


def test_default_variant_notifies_and_reroutes_once(tmp_path):
    events = run_scenario_adaptive_guidance("default", seed=0, out_dir=tmp_path)
    order = steps(events)
    for step in (
        "leader-elected",
        "incident-reported",
        "incident-committed",
        "committed-at-all-peers",
        "notified-by-home-peer",
        "reroute-count",
        "reroute-avoids-incident",
        "cross-company-visibility",
        "trace-digest",
    ):
        assert step in order
    assert order.index("incident-reported") < order.index("committed-at-all-peers") < order.index("reroute-count")

    reroutes = [e for e in events if e.step == "reroute"]
    assert len(reroutes) == 1
    assert reroutes[0].node == "vehicle-1"
    assert reroutes[0].detail["old_route"] == [14, 13, 12, 11, 10]
    reroute = reroutes[0].detail
    assert sorted(reroute["edge"]) == [11, 12]
    assert reroute["new_route"][0] == 14 and reroute["new_route"][-1] == 10

    log_lines = (tmp_path / "adaptive-guidance-events.jsonl").read_text().splitlines()
    assert [json.loads(line)["step"] for line in log_lines] == order
    for index in range(3):
        assert validate_ledger_file(tmp_path / f"ledger-peer-{index}.bin") is None


def test_off_route_incident_causes_no_reroute():
    events = run_scenario_adaptive_guidance("off-route", seed=0)
    assert "reroute" not in steps(events)
    assert "cross-company-visibility" in steps(events)


def test_crashed_receiver_peer_fails_the_notification_step(tmp_path):
    with pytest.raises(ScenarioAssertionFailed) as failure:
        run_scenario_adaptive_guidance("blue-peer-crashed", seed=0, out_dir=tmp_path)
    assert failure.value.step == "receiver-notified"
    lines = (tmp_path / "adaptive-guidance-events.jsonl").read_text().splitlines()
    assert json.loads(lines[-1])["step"] == "assertion-failed"


def test_same_seed_gives_the_same_trace():
    first = run_scenario_adaptive_guidance("default", seed=4)
    second = run_scenario_adaptive_guidance("default", seed=4)
    digest = [e.detail["digest"] for e in first if e.step == "trace-digest"]
    assert digest == [e.detail["digest"] for e in second if e.step == "trace-digest"]
    assert [(e.time_ms, e.step) for e in first] == [(e.time_ms, e.step) for e in second]


def test_builtin_layout():
    config = adaptive_guidance_config("blue-peer-crashed")
    assert config.fleet[1].destination == (0, 2)
    assert config.crash_schedule == [CrashEvent(at_ms=0.0, node="peer-2")]
    assert adaptive_guidance_config("off-route").incidents[0].edge == ((2, 4), (3, 4))


def test_scenario_file_run_with_faults_converges():
    config = ScenarioConfig(
        seed=2,
        fleet=(FleetMember(home_peer=0), FleetMember(home_peer=1)),
        plan=RequestPlan(payload_kib=16, count=3),
        crash_schedule=[
            CrashEvent(at_ms=2_000, node="peer-2"),
            CrashEvent(at_ms=6_000, node="peer-2", action="restart"),
        ],
        partition_schedule=[
            PartitionEvent(at_ms=1_000, groups=[["orderer-0"]]),
            PartitionEvent(at_ms=1_500, heal=True),
        ],
        duration_ms=30_000,
    )
    deployment = run_scenario(config)
    assert all(v.plan_finished for v in deployment.vehicles)
    assert len({p.height for p in deployment.peers}) == 1
    assert len(set(deployment.state_hashes(live_only=False).values())) == 1


def test_scenario_config_rejects_inconsistent_documents():
    with pytest.raises(ValueError):
        ScenarioConfig(peers=2, endorsement_required=3)
    with pytest.raises(ValueError):
        ScenarioConfig(peers=2, fleet=(FleetMember(home_peer=5),))
    with pytest.raises(ValueError):
        PartitionEvent(at_ms=0)
