import pytest

from src.app.ledger.encoding import encode_block
from src.app.models.pydantic.contracts import GeoPoint, IncidentKind
from src.app.models.pydantic.fleet import CommunicationMode, FleetMember, RequestPlan
from src.app.models.pydantic.ledger import ValidityFlag
from src.app.models.pydantic.messages import CommitConfirmation
from src.app.models.pydantic.network import FREE_COMPUTE, ComputeCostModel, LinkModel
from src.app.nodes import ClientTimeouts, CommitTimeout, EndorsementTimeout
from src.app.services.metrics_service import MetricsCollector
from src.app.services.topology_service import build_deployment

GPS = GeoPoint(lat=35.002, lon=139.0015)


def deployment(fleet, **overrides):
    options = dict(
        seed=5,
        fleet=fleet,
        cost=FREE_COMPUTE,
        link=LinkModel(base_latency_ms=5, jitter_ms=1, loss_rate=0),
    )
    options.update(overrides)
    built = build_deployment(**options)
    built.network.start()
    built.wait_for_leader(10_000)
    return built


def settle(built, records, budget_ms=20_000):
    built.network.run_until(lambda: all(r.done for r in records), built.network.now + budget_ms)
    height = len(built.leader().blocks)
    built.network.run_until(lambda: all(p.height == height for p in built.live_peers()), built.network.now + 5_000)


def test_single_mode_update_commits_on_every_peer():
    built = deployment([FleetMember(home_peer=0)])
    car = built.vehicles[0]
    collector = MetricsCollector()
    car.add_listener(collector)
    car.load_plan(RequestPlan(payload_kib=16, count=1))
    record = car.requests[1]
    settle(built, [record])

    assert record.state == "committed"
    assert record.targets == (built.peers[0].address,)
    assert collector.committed_count == 1
    assert len(set(built.state_hashes().values())) == 1
    assert all(p.world.value(f"vehicle/{car.pseudonym.hex()}") is not None for p in built.peers)


def test_notify_span_starts_at_the_proposal_and_covers_endorsement():
    cost = ComputeCostModel(endorse_base_ms=400, endorse_per_kib_ms=0, validate_base_ms=0, validate_per_kib_ms=0)
    link = LinkModel(base_latency_ms=5, jitter_ms=0, loss_rate=0)
    built = deployment([FleetMember(zone="green", home_peer=1)], cost=cost, link=link)
    reporter = built.vehicles[0]
    collector = MetricsCollector()
    reporter.add_listener(collector)
    record = reporter.report_incident(IncidentKind.ACCIDENT, GPS, zone="green")
    settle(built, [record])
    built.network.run_until(lambda: record.txid in reporter.inbox, built.network.now + 5_000)

    assert record.state == "committed"
    assert collector.submitted[record.txid] == record.started_at
    assert collector.first_submission_ms == record.started_at
    assert record.submitted_at - record.started_at >= 400
    (span,) = collector.notify_spans_s(str(reporter.address))
    assert span >= record.latency_ms / 1000 - 1e-9
    assert span > (record.submitted_at - record.started_at) / 1000


def test_multiple_mode_collects_matching_endorsements_and_withdraws_standby():
    built = deployment([FleetMember(home_peer=0)], endorsement_required=2)
    car = built.vehicles[0]
    record = car.report_incident(IncidentKind.CONGESTION, GPS, mode=CommunicationMode.MULTIPLE, zone="green")
    settle(built, [record])

    assert record.state == "committed"
    assert len(record.targets) == 2 and len(record.standby) == 1
    tx = record.envelope.transaction
    assert len(tx.endorsements) == 2
    assert built.membership.count_valid(tx.endorsements, record.proposal_id, tx.endorsements[0].rw_set_hash, 0) == 2


def test_report_notifies_vehicles_at_every_zone_peer():
    fleet = [FleetMember(zone="green", home_peer=1), FleetMember(zone="blue", home_peer=2)]
    built = deployment(fleet)
    reporter, listener = built.vehicles
    record = reporter.report_incident(IncidentKind.ACCIDENT, GPS, zone="green")
    settle(built, [record])
    built.network.run_until(lambda: record.txid in listener.inbox, built.network.now + 5_000)

    note = listener.inbox[record.txid]
    assert note.peer == built.peers[2].address
    assert note.kind == IncidentKind.ACCIDENT
    assert built.peers[2].notifications_sent >= 1


def test_concurrent_reports_in_one_zone_retry_after_conflict():
    built = deployment([FleetMember(home_peer=0), FleetMember(home_peer=0)])
    records = [v.report_incident(IncidentKind.WEATHER, GPS, zone="red") for v in built.vehicles]
    settle(built, records)

    assert [r.state for r in records] == ["committed", "committed"]
    assert sorted(r.attempts for r in records) == [1, 2]
    flags = [flag for block in built.peers[0].chain for flag in block.validity]
    assert flags.count(ValidityFlag.CONFLICT_INVALID) == 1


def test_plan_runs_to_completion_with_a_window():
    built = deployment([FleetMember(home_peer=1)])
    car = built.vehicles[0]
    car.load_plan(RequestPlan(payload_kib=16, count=4, window=2))
    assert car.in_flight == 2
    built.network.run_until(lambda: car.plan_finished, built.network.now + 60_000)
    assert [r.state for r in car.requests.values()] == ["committed"] * 4


def test_endorsement_times_out_when_the_home_peer_is_down():
    timeouts = ClientTimeouts(endorsement_ms=1_000)
    built = deployment([FleetMember(home_peer=2)], timeouts=timeouts)
    built.network.crash(built.peers[2].address)
    car = built.vehicles[0]
    car.load_plan(RequestPlan(payload_kib=16, count=1))
    record = car.requests[1]
    built.network.run_until(lambda: record.done, built.network.now + 5_000)
    assert record.state == "failed"
    assert isinstance(record.error, EndorsementTimeout)


def drop_first_confirmation(network):
    send = network.send
    dropped = []

    def lossy_send(src, dst, message):
        if isinstance(message, CommitConfirmation) and not dropped:
            dropped.append(message)
            return
        send(src, dst, message)

    network.send = lossy_send
    return dropped


def test_lost_confirmation_is_recovered_by_resubmitting():
    built = deployment([FleetMember(home_peer=0)], timeouts=ClientTimeouts(commit_ms=1_000))
    car = built.vehicles[0]
    dropped = drop_first_confirmation(built.network)
    car.load_plan(RequestPlan(payload_kib=16, count=1))
    record = car.requests[1]
    settle(built, [record])

    assert len(dropped) == 1 and dropped[0].flag == ValidityFlag.VALID
    assert record.state == "committed"
    assert not isinstance(record.error, CommitTimeout)
    assert record.submissions == 2
    assert record.block_number == dropped[0].block_number
    flags = [flag for block in built.peers[0].chain for flag in block.validity]
    assert flags.count(ValidityFlag.VALID) == 1
    assert flags.count(ValidityFlag.DUPLICATE_INVALID) == 1


def test_queries_are_answered_from_the_home_peer():
    fleet = [FleetMember(zone="green", home_peer=1), FleetMember(zone="blue", home_peer=2)]
    built = deployment(fleet)
    reporter, asker = built.vehicles
    settle(built, [reporter.report_incident(IncidentKind.ROAD_CONDITION, GPS, zone="green")])
    request_id = asker.send_query("green")
    built.network.run_until(lambda: request_id in asker.query_results, built.network.now + 1_000)
    incidents = asker.query_results[request_id].incidents
    assert [i.reporter for i in incidents] == [reporter.pseudonym]


def test_deployment_resolves_fault_targets():
    built = deployment([])
    leader = built.leader()
    assert built.resolve("orderer-leader") == leader.address
    follower = built.resolve("orderer-follower")
    assert follower != leader.address
    assert built.apply("peer-1", "crash") == built.peers[1].address
    assert [str(p.address) for p in built.live_peers()] == ["peer-0", "peer-2"]
    built.apply("peer-1", "restart")
    assert len(built.live_peers()) == 3
    with pytest.raises(ValueError):
        built.resolve("peer-x")


def test_committed_transactions_carry_pseudonyms_only():
    fleet = [FleetMember(company="red", zone="red", home_peer=0), FleetMember(company="blue", zone="blue", home_peer=2)]
    built = deployment(fleet)
    records = []
    for car in built.vehicles:
        car.load_plan(RequestPlan(payload_kib=16, count=2))
        records.extend(car.requests.values())
    records.append(built.vehicles[1].report_incident(IncidentKind.ACCIDENT, GPS, zone="blue"))
    built.network.run_until(lambda: all(v.plan_finished for v in built.vehicles), built.network.now + 30_000)
    settle(built, records)
    assert all(r.state == "committed" for r in records)

    ledger = b"".join(encode_block(block) for block in built.peers[0].chain)
    for car, identity in zip(built.vehicles, built.identities.vehicles):
        assert car.pseudonym in ledger
        assert identity.name.encode() not in ledger
        assert bytes(identity.key_pair.secret_key) not in ledger
        assert f"{car.company}-{car.index}".encode() not in ledger
