import pytest

from src.app.contracts import (
    ContractRuntimeError,
    ImageHashMismatch,
    PseudonymMismatch,
    UnknownContract,
    build_registry,
    classify_priority,
    contract_registry,
)
from src.app.contracts.keys import incident_key, vehicle_key, zone_head_key
from src.app.contracts.query_contract import decode_query_result, query_info
from src.app.contracts.situation_contract import report_call, report_incident
from src.app.contracts.vehicle_contract import update_call, update_vehicle_info
from src.app.ledger.state import WorldState
from src.app.models.pydantic.common import Version, canonical_json
from src.app.models.pydantic.contracts import ContractCall, IncidentKind, Priority

from tests.factories import incident, vehicle_record

PID = b"\xab" * 32


def commit(state, rw_set, version):
    return state.with_writes((w.key, w.value, version) for w in rw_set.writes)


def test_vehicle_update_is_a_blind_write(vehicle_identity):
    record = vehicle_record(vehicle_identity)
    rw_set = update_vehicle_info(contract_registry, WorldState(), vehicle_identity.pseudonym, record)
    assert rw_set.reads == ()
    assert [(w.key, w.value) for w in rw_set.writes] == [(vehicle_key(record.pseudonym), canonical_json(record))]


def test_vehicle_update_rejects_other_pseudonyms(bundle, vehicle_identity):
    record = vehicle_record(bundle.vehicles[1])
    with pytest.raises(PseudonymMismatch):
        update_vehicle_info(contract_registry, WorldState(), vehicle_identity.pseudonym, record)


def test_report_reads_zone_head_and_writes_incident(vehicle_identity):
    image = b"camera-frame"
    report = incident(vehicle_identity, image, zone="green")
    rw_set = report_incident(contract_registry, WorldState(), vehicle_identity.pseudonym, PID, report, image)
    assert [(r.key, r.version) for r in rw_set.reads] == [(zone_head_key("green"), None)]
    keys = [w.key for w in rw_set.writes]
    assert keys == sorted([incident_key("green", PID), zone_head_key("green")])

    state = commit(WorldState(), rw_set, Version(0, 0))
    again = report_incident(contract_registry, state, vehicle_identity.pseudonym, b"\xcd" * 32, report, image)
    assert again.reads[0].version == Version(0, 0)


def test_report_preconditions(bundle, vehicle_identity):
    image = b"frame"
    report = incident(vehicle_identity, image)
    with pytest.raises(ImageHashMismatch):
        report_incident(contract_registry, WorldState(), vehicle_identity.pseudonym, PID, report, b"other")
    with pytest.raises(PseudonymMismatch):
        report_incident(contract_registry, WorldState(), bundle.vehicles[1].pseudonym, PID, report, image)
    bad_zone = report.model_copy(update={"zone": "a/b"})
    with pytest.raises(ContractRuntimeError):
        report_incident(contract_registry, WorldState(), vehicle_identity.pseudonym, PID, bad_zone, image)


def test_malformed_arguments_and_unknown_operations(vehicle_identity):
    with pytest.raises(ContractRuntimeError):
        contract_registry.execute(
            ContractCall(contract="vehicle", operation="update", args=(b"{not json",)),
            WorldState(),
            creator=vehicle_identity.pseudonym,
        )
    with pytest.raises(UnknownContract):
        contract_registry.execute(ContractCall(contract="vehicle", operation="delete"), WorldState())


def test_registry_refuses_duplicate_registration():
    registry = build_registry()
    assert "situation.report" in registry.names()
    with pytest.raises(ValueError):
        registry.operation("vehicle", "update")(lambda ctx: None)


def test_region_query_lists_reports_by_time(vehicle_identity):
    state = WorldState()
    for number, (pid, reported_at) in enumerate([(b"\x02" * 32, 50), (b"\x01" * 32, 10)]):
        image = f"img-{number}".encode()
        report = incident(vehicle_identity, image, zone="blue", reported_at=reported_at)
        rw_set = report_incident(contract_registry, state, vehicle_identity.pseudonym, pid, report, image)
        state = commit(state, rw_set, Version(number, 0))

    result = decode_query_result(query_info(contract_registry, "blue", state))
    assert result.kind == "region"
    assert [i.reported_at for i in result.incidents] == [10, 50]
    assert decode_query_result(query_info(contract_registry, "red", state)).incidents == ()


def test_vehicle_query(vehicle_identity, bundle):
    record = vehicle_record(vehicle_identity)
    rw_set = update_vehicle_info(contract_registry, WorldState(), vehicle_identity.pseudonym, record)
    state = commit(WorldState(), rw_set, Version(0, 0))
    found = decode_query_result(query_info(contract_registry, vehicle_identity.pseudonym, state))
    assert found.vehicle == record
    missing = decode_query_result(query_info(contract_registry, bundle.vehicles[2].pseudonym, state))
    assert missing.vehicle is None


def test_priority_classification(vehicle_identity):
    image = b"img"
    for kind in IncidentKind:
        call = report_call(incident(vehicle_identity, image, kind=kind), image)
        assert classify_priority(call) == Priority.HIGH
    assert classify_priority(update_call(vehicle_record(vehicle_identity), b"x")) == Priority.LOW
    assert classify_priority(ContractCall(contract="situation", operation="report", args=(b"junk",))) == Priority.LOW
