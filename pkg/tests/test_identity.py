import random

import pytest

from src.app.core.auth.identity import (
    AuthFailure,
    InvalidWindow,
    MembershipDirectory,
    build_identity_bundle,
    ca_issue,
    generate_key_pair,
    pseudonym,
    sign,
    sign_endorsement,
    verify,
    verify_certificate,
    verify_proposal_signature,
)
from src.app.ledger.hashing import proposal_hash
from src.app.models.pydantic.contracts import ContractCall
from src.app.models.pydantic.identity import Certificate, Role

from tests.factories import signed_proposal

CALL = ContractCall(contract="vehicle", operation="update", payload=b"payload")


def test_bundles_are_deterministic_per_seed():
    first = build_identity_bundle(seed=11, peers=2, orderers=1, vehicles=2)
    again = build_identity_bundle(seed=11, peers=2, orderers=1, vehicles=2)
    other = build_identity_bundle(seed=12, peers=2, orderers=1, vehicles=2)
    assert first == again
    assert first.vehicles[0].pseudonym != other.vehicles[0].pseudonym
    assert [r.name for r in first.peers] == ["peer-0", "peer-1"]


def test_certificates_bind_role_and_pseudonym(bundle):
    for record in bundle.vehicles:
        cert = record.certificate
        assert cert.role == Role.VEHICLE
        assert cert.subject == pseudonym(cert.subject_public_key)
        assert verify_certificate(cert, bundle.ca.public_key, now=0)


def test_certificate_window_is_enforced(bundle):
    key = generate_key_pair(random.Random(1))
    cert = ca_issue(bundle.ca, key.public_key, Role.VEHICLE, valid_from=100, valid_to=200)
    assert verify_certificate(cert, bundle.ca.public_key, now=150)
    assert not verify_certificate(cert, bundle.ca.public_key, now=99)
    assert not verify_certificate(cert, bundle.ca.public_key, now=201)
    with pytest.raises(InvalidWindow):
        ca_issue(bundle.ca, key.public_key, Role.VEHICLE, valid_from=200, valid_to=100)


def test_certificate_window_must_be_non_negative(bundle):
    fields = bundle.vehicles[0].certificate.model_dump()
    with pytest.raises(ValueError):
        Certificate.model_validate({**fields, "valid_from": -1})
    with pytest.raises(ValueError):
        Certificate.model_validate({**fields, "valid_to": -5})
    key = generate_key_pair(random.Random(2))
    with pytest.raises(ValueError):
        ca_issue(bundle.ca, key.public_key, Role.VEHICLE, valid_from=-10, valid_to=100)


def test_tampered_certificate_fails(bundle):
    cert = bundle.vehicles[0].certificate
    promoted = cert.model_copy(update={"role": Role.PEER})
    assert not verify_certificate(promoted, bundle.ca.public_key, now=0)


def test_verify_is_total():
    key = generate_key_pair(random.Random(2))
    signature = sign(key.secret_key, b"message")
    assert verify(key.public_key, b"message", signature)
    assert not verify(key.public_key, b"other", signature)
    assert not verify(b"short", b"message", signature)
    assert not verify(key.public_key, b"message", b"\x00" * 3)


def test_proposal_signature_checks(bundle, vehicle_identity):
    proposal = signed_proposal(vehicle_identity, CALL)
    assert verify_proposal_signature(proposal, bundle.ca.public_key)

    corrupted = proposal.model_copy(update={"client_signature": bytes(64)})
    assert not verify_proposal_signature(corrupted, bundle.ca.public_key)

    impersonated = proposal.model_copy(update={"creator": bundle.vehicles[1].pseudonym})
    assert not verify_proposal_signature(impersonated, bundle.ca.public_key)

    peer_signed = signed_proposal(bundle.peers[0], CALL)
    assert not verify_proposal_signature(peer_signed, bundle.ca.public_key)


def test_membership_counts_distinct_valid_endorsers(bundle, membership, vehicle_identity):
    proposal = signed_proposal(vehicle_identity, CALL)
    pid = proposal_hash(proposal)
    rw_hash = b"\x07" * 32
    endorsements = [sign_endorsement(peer, pid, rw_hash) for peer in bundle.peers]
    assert membership.count_valid(endorsements, pid, rw_hash, now=0) == 3
    assert membership.count_valid(endorsements + endorsements, pid, rw_hash, now=0) == 3
    assert membership.count_valid(endorsements, pid, b"\x08" * 32, now=0) == 0

    outsider = sign_endorsement(bundle.orderers[0], pid, rw_hash)
    assert membership.count_valid([outsider], pid, rw_hash, now=0) == 0


def test_membership_rejects_non_peer_certificates(bundle):
    directory = MembershipDirectory(bundle.ca.public_key)
    with pytest.raises(AuthFailure):
        directory.add(bundle.vehicles[0].certificate)
    directory.add(bundle.peers[0].certificate)
    assert len(directory) == 1
    assert directory.get(bundle.peers[0].pseudonym) == bundle.peers[0].certificate
