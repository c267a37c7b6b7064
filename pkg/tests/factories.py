"""
Builders for signed proposals, contract records and endorsed transactions.
"""

import hashlib
from typing import Optional, Sequence

from src.app.contracts import contract_registry
from src.app.contracts.situation_contract import report_call
from src.app.contracts.vehicle_contract import update_call
from src.app.core.auth.identity import sign_endorsement, sign_proposal
from src.app.ledger.hashing import assemble_transaction, proposal_hash, rw_set_hash
from src.app.ledger.state import WorldState
from src.app.models.pydantic.contracts import (
    ContractCall,
    GeoPoint,
    IncidentKind,
    IncidentReport,
    VehicleRecord,
)
from src.app.models.pydantic.identity import IdentityRecord
from src.app.models.pydantic.ledger import KVRead, KVWrite, SignedProposal, Transaction


def signed_proposal(
    identity: IdentityRecord,
    call: ContractCall,
    nonce: int = 1,
    created_at: int = 0,
) -> SignedProposal:
    proposal = SignedProposal(
        creator=identity.pseudonym,
        creator_certificate=identity.certificate,
        contract=call.contract,
        operation=call.operation,
        args=call.args,
        payload=call.payload or b"\x00",
        nonce=nonce,
        created_at=created_at,
    )
    return sign_proposal(identity, proposal)


def vehicle_record(identity: IdentityRecord, edge: str = "peer-0") -> VehicleRecord:
    return VehicleRecord(
        pseudonym=identity.pseudonym,
        owners=(identity.pseudonym,),
        gps=GeoPoint(lat=35.0, lon=139.0),
        connected_edge=edge,
    )


def incident(
    identity: IdentityRecord,
    image: bytes,
    zone: str = "green",
    kind: IncidentKind = IncidentKind.ACCIDENT,
    reported_at: int = 0,
) -> IncidentReport:
    return IncidentReport(
        reporter=identity.pseudonym,
        gps=GeoPoint(lat=35.002, lon=139.0015),
        kind=kind,
        image_hash=hashlib.sha256(image).digest(),
        zone=zone,
        reported_at=reported_at,
    )


def endorsed_transaction(
    identity: IdentityRecord,
    call: ContractCall,
    endorsers: Sequence[IdentityRecord],
    state: Optional[WorldState] = None,
    nonce: int = 1,
) -> Transaction:
    """Execute ``call`` against ``state`` and have every endorser sign the result."""
    proposal = signed_proposal(identity, call, nonce=nonce)
    pid = proposal_hash(proposal)
    rw_set = contract_registry.execute(call, state or WorldState(), creator=identity.pseudonym, proposal_id=pid)
    rw_hash = rw_set_hash(rw_set.reads, rw_set.writes)
    endorsements = [sign_endorsement(peer, pid, rw_hash) for peer in endorsers]
    return assemble_transaction(proposal, rw_set.reads, rw_set.writes, endorsements)


def raw_transaction(
    identity: IdentityRecord,
    endorsers: Sequence[IdentityRecord],
    reads: Sequence[KVRead] = (),
    writes: Sequence[KVWrite] = (),
    payload: bytes = b"\x00",
    nonce: int = 1,
) -> Transaction:
    """Transaction with a hand-written rw-set, endorsed as if a contract produced it."""
    call = ContractCall(contract="vehicle", operation="update", payload=payload)
    proposal = signed_proposal(identity, call, nonce=nonce)
    pid = proposal_hash(proposal)
    rw_hash = rw_set_hash(reads, writes)
    endorsements = [sign_endorsement(peer, pid, rw_hash) for peer in endorsers]
    return assemble_transaction(proposal, reads, writes, endorsements)


def update_transaction(identity: IdentityRecord, endorsers: Sequence[IdentityRecord], nonce: int = 1) -> Transaction:
    return endorsed_transaction(identity, update_call(vehicle_record(identity), b"x" * 64), endorsers, nonce=nonce)


def report_transaction(
    identity: IdentityRecord,
    endorsers: Sequence[IdentityRecord],
    zone: str = "green",
    state: Optional[WorldState] = None,
    nonce: int = 1,
) -> Transaction:
    image = f"image-{nonce}".encode()
    return endorsed_transaction(identity, report_call(incident(identity, image, zone), image), endorsers, state, nonce)
