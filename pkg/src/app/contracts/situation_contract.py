"""
Situation-awareness contract: incident and environmental reports.

The image travels as the transaction payload; state keeps only its hash. Each
report reads and advances the zone head, so concurrent reports in one zone
contend at commit time.
"""

import hashlib
import logging
from typing import Optional

from src.app.contracts.base import (
    ContractContext,
    ContractRegistry,
    ContractRuntimeError,
    ImageHashMismatch,
    PseudonymMismatch,
    StateView,
)
from src.app.contracts.keys import incident_key, valid_zone, zone_head_key
from src.app.models.pydantic.common import canonical_json
from src.app.models.pydantic.contracts import ContractCall, IncidentReport, ReadWriteSet

logger = logging.getLogger(__name__)

CONTRACT = "situation"


def register_situation_contract(registry: ContractRegistry) -> None:
    """
    Register the incident reporting operation with a contract registry.

    Args:
        registry: The registry to register operations with
    """

    @registry.operation(CONTRACT, "report")
    def report(ctx: ContractContext) -> Optional[bytes]:
        incident = ctx.arg_model(0, IncidentReport)
        if ctx.creator is None or incident.reporter != ctx.creator:
            raise PseudonymMismatch("reporter must be the transaction creator")
        if not valid_zone(incident.zone):
            raise ContractRuntimeError(f"invalid zone id {incident.zone!r}")
        if hashlib.sha256(ctx.call.payload).digest() != incident.image_hash:
            raise ImageHashMismatch("image_hash does not match the payload")
        if ctx.proposal_id is None:
            raise ContractRuntimeError("report requires a proposal id")

        ctx.get(zone_head_key(incident.zone))
        ctx.put(incident_key(incident.zone, ctx.proposal_id), canonical_json(incident))
        ctx.put(zone_head_key(incident.zone), ctx.proposal_id.hex().encode("ascii"))
        return None


def report_call(incident: IncidentReport, image: bytes) -> ContractCall:
    return ContractCall(
        contract=CONTRACT, operation="report", args=(canonical_json(incident),), payload=image
    )


def report_incident(
    registry: ContractRegistry,
    state: StateView,
    creator: bytes,
    proposal_id: bytes,
    incident: IncidentReport,
    image: bytes,
) -> ReadWriteSet:
    return registry.execute(
        report_call(incident, image), state, creator=creator, proposal_id=proposal_id
    )
