"""
Read-only information requests: reveal a vehicle's record or list the
environmental reports of a zone. Served by peers without ordering.
"""

import logging
from typing import List, Optional, Tuple

from pydantic import ValidationError

from src.app.contracts.base import ContractContext, ContractRegistry, StateView
from src.app.contracts.keys import incident_prefix, vehicle_key, zone_head_key
from src.app.models.pydantic.common import HASH_SIZE, canonical_json
from src.app.models.pydantic.contracts import (
    ContractCall,
    IncidentReport,
    QueryResult,
    VehicleRecord,
)

logger = logging.getLogger(__name__)

CONTRACT = "query"


def _vehicle_result(ctx: ContractContext, target_hex: str) -> QueryResult:
    try:
        target = bytes.fromhex(target_hex)
    except ValueError:
        target = b""
    record: Optional[VehicleRecord] = None
    if len(target) == HASH_SIZE:
        raw = ctx.get(vehicle_key(target))
        if raw is not None:
            record = VehicleRecord.model_validate_json(raw)
    return QueryResult(kind="vehicle", target=target_hex, vehicle=record)


def _region_result(ctx: ContractContext, zone: str) -> QueryResult:
    ctx.get(zone_head_key(zone))
    rows: List[Tuple[int, str, IncidentReport]] = []
    for key, raw in ctx.scan(incident_prefix(zone)):
        try:
            incident = IncidentReport.model_validate_json(raw)
        except ValidationError:
            logger.warning("Skipping unreadable incident entry %s", key)
            continue
        rows.append((incident.reported_at, key, incident))
    rows.sort(key=lambda row: (row[0], row[1]))
    return QueryResult(kind="region", target=zone, incidents=tuple(r[2] for r in rows))


def register_query_contract(registry: ContractRegistry) -> None:
    """
    Register the read-only query operations with a contract registry.

    Args:
        registry: The registry to register operations with
    """

    @registry.operation(CONTRACT, "vehicle", read_only=True)
    def vehicle(ctx: ContractContext) -> Optional[bytes]:
        return canonical_json(_vehicle_result(ctx, ctx.arg_text(0)))

    @registry.operation(CONTRACT, "region", read_only=True)
    def region(ctx: ContractContext) -> Optional[bytes]:
        return canonical_json(_region_result(ctx, ctx.arg_text(0)))


def query_call(target: bytes | str) -> ContractCall:
    """Vehicle query for a pseudonym (bytes), region query for a zone id (str)."""
    if isinstance(target, bytes):
        return ContractCall(contract=CONTRACT, operation="vehicle", args=(target.hex().encode(),))
    return ContractCall(contract=CONTRACT, operation="region", args=(target.encode("utf-8"),))


def query_info(registry: ContractRegistry, target: bytes | str, state: StateView) -> bytes:
    """Encoded QueryResult; an unknown target yields an empty result, not an error."""
    result = registry.evaluate(query_call(target), state).result
    return result if result is not None else b""


def decode_query_result(raw: bytes) -> QueryResult:
    return QueryResult.model_validate_json(raw)


def query_target(text: str) -> bytes | str:
    """Wire form of a query target: 64 hex chars address a vehicle, anything else a zone."""
    if len(text) == 2 * HASH_SIZE:
        try:
            return bytes.fromhex(text)
        except ValueError:
            pass
    return text
