"""
Vehicle information contract: owners, inspection history, GPS, connected edge
server and insurance reference.
"""

import logging
from typing import Optional

from src.app.contracts.base import (
    ContractContext,
    ContractRegistry,
    PseudonymMismatch,
    StateView,
)
from src.app.contracts.keys import vehicle_key
from src.app.models.pydantic.common import canonical_json
from src.app.models.pydantic.contracts import ContractCall, ReadWriteSet, VehicleRecord

logger = logging.getLogger(__name__)

CONTRACT = "vehicle"


def register_vehicle_contract(registry: ContractRegistry) -> None:
    """
    Register the vehicle information operations with a contract registry.

    Args:
        registry: The registry to register operations with
    """

    @registry.operation(CONTRACT, "update")
    def update(ctx: ContractContext) -> Optional[bytes]:
        """Upsert the caller's VehicleRecord. Blind write: nothing is read."""
        record = ctx.arg_model(0, VehicleRecord)
        if ctx.creator is None or record.pseudonym != ctx.creator:
            raise PseudonymMismatch("callers may only update their own vehicle record")
        ctx.put(vehicle_key(record.pseudonym), canonical_json(record))
        return None


def update_call(record: VehicleRecord, payload: bytes) -> ContractCall:
    return ContractCall(
        contract=CONTRACT, operation="update", args=(canonical_json(record),), payload=payload
    )


def update_vehicle_info(
    registry: ContractRegistry, state: StateView, creator: bytes, record: VehicleRecord, payload: bytes = b"\x00"
) -> ReadWriteSet:
    return registry.execute(update_call(record, payload), state, creator=creator)
