"""
Pydantic models for smart-contract calls and the situation-awareness records they carry.
"""

from enum import Enum
from typing import Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from .common import Hash, HexBytes, Pseudonym
from .ledger import KVRead, KVWrite


class ContractCall(BaseModel):
    """A contract invocation: names resolve in the contract registry."""

    model_config = ConfigDict(frozen=True)

    contract: str
    operation: str
    args: Tuple[HexBytes, ...] = ()
    payload: HexBytes = b""


class GeoPoint(BaseModel):
    """WGS84 position in degrees."""

    model_config = ConfigDict(frozen=True)

    lat: float = Field(..., ge=-90.0, le=90.0)
    lon: float = Field(..., ge=-180.0, le=180.0)


class VehicleRecord(BaseModel):
    """Vehicle information kept on the ledger under ``vehicle/<pseudonym>``."""

    model_config = ConfigDict(frozen=True)

    pseudonym: Pseudonym
    owners: Tuple[Pseudonym, ...] = Field(..., min_length=1)
    inspection_history: Tuple[int, ...] = ()
    gps: GeoPoint
    connected_edge: str
    insurance_ref: str = ""


class IncidentKind(str, Enum):
    ACCIDENT = "accident"
    CONGESTION = "congestion"
    ROAD_CONDITION = "road-condition"
    WEATHER = "weather"


class IncidentReport(BaseModel):
    """Situation report; the image itself travels as the transaction payload."""

    model_config = ConfigDict(frozen=True)

    reporter: Pseudonym
    gps: GeoPoint
    kind: IncidentKind
    image_hash: Hash
    zone: str
    reported_at: int = Field(..., ge=0)


class ReadWriteSet(BaseModel):
    """Simulation output of a contract execution, sorted by key."""

    model_config = ConfigDict(frozen=True)

    reads: Tuple[KVRead, ...] = ()
    writes: Tuple[KVWrite, ...] = ()


class Priority(str, Enum):
    HIGH = "high"
    LOW = "low"


class QueryResult(BaseModel):
    """Answer to a read-only information request."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["vehicle", "region"]
    target: str
    vehicle: Optional[VehicleRecord] = None
    incidents: Tuple[IncidentReport, ...] = ()
