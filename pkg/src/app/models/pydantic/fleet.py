"""
Pydantic models for the virtual fleet: request plans, road grids, fleet
composition and the event records produced by scenarios.
"""

from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .contracts import IncidentKind

PAYLOAD_SIZES_KIB = (16, 32, 64, 100)
DEFAULT_ZONES = ("red", "green", "blue")


class CommunicationMode(str, Enum):
    """Unicast to the home peer, or multicast to every peer."""

    SINGLE = "single"
    MULTIPLE = "multiple"


class RequestPlan(BaseModel):
    """What each sending vehicle submits during a run."""

    model_config = ConfigDict(frozen=True)

    payload_kib: int = 16
    count: int = Field(default=100, gt=0)
    mode: CommunicationMode = CommunicationMode.SINGLE
    contract_mix: Dict[str, float] = Field(
        default_factory=lambda: {"update": 1.0, "report": 0.0},
        description="Fractions of vehicle.update and situation.report calls",
    )
    window: int = Field(default=1, gt=0, description="Maximum in-flight requests per vehicle")

    @field_validator("payload_kib")
    @classmethod
    def _known_size(cls, value: int) -> int:
        if value not in PAYLOAD_SIZES_KIB:
            raise ValueError(f"payload_kib must be one of {PAYLOAD_SIZES_KIB}")
        return value

    @field_validator("contract_mix")
    @classmethod
    def _mix_sums_to_one(cls, value: Dict[str, float]) -> Dict[str, float]:
        unknown = set(value) - {"update", "report"}
        if unknown:
            raise ValueError(f"Unknown contract_mix entries: {sorted(unknown)}")
        if any(fraction < 0 for fraction in value.values()):
            raise ValueError("contract_mix fractions must be non-negative")
        if abs(sum(value.values()) - 1.0) > 1e-9:
            raise ValueError("contract_mix fractions must sum to 1")
        return value


class GridConfig(BaseModel):
    """Generator parameters for a grid road map tiled into vertical zone bands."""

    model_config = ConfigDict(frozen=True)

    width: int = Field(default=5, ge=1)
    height: int = Field(default=5, ge=1)
    zones: Tuple[str, ...] = DEFAULT_ZONES
    origin_lat: float = 35.0
    origin_lon: float = 139.0
    spacing_deg: float = Field(default=0.001, gt=0)
    base_weight: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _enough_nodes(self) -> "GridConfig":
        if not self.zones:
            raise ValueError("at least one zone is required")
        if self.width * self.height < 2:
            raise ValueError("grid needs at least two intersections")
        return self


class FleetMember(BaseModel):
    model_config = ConfigDict(frozen=True)

    company: str = "red"
    zone: str = "red"
    home_peer: int = Field(default=0, ge=0)
    position: Optional[Tuple[int, int]] = None
    destination: Optional[Tuple[int, int]] = None


class IncidentScriptEntry(BaseModel):
    """A report a given vehicle submits at a given time."""

    model_config = ConfigDict(frozen=True)

    at_ms: float = Field(..., ge=0)
    vehicle: int = Field(..., ge=0)
    kind: IncidentKind = IncidentKind.ACCIDENT
    edge: Tuple[Tuple[int, int], Tuple[int, int]]
    payload_kib: int = Field(default=16, gt=0)


class RerouteEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    time_ms: float
    vehicle: str
    txid: str
    edge: Tuple[int, int]
    old_route: List[int]
    new_route: List[int]


class ScenarioEvent(BaseModel):
    """One line of a scenario's JSON-lines event log."""

    model_config = ConfigDict(frozen=True)

    time_ms: float
    step: str
    node: str
    detail: Dict[str, Any] = Field(default_factory=dict)
