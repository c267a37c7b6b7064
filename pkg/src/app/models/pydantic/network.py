"""
Pydantic models for the simulated network: addresses, link model and the
edge-server compute cost model.
"""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field

from src.app.core.config.settings import settings


class NodeKind(str, Enum):
    VEHICLE = "vehicle"
    PEER = "peer"
    ORDERER = "orderer"


class NodeAddress(BaseModel):
    """Unique address of a simulated node, rendered as ``<kind>-<index>``."""

    model_config = ConfigDict(frozen=True)

    kind: NodeKind
    index: int = Field(..., ge=0)

    def __str__(self) -> str:
        return f"{self.kind.value}-{self.index}"

    @classmethod
    def parse(cls, text: str) -> "NodeAddress":
        kind, _, index = text.strip().rpartition("-")
        try:
            return cls(kind=NodeKind(kind), index=int(index))
        except ValueError as e:
            raise ValueError(f"Invalid node address: {text!r}") from e


def peer(index: int) -> NodeAddress:
    return NodeAddress(kind=NodeKind.PEER, index=index)


def orderer(index: int) -> NodeAddress:
    return NodeAddress(kind=NodeKind.ORDERER, index=index)


def vehicle(index: int) -> NodeAddress:
    return NodeAddress(kind=NodeKind.VEHICLE, index=index)


class LinkModel(BaseModel):
    """Latency and loss applied to every simulated send."""

    model_config = ConfigDict(frozen=True)

    base_latency_ms: float = Field(default=settings.LINK_BASE_LATENCY_MS, ge=0.0)
    jitter_ms: float = Field(default=settings.LINK_JITTER_MS, ge=0.0)
    loss_rate: float = Field(default=settings.LINK_LOSS_RATE, ge=0.0, le=1.0)


class ClockMode(str, Enum):
    VIRTUAL = "virtual"
    REAL = "real"


class ComputeCostModel(BaseModel):
    """Processing time charged to a peer for each unit of work (ms)."""

    model_config = ConfigDict(frozen=True)

    endorse_base_ms: float = Field(default=settings.ENDORSE_BASE_MS, ge=0.0)
    endorse_per_kib_ms: float = Field(default=settings.ENDORSE_PER_KIB_MS, ge=0.0)
    validate_base_ms: float = Field(default=settings.VALIDATE_BASE_MS, ge=0.0)
    validate_per_kib_ms: float = Field(default=settings.VALIDATE_PER_KIB_MS, ge=0.0)

    def endorse_ms(self, payload_bytes: int) -> float:
        return self.endorse_base_ms + self.endorse_per_kib_ms * payload_bytes / 1024

    def validate_ms(self, payload_bytes: int) -> float:
        return self.validate_base_ms + self.validate_per_kib_ms * payload_bytes / 1024


FREE_COMPUTE = ComputeCostModel(
    endorse_base_ms=0.0, endorse_per_kib_ms=0.0, validate_base_ms=0.0, validate_per_kib_ms=0.0
)
