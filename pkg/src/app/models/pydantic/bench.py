"""
Pydantic models for benchmark configuration and results.
"""

from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .fleet import PAYLOAD_SIZES_KIB, CommunicationMode
from .network import ClockMode, ComputeCostModel, LinkModel
from .ordering import BlockCutPolicy


class BenchmarkConfig(BaseModel):
    """One benchmark grid: every (mode, payload size) pair is a cell."""

    model_config = ConfigDict(frozen=True)

    payload_sizes: Tuple[int, ...] = PAYLOAD_SIZES_KIB
    requests_per_vehicle: int = Field(default=100, gt=0)
    vehicles: int = Field(default=3, gt=0)
    peers: int = Field(default=3, gt=0)
    orderers: int = Field(default=3, gt=0)
    modes: Tuple[CommunicationMode, ...] = (
        CommunicationMode.SINGLE,
        CommunicationMode.MULTIPLE,
    )
    clock: ClockMode = ClockMode.VIRTUAL
    seed: int = Field(default=0, ge=0)
    endorsement_required: int = Field(default=1, gt=0)
    window: int = Field(default=1, gt=0)
    link: LinkModel = Field(default_factory=LinkModel)
    cost: ComputeCostModel = Field(default_factory=ComputeCostModel)
    block_cut: BlockCutPolicy = Field(default_factory=BlockCutPolicy)
    max_failure_rate: float = Field(default=0.01, ge=0.0, le=1.0)

    @field_validator("payload_sizes")
    @classmethod
    def _known_sizes(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if not value:
            raise ValueError("payload_sizes must not be empty")
        for size in value:
            if size not in PAYLOAD_SIZES_KIB:
                raise ValueError(f"payload size {size} not in {PAYLOAD_SIZES_KIB}")
        return value

    @model_validator(mode="after")
    def _policy_fits(self) -> "BenchmarkConfig":
        if self.endorsement_required > self.peers:
            raise ValueError("endorsement_required cannot exceed the number of peers")
        if not self.modes:
            raise ValueError("at least one mode is required")
        return self


class MetricsRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: CommunicationMode
    payload_kib: int
    tx_per_s: float
    kib_per_s: float
    s_per_tx: float
    failures: int = Field(..., ge=0)
    wall_time: float = Field(default=0.0, ge=0.0, description="Wall-clock seconds for the cell")
    committed: int = Field(default=0, ge=0)


class FaultEvent(BaseModel):
    """Fault injected once committed progress reaches ``at_progress``."""

    model_config = ConfigDict(frozen=True)

    at_progress: float = Field(default=0.5, ge=0.0, le=1.0)
    target: str = Field(
        ..., description="orderer-leader, orderer-follower or an explicit address such as peer-2"
    )
    action: Literal["crash", "restart"] = "crash"
    restart_after_ms: Optional[float] = Field(default=None, gt=0)


DEFAULT_FAULTS = (
    FaultEvent(at_progress=0.5, target="orderer-leader"),
    FaultEvent(at_progress=0.5, target="peer-2"),
)


class FaultReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    payload_kib: int
    mode: CommunicationMode
    submitted: int
    committed: int
    failures: int
    lost_transactions: int
    crashed: List[str]
    state_hashes: Dict[str, str]
    converged: bool
    stalled: bool
    tx_per_s_before: float
    tx_per_s_after: float
    throughput_dip: float
    fault_time_ms: Optional[float] = None
