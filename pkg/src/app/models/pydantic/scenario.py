"""
Scenario configuration: topology, link model, fault schedules and fleet layout.

Scenario files are JSON (or YAML) documents validated into ``ScenarioConfig``.
"""

from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .fleet import FleetMember, GridConfig, IncidentScriptEntry, RequestPlan
from .network import ClockMode, ComputeCostModel, LinkModel
from .ordering import BlockCutPolicy, RaftTiming


class CrashEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    at_ms: float = Field(..., ge=0)
    node: str
    action: Literal["crash", "restart"] = "crash"


class PartitionEvent(BaseModel):
    """Split the network into groups of node addresses, or heal it."""

    model_config = ConfigDict(frozen=True)

    at_ms: float = Field(..., ge=0)
    groups: Optional[List[List[str]]] = None
    heal: bool = False

    @model_validator(mode="after")
    def _groups_or_heal(self) -> "PartitionEvent":
        if self.heal == (self.groups is not None):
            raise ValueError("a partition event needs either groups or heal=true")
        return self


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = Field(default=0, ge=0)
    clock: ClockMode = ClockMode.VIRTUAL
    peers: int = Field(default=3, gt=0)
    orderers: int = Field(default=3, gt=0)
    endorsement_required: int = Field(default=1, gt=0)
    link: LinkModel = Field(default_factory=LinkModel)
    cost: ComputeCostModel = Field(default_factory=ComputeCostModel)
    block_cut: BlockCutPolicy = Field(default_factory=BlockCutPolicy)
    raft: RaftTiming = Field(default_factory=RaftTiming)
    crash_schedule: List[CrashEvent] = Field(default_factory=list)
    partition_schedule: List[PartitionEvent] = Field(default_factory=list)
    fleet: Tuple[FleetMember, ...] = ()
    plan: Optional[RequestPlan] = None
    grid: GridConfig = Field(default_factory=GridConfig)
    incidents: List[IncidentScriptEntry] = Field(default_factory=list)
    duration_ms: float = Field(default=10_000.0, gt=0)

    @model_validator(mode="after")
    def _consistent(self) -> "ScenarioConfig":
        if self.endorsement_required > self.peers:
            raise ValueError("endorsement_required cannot exceed the number of peers")
        for member in self.fleet:
            if member.home_peer >= self.peers:
                raise ValueError(f"home_peer {member.home_peer} does not exist")
        return self
