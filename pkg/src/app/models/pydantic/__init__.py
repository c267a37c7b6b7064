"""
Pydantic models for the edgechain simulator.

This module contains the data models used throughout the application,
organized by domain (identity, ledger, contracts, ordering, network, fleet, bench).
"""

from .common import HASH_SIZE, ZERO_HASH, Hash, HexBytes, Pseudonym, TransactionId, Version
from .identity import Certificate, IdentityBundle, IdentityRecord, KeyPair, Role
from .ledger import (
    Block,
    BlockHeader,
    Endorsement,
    KVRead,
    KVWrite,
    SignedProposal,
    Transaction,
    ValidityFlag,
)
from .contracts import (
    ContractCall,
    GeoPoint,
    IncidentKind,
    IncidentReport,
    Priority,
    QueryResult,
    ReadWriteSet,
    VehicleRecord,
)
from .network import ClockMode, ComputeCostModel, LinkModel, NodeAddress, NodeKind
from .ordering import BlockCutPolicy, CutMarker, Envelope, LogEntry, RaftRole, RaftTiming
from .fleet import CommunicationMode, FleetMember, GridConfig, RequestPlan
from .bench import BenchmarkConfig, FaultEvent, FaultReport, MetricsRow
from .scenario import CrashEvent, PartitionEvent, ScenarioConfig

__all__ = [
    # Shared types
    "HASH_SIZE",
    "ZERO_HASH",
    "Hash",
    "HexBytes",
    "Pseudonym",
    "TransactionId",
    "Version",
    # Identity models
    "Certificate",
    "IdentityBundle",
    "IdentityRecord",
    "KeyPair",
    "Role",
    # Ledger models
    "Block",
    "BlockHeader",
    "Endorsement",
    "KVRead",
    "KVWrite",
    "SignedProposal",
    "Transaction",
    "ValidityFlag",
    # Contract models
    "ContractCall",
    "GeoPoint",
    "IncidentKind",
    "IncidentReport",
    "Priority",
    "QueryResult",
    "ReadWriteSet",
    "VehicleRecord",
    # Network and ordering models
    "ClockMode",
    "ComputeCostModel",
    "LinkModel",
    "NodeAddress",
    "NodeKind",
    "BlockCutPolicy",
    "CutMarker",
    "Envelope",
    "LogEntry",
    "RaftRole",
    "RaftTiming",
    # Fleet, bench and scenario models
    "CommunicationMode",
    "FleetMember",
    "GridConfig",
    "RequestPlan",
    "BenchmarkConfig",
    "FaultEvent",
    "FaultReport",
    "MetricsRow",
    "CrashEvent",
    "PartitionEvent",
    "ScenarioConfig",
]
