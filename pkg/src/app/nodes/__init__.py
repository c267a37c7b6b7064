"""
Simulated participants: endorsing/committing peers, Raft orderers and vehicles.
"""

from .block_cutter import BatchProjection, BlockCutter, cut_block
from .orderer_node import NoLeader, OrdererNode
from .peer_node import EndorseRefused, PeerNode
from .raft import RaftCore, RaftOutput, RaftPersistentState, TimerFired, raft_step
from .vehicle_node import (
    ClientTimeouts,
    CommitTimeout,
    EndorsementRejected,
    EndorsementTimeout,
    InvalidatedTransaction,
    RequestFailed,
    RequestRecord,
    SubmissionRejected,
    VehicleEvent,
    VehicleNode,
)

__all__ = [
    "BatchProjection",
    "BlockCutter",
    "ClientTimeouts",
    "CommitTimeout",
    "EndorseRefused",
    "EndorsementRejected",
    "EndorsementTimeout",
    "InvalidatedTransaction",
    "NoLeader",
    "OrdererNode",
    "PeerNode",
    "RaftCore",
    "RaftOutput",
    "RaftPersistentState",
    "RequestFailed",
    "RequestRecord",
    "SubmissionRejected",
    "TimerFired",
    "VehicleEvent",
    "VehicleNode",
    "cut_block",
    "raft_step",
]
