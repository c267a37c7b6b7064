"""
Topology service for assembling a simulated deployment.

A deployment is one ``Network`` holding the peers, the Raft orderers and the
vehicles, all keyed from one deterministic identity bundle.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from src.app.core.auth.identity import MembershipDirectory, build_identity_bundle
from src.app.models.pydantic.fleet import DEFAULT_ZONES, FleetMember
from src.app.models.pydantic.identity import IdentityBundle
from src.app.models.pydantic.network import (
    ClockMode,
    ComputeCostModel,
    LinkModel,
    NodeAddress,
    orderer,
    peer,
)
from src.app.models.pydantic.ordering import BlockCutPolicy, RaftRole, RaftTiming
from src.app.models.pydantic.scenario import ScenarioConfig
from src.app.network.simulator import Network
from src.app.nodes.orderer_node import OrdererNode
from src.app.nodes.peer_node import PeerNode
from src.app.nodes.vehicle_node import ClientTimeouts, VehicleNode

logger = logging.getLogger(__name__)


@dataclass
class Deployment:
    network: Network
    identities: IdentityBundle
    membership: MembershipDirectory
    peers: List[PeerNode] = field(default_factory=list)
    orderers: List[OrdererNode] = field(default_factory=list)
    vehicles: List[VehicleNode] = field(default_factory=list)

    @property
    def peer_addresses(self) -> List[NodeAddress]:
        return [p.address for p in self.peers]

    def live_peers(self) -> List[PeerNode]:
        return [p for p in self.peers if not p.crashed]

    def leader(self) -> Optional[OrdererNode]:
        """The live leader with the highest term, if any."""
        leaders = [o for o in self.orderers if not o.crashed and o.role == RaftRole.LEADER]
        return max(leaders, key=lambda o: o.raft.current_term, default=None)

    def wait_for_leader(self, deadline_ms: float) -> OrdererNode:
        self.network.run_until(lambda: self.leader() is not None, deadline_ms)
        return self.leader()

    def resolve(self, target: str) -> NodeAddress:
        """Address for ``peer-1`` style names plus ``orderer-leader`` and ``orderer-follower``."""
        if target == "orderer-leader":
            leader = self.leader()
            if leader is None:
                raise ValueError("no orderer leader to target")
            return leader.address
        if target == "orderer-follower":
            leader = self.leader()
            for node in self.orderers:
                if not node.crashed and node is not leader:
                    return node.address
            raise ValueError("no live orderer follower to target")
        address = NodeAddress.parse(target)
        self.network.node(address)
        return address

    def apply(self, target: str, action: str) -> NodeAddress:
        address = self.resolve(target)
        if action == "crash":
            self.network.crash(address)
        else:
            self.network.restart(address)
        return address

    def state_hashes(self, live_only: bool = True) -> Dict[str, str]:
        peers = self.live_peers() if live_only else self.peers
        return {str(p.address): p.state_hash().hex() for p in peers}


def build_deployment(
    seed: int = 0,
    peers: int = 3,
    orderers: int = 3,
    fleet: Sequence[FleetMember] = (),
    zones: Sequence[str] = DEFAULT_ZONES,
    link: Optional[LinkModel] = None,
    cost: Optional[ComputeCostModel] = None,
    block_cut: Optional[BlockCutPolicy] = None,
    raft: Optional[RaftTiming] = None,
    clock: ClockMode = ClockMode.VIRTUAL,
    endorsement_required: int = 1,
    timeouts: Optional[ClientTimeouts] = None,
) -> Deployment:
    """Create a network with ``peers`` zone peers, ``orderers`` Raft nodes and one vehicle per fleet member."""
    identities = build_identity_bundle(seed, peers=peers, orderers=orderers, vehicles=len(fleet))
    membership = MembershipDirectory(identities.ca.public_key, [r.certificate for r in identities.peers])
    network = Network(seed=seed, link=link, clock=clock)
    deployment = Deployment(network=network, identities=identities, membership=membership)

    peer_addresses = [peer(i) for i in range(peers)]
    orderer_addresses = [orderer(i) for i in range(orderers)]
    for index in range(peers):
        node = PeerNode(
            index,
            identities.peers[index],
            membership,
            zone=zones[index % len(zones)],
            endorsement_required=endorsement_required,
            cost=cost or ComputeCostModel(),
        )
        deployment.peers.append(network.add_node(node))
    for index in range(orderers):
        node = OrdererNode(
            index,
            orderers,
            peer_addresses,
            policy=block_cut,
            timing=raft,
            seed=seed,
        )
        deployment.orderers.append(network.add_node(node))
    for index, member in enumerate(fleet):
        node = VehicleNode(
            index,
            identities.vehicles[index],
            home_peer=peer_addresses[member.home_peer],
            peers=peer_addresses,
            orderers=orderer_addresses,
            company=member.company,
            zone=member.zone,
            endorsement_required=endorsement_required,
            timeouts=timeouts,
            seed=seed,
        )
        deployment.vehicles.append(network.add_node(node))

    logger.info(
        "Built deployment seed=%s peers=%d orderers=%d vehicles=%d",
        seed,
        peers,
        orderers,
        len(fleet),
    )
    return deployment


def deployment_from_scenario(config: ScenarioConfig) -> Deployment:
    deployment = build_deployment(
        seed=config.seed,
        peers=config.peers,
        orderers=config.orderers,
        fleet=config.fleet,
        zones=config.grid.zones,
        link=config.link,
        cost=config.cost,
        block_cut=config.block_cut,
        raft=config.raft,
        clock=config.clock,
        endorsement_required=config.endorsement_required,
    )
    schedule_faults(deployment, config)
    return deployment


def schedule_faults(deployment: Deployment, config: ScenarioConfig) -> None:
    """Register the scenario's crash and partition schedules with the network clock."""
    network = deployment.network
    for event in config.crash_schedule:
        address = NodeAddress.parse(event.node)
        network.node(address)
        action = network.crash if event.action == "crash" else network.restart
        network.call_at(event.at_ms, lambda a=address, act=action: act(a), f"{event.action}:{address}")
    for event in config.partition_schedule:
        if event.heal:
            network.call_at(event.at_ms, network.heal, "heal")
        else:
            groups = [[NodeAddress.parse(name) for name in group] for group in event.groups]
            network.call_at(event.at_ms, lambda g=groups: network.partition(g), "partition")
