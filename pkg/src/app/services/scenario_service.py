"""
Scenario service: scripted fleet runs on the road grid.

The adaptive-guidance scenario follows one accident report from a vehicle of
one company, through ordering and commit at every peer, to a notification at
a vehicle of another company in another zone, which then reroutes.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import logfire

from src.app.core.errors import EdgeChainError
from src.app.models.pydantic.contracts import IncidentKind
from src.app.models.pydantic.fleet import (
    CommunicationMode,
    FleetMember,
    GridConfig,
    IncidentScriptEntry,
    ScenarioEvent,
)
from src.app.models.pydantic.ledger import ValidityFlag
from src.app.models.pydantic.scenario import CrashEvent, ScenarioConfig
from src.app.network.simulator import DeadlineExceeded
from src.app.nodes.vehicle_node import VehicleEvent, VehicleNode
from src.app.services.bench_service import IoError, export_peer_ledgers
from src.app.services.routing_service import RoadGraph, edge_key, plan_route, route_edges
from src.app.services.topology_service import Deployment, deployment_from_scenario

logger = logging.getLogger(__name__)

Variant = Literal["default", "off-route", "blue-peer-crashed"]

LEADER_DEADLINE_MS = 10_000.0
STEP_DEADLINE_MS = 30_000.0


class ScenarioAssertionFailed(EdgeChainError):
    """A scripted scenario step did not hold."""

    def __init__(self, step: str, message: str) -> None:
        super().__init__(f"{step}: {message}")
        self.step = step


def adaptive_guidance_config(variant: Variant = "default", seed: int = 0) -> ScenarioConfig:
    """Built-in layout: A (red company, green zone) at (2,2); B (green company, blue zone) driving (4,2) to (0,2)."""
    edge = ((2, 4), (3, 4)) if variant == "off-route" else ((2, 2), (1, 2))
    crashes = [CrashEvent(at_ms=0.0, node="peer-2")] if variant == "blue-peer-crashed" else []
    return ScenarioConfig(
        seed=seed,
        fleet=(
            FleetMember(company="red", zone="green", home_peer=1, position=(2, 2)),
            FleetMember(company="green", zone="blue", home_peer=2, position=(4, 2), destination=(0, 2)),
        ),
        grid=GridConfig(),
        incidents=[IncidentScriptEntry(at_ms=0.0, vehicle=0, kind=IncidentKind.ACCIDENT, edge=edge)],
        crash_schedule=crashes,
    )


class AdaptiveGuidanceRun:
    def __init__(self, config: ScenarioConfig) -> None:
        if len(config.fleet) < 2 or not config.incidents:
            raise ValueError("adaptive guidance needs two vehicles and an incident")
        self.config = config
        self.events: List[ScenarioEvent] = []
        self.planned_routes: Dict[int, List[int]] = {}
        self.deployment: Deployment = deployment_from_scenario(config)
        self.road = RoadGraph.grid(config.grid)
        self.incident = config.incidents[0]
        self.reporter: VehicleNode = self.deployment.vehicles[self.incident.vehicle]
        self.receiver: VehicleNode = next(
            v for v in self.deployment.vehicles if v is not self.reporter and config.fleet[v.index].destination
        )
        for vehicle in self.deployment.vehicles:
            vehicle.add_listener(self._on_vehicle_event)

    @property
    def network(self):
        return self.deployment.network

    def log(self, step: str, node: str = "", /, **detail: Any) -> None:
        self.events.append(ScenarioEvent(time_ms=self.network.now, step=step, node=node, detail=detail))

    def _on_vehicle_event(self, event: VehicleEvent) -> None:
        node = str(event.vehicle)
        if event.kind in ("submitted", "committed", "failed"):
            record = event.record
            self.log(
                f"request-{event.kind}",
                node,
                txid=record.txid.hex() if record.txid else None,
                block_number=record.block_number,
                error=repr(record.error) if record.error else None,
            )
        elif event.kind == "notification":
            n = event.notification
            self.log("notification", node, txid=bytes(n.txid).hex(), peer=str(n.peer), zone=n.zone, kind=n.kind.value)
        elif event.kind == "reroute":
            r = event.reroute
            self.log("reroute", node, edge=list(r.edge), old_route=r.old_route, new_route=r.new_route)

    def _run_until(self, step: str, condition, deadline_ms: float = STEP_DEADLINE_MS) -> None:
        try:
            self.network.run_until(condition, self.network.now + deadline_ms)
        except DeadlineExceeded as e:
            self.log("assertion-failed", "", step=step, reason=str(e))
            raise ScenarioAssertionFailed(step, str(e))

    def _check(self, step: str, holds: bool, message: str) -> None:
        if not holds:
            self.log("assertion-failed", "", step=step, reason=message)
            raise ScenarioAssertionFailed(step, message)
        self.log(step, "", ok=True)

    def _place_vehicles(self) -> None:
        for vehicle in self.deployment.vehicles:
            member = self.config.fleet[vehicle.index]
            if member.position is None:
                continue
            position = self.road.node_at(*member.position)
            if member.destination is None:
                vehicle.set_route(self.road.copy(), position, position, [])
                continue
            destination = self.road.node_at(*member.destination)
            route = plan_route(self.road, position, destination)
            self.planned_routes[vehicle.index] = route
            vehicle.set_route(self.road.copy(), position, destination, route)
            self.log("route-planned", str(vehicle.address), route=route)

    def run(self, expect_reroutes: Optional[int] = None) -> List[ScenarioEvent]:
        network = self.network
        self._place_vehicles()
        network.start()
        self._run_until("leader-elected", lambda: self.deployment.leader() is not None, LEADER_DEADLINE_MS)
        self.log("leader-elected", str(self.deployment.leader().address))

        (ux, uy), (vx, vy) = self.incident.edge
        u, v = self.road.node_at(ux, uy), self.road.node_at(vx, vy)
        gps = self.road.midpoint(u, v)
        zone = self.road.zone_of(self.reporter.position if self.reporter.position is not None else u)
        record_holder: Dict[str, Any] = {}

        def report() -> None:
            record_holder["record"] = self.reporter.report_incident(
                self.incident.kind, gps, self.incident.payload_kib, CommunicationMode.SINGLE, zone=zone
            )
            self.log("incident-reported", str(self.reporter.address), edge=[u, v], zone=zone)

        network.call_at(network.now + self.incident.at_ms, report, "incident")
        self._run_until("incident-committed", lambda: "record" in record_holder and record_holder["record"].done)
        record = record_holder["record"]
        self._check("incident-committed", record.state == "committed", f"request ended as {record.state}")

        txid = record.txid
        self._run_until(
            "committed-at-all-peers",
            lambda: all(_valid_on(peer, txid) for peer in self.deployment.live_peers()),
        )
        self.log("committed-at-all-peers", "", peers=[str(p.address) for p in self.deployment.live_peers()])

        self._run_until("receiver-notified", lambda: txid in self.receiver.inbox)
        notification = self.receiver.inbox[txid]
        self._check(
            "notified-by-home-peer",
            notification.peer == self.receiver.home_peer,
            f"notification came from {notification.peer}",
        )

        incident_edge = edge_key(u, v)
        on_route = incident_edge in route_edges(self.planned_routes.get(self.receiver.index, []))
        expected = expect_reroutes if expect_reroutes is not None else int(on_route)
        self._check(
            "reroute-count",
            len(self.receiver.reroutes) == expected,
            f"expected {expected} reroutes, saw {len(self.receiver.reroutes)}",
        )
        if self.receiver.reroutes:
            event = self.receiver.reroutes[-1]
            self._check(
                "reroute-avoids-incident",
                incident_edge not in route_edges(event.new_route) and event.new_route[-1] == event.old_route[-1],
                f"new route {event.new_route} still uses {incident_edge}",
            )

        request_id = self.receiver.send_query(zone)
        self._run_until("cross-company-query", lambda: request_id in self.receiver.query_results)
        result = self.receiver.query_results[request_id]
        self._check(
            "cross-company-visibility",
            any(i.reporter == self.reporter.pseudonym for i in result.incidents),
            f"{zone} query returned {len(result.incidents)} incidents without the report",
        )
        self.log("trace-digest", "", digest=network.trace_digest)
        return self.events


def _valid_on(peer, txid: bytes) -> bool:
    for block in peer.chain:
        for tx, flag in zip(block.transactions, block.validity):
            if tx.id == txid:
                return flag == ValidityFlag.VALID
    return False


def write_event_log(events: List[ScenarioEvent], path: str | Path) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8") as file:
            for event in events:
                file.write(event.model_dump_json() + "\n")
    except OSError as e:
        raise IoError(f"cannot write event log {target}: {e}")
    return target


def run_scenario_adaptive_guidance(
    variant: Variant = "default",
    seed: int = 0,
    config: Optional[ScenarioConfig] = None,
    out_dir: Optional[str | Path] = None,
) -> List[ScenarioEvent]:
    """Run the adaptive-guidance script and return its event log.

    Raises ``ScenarioAssertionFailed`` naming the first step that did not hold.
    The log and peer ledgers are written under ``out_dir`` even on failure.
    """
    run = AdaptiveGuidanceRun(config or adaptive_guidance_config(variant, seed))
    expect = 0 if variant == "off-route" else (1 if config is None else None)
    try:
        with logfire.span("adaptive guidance {variant}", variant=variant):
            events = run.run(expect_reroutes=expect)
        logfire.info("adaptive guidance finished", variant=variant, reroutes=len(run.receiver.reroutes))
        return events
    finally:
        if out_dir is not None:
            write_event_log(run.events, Path(out_dir) / "adaptive-guidance-events.jsonl")
            export_peer_ledgers(run.deployment, out_dir)


def run_scenario(config: ScenarioConfig) -> Deployment:
    """Run a scenario file for ``duration_ms`` of virtual time and return the deployment."""
    deployment = deployment_from_scenario(config)
    network = deployment.network
    road = RoadGraph.grid(config.grid)
    for vehicle in deployment.vehicles:
        member = config.fleet[vehicle.index]
        if member.position is not None and member.destination is not None:
            start, end = road.node_at(*member.position), road.node_at(*member.destination)
            vehicle.set_route(road.copy(), start, end, plan_route(road, start, end))
        if config.plan is not None:
            vehicle.load_plan(config.plan)
    for entry in config.incidents:
        reporter = deployment.vehicles[entry.vehicle]
        (ux, uy), (vx, vy) = entry.edge
        u, v = road.node_at(ux, uy), road.node_at(vx, vy)
        network.call_at(
            entry.at_ms,
            lambda r=reporter, e=entry, a=u, b=v: r.report_incident(
                e.kind, road.midpoint(a, b), e.payload_kib, zone=road.zone_of(a)
            ),
            "incident",
        )
    with logfire.span("scenario run {duration_ms} ms", duration_ms=config.duration_ms):
        network.start()
        network.run_for(config.duration_ms)
    logger.info("Scenario finished at %.1f ms, trace %s", network.now, network.trace_digest)
    return deployment
