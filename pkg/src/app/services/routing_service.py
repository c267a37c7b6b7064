"""
Road graph and route planning for virtual vehicles.

The map is a grid of intersections tiled into vertical zone bands. Incident
edges are not removed; their weight is multiplied by a penalty factor so a
route always exists while the graph is connected.
"""

import heapq
import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx

from src.app.core.config.settings import settings
from src.app.core.errors import EdgeChainError
from src.app.models.pydantic.contracts import GeoPoint
from src.app.models.pydantic.fleet import GridConfig

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


class Unreachable(EdgeChainError):
    """No path between the requested intersections."""

    pass


def edge_key(u: int, v: int) -> Edge:
    return (u, v) if u <= v else (v, u)


class RoadGraph:
    """Weighted undirected road graph plus the set of incident-penalized edges."""

    def __init__(
        self,
        graph: nx.Graph,
        config: GridConfig,
        penalty_factor: float = settings.INCIDENT_PENALTY_FACTOR,
    ) -> None:
        self.graph = graph
        self.config = config
        self.penalty_factor = penalty_factor
        self.penalized: Set[Edge] = set()

    @classmethod
    def grid(cls, config: Optional[GridConfig] = None, penalty_factor: float = settings.INCIDENT_PENALTY_FACTOR) -> "RoadGraph":
        config = config or GridConfig()
        graph = nx.Graph()
        for y in range(config.height):
            for x in range(config.width):
                graph.add_node(
                    y * config.width + x,
                    x=x,
                    y=y,
                    lat=config.origin_lat + y * config.spacing_deg,
                    lon=config.origin_lon + x * config.spacing_deg,
                    zone=config.zones[x * len(config.zones) // config.width],
                )
        for y in range(config.height):
            for x in range(config.width):
                node = y * config.width + x
                if x + 1 < config.width:
                    graph.add_edge(node, node + 1, weight=config.base_weight)
                if y + 1 < config.height:
                    graph.add_edge(node, node + config.width, weight=config.base_weight)
        return cls(graph, config, penalty_factor)

    def copy(self) -> "RoadGraph":
        clone = RoadGraph(self.graph, self.config, self.penalty_factor)
        clone.penalized = set(self.penalized)
        return clone

    # Lookup

    def node_at(self, x: int, y: int) -> int:
        if not (0 <= x < self.config.width and 0 <= y < self.config.height):
            raise ValueError(f"({x}, {y}) is outside the grid")
        return y * self.config.width + x

    def coordinates(self, node: int) -> Tuple[int, int]:
        data = self.graph.nodes[node]
        return data["x"], data["y"]

    def position(self, node: int) -> GeoPoint:
        data = self.graph.nodes[node]
        return GeoPoint(lat=data["lat"], lon=data["lon"])

    def zone_of(self, node: int) -> str:
        return self.graph.nodes[node]["zone"]

    def midpoint(self, u: int, v: int) -> GeoPoint:
        a, b = self.position(u), self.position(v)
        return GeoPoint(lat=(a.lat + b.lat) / 2, lon=(a.lon + b.lon) / 2)

    def nearest_edge(self, gps: GeoPoint) -> Edge:
        """Edge closest to ``gps`` (point-to-segment distance); ties go to the smallest edge."""
        best: Optional[Tuple[float, Edge]] = None
        for u, v in self.graph.edges():
            candidate = (round(_segment_distance(gps, self.position(u), self.position(v)), 12), edge_key(u, v))
            if best is None or candidate < best:
                best = candidate
        return best[1]

    # Weights

    def penalize(self, u: int, v: int) -> None:
        if not self.graph.has_edge(u, v):
            raise ValueError(f"no edge between {u} and {v}")
        self.penalized.add(edge_key(u, v))

    def weight(self, u: int, v: int) -> float:
        base = self.graph.edges[u, v]["weight"]
        return base * self.penalty_factor if edge_key(u, v) in self.penalized else base

    def path_cost(self, path: Sequence[int]) -> float:
        return sum(self.weight(u, v) for u, v in zip(path, path[1:]))


def _segment_distance(point: GeoPoint, a: GeoPoint, b: GeoPoint) -> float:
    dx, dy = b.lon - a.lon, b.lat - a.lat
    length = dx * dx + dy * dy
    t = 0.0 if length == 0 else max(0.0, min(1.0, ((point.lon - a.lon) * dx + (point.lat - a.lat) * dy) / length))
    return math.hypot(point.lon - (a.lon + t * dx), point.lat - (a.lat + t * dy))


def plan_route(graph: RoadGraph, source: int, target: int) -> List[int]:
    """Minimum-weight path from ``source`` to ``target``, both included.

    Dijkstra over (cost, node) so equal-cost choices resolve to lower node
    indices. Returns [] when source == target.
    """
    for node in (source, target):
        if node not in graph.graph:
            raise Unreachable(f"node {node} is not in the road graph")
    if source == target:
        return []

    dist: Dict[int, float] = {source: 0.0}
    previous: Dict[int, int] = {}
    done: Set[int] = set()
    heap: List[Tuple[float, int]] = [(0.0, source)]
    while heap:
        cost, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        if node == target:
            break
        for neighbour in sorted(graph.graph.neighbors(node)):
            if neighbour in done:
                continue
            candidate = cost + graph.weight(node, neighbour)
            known = dist.get(neighbour)
            if known is None or candidate < known or (candidate == known and node < previous[neighbour]):
                dist[neighbour] = candidate
                previous[neighbour] = node
                heapq.heappush(heap, (candidate, neighbour))

    if target not in done:
        raise Unreachable(f"no path from {source} to {target}")
    path = [target]
    while path[-1] != source:
        path.append(previous[path[-1]])
    path.reverse()
    return path


def route_edges(route: Sequence[int]) -> List[Edge]:
    return [edge_key(u, v) for u, v in zip(route, route[1:])]


def remaining_route(route: Sequence[int], position: int) -> List[int]:
    """Suffix of ``route`` starting at ``position``; [] if the vehicle is off the route."""
    try:
        return list(route[list(route).index(position) :])
    except ValueError:
        return []


def reroute_on_incident(
    graph: RoadGraph,
    route: Sequence[int],
    position: int,
    destination: int,
    edges: Iterable[Edge],
) -> Optional[List[int]]:
    """Penalize ``edges``; a new route from ``position`` if any lies ahead, else None."""
    ahead = set(route_edges(remaining_route(route, position)))
    hit = False
    for u, v in edges:
        graph.penalize(u, v)
        hit = hit or edge_key(u, v) in ahead
    if not hit:
        return None
    new_route = plan_route(graph, position, destination)
    logger.info("Rerouted at node %d: %s -> %s", position, list(route), new_route)
    return new_route
