import random

import networkx as nx
import pytest

from src.app.models.pydantic.contracts import GeoPoint
from src.app.models.pydantic.fleet import GridConfig
from src.app.services.routing_service import (
    RoadGraph,
    Unreachable,
    edge_key,
    plan_route,
    remaining_route,
    reroute_on_incident,
    route_edges,
)


def test_grid_layout_and_zone_bands():
    graph = RoadGraph.grid(GridConfig())
    assert graph.graph.number_of_nodes() == 25
    assert graph.graph.number_of_edges() == 40
    assert [graph.zone_of(graph.node_at(x, 0)) for x in range(5)] == ["red", "red", "green", "green", "blue"]
    position = graph.position(graph.node_at(2, 1))
    assert (position.lat, position.lon) == pytest.approx((35.001, 139.002))
    with pytest.raises(ValueError):
        graph.node_at(5, 0)


@pytest.mark.parametrize("seed", range(25))
def test_planned_route_is_a_cheapest_simple_path(seed):
    rng = random.Random(seed)
    graph = RoadGraph.grid(GridConfig(width=4, height=3))
    for u, v in rng.sample(sorted(graph.graph.edges()), 4):
        graph.penalize(u, v)
    source, target = rng.sample(sorted(graph.graph.nodes()), 2)

    route = plan_route(graph, source, target)
    assert route[0] == source and route[-1] == target
    assert all(graph.graph.has_edge(u, v) for u, v in zip(route, route[1:]))
    best = min(graph.path_cost(path) for path in nx.all_simple_paths(graph.graph, source, target))
    assert graph.path_cost(route) == pytest.approx(best)


def test_same_source_and_target_and_unknown_nodes():
    graph = RoadGraph.grid(GridConfig(width=2, height=2))
    assert plan_route(graph, 0, 0) == []
    with pytest.raises(Unreachable):
        plan_route(graph, 0, 99)


def test_disconnected_target_is_unreachable():
    graph = RoadGraph.grid(GridConfig(width=3, height=1))
    graph.graph = graph.graph.copy()
    graph.graph.remove_edge(1, 2)
    with pytest.raises(Unreachable):
        plan_route(graph, 0, 2)


def test_penalized_edges_stay_usable_but_are_avoided():
    graph = RoadGraph.grid(GridConfig(width=3, height=2))
    assert plan_route(graph, 0, 2) == [0, 1, 2]
    graph.penalize(1, 2)
    assert graph.weight(2, 1) == 10.0
    assert plan_route(graph, 0, 2) == [0, 1, 4, 5, 2]
    line = RoadGraph.grid(GridConfig(width=3, height=1))
    line.penalize(0, 1)
    assert plan_route(line, 0, 2) == [0, 1, 2]
    with pytest.raises(ValueError):
        line.penalize(0, 2)


def test_reroute_only_when_the_incident_lies_ahead():
    graph = RoadGraph.grid(GridConfig())
    route = plan_route(graph, graph.node_at(4, 2), graph.node_at(0, 2))
    assert route == [14, 13, 12, 11, 10]
    assert remaining_route(route, 12) == [12, 11, 10]
    assert remaining_route(route, 3) == []

    behind = reroute_on_incident(graph.copy(), route, 12, 10, [(13, 14)])
    assert behind is None
    ahead = graph.copy()
    new_route = reroute_on_incident(ahead, route, 13, 10, [(12, 11)])
    assert new_route[0] == 13 and new_route[-1] == 10
    assert edge_key(11, 12) not in route_edges(new_route)
    assert graph.penalized == set()


def test_nearest_edge_uses_segment_distance():
    graph = RoadGraph.grid(GridConfig())
    u, v = graph.node_at(2, 2), graph.node_at(1, 2)
    assert graph.nearest_edge(graph.midpoint(u, v)) == edge_key(u, v)
    assert graph.nearest_edge(GeoPoint(lat=35.0, lon=139.0003)) == (0, 1)
