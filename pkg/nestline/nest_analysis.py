"""
Structural queries on nests: code distance, boundary distance tables and
most-probable stick paths.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import networkx as nx

from nestline.errors import BoundariesDisconnectedError, UnreachableError
from nestline.nest_builder import BoundaryId, DetectionEventId, Nest, NodeId, Stick


def nest_graph(n: Nest) -> nx.Graph:
    """Undirected graph of a nest; each edge carries its stick id as `sid`."""
    graph = nx.Graph()
    graph.add_nodes_from(n.nodes)
    graph.add_edges_from((s.a, s.b, {"sid": s.sid}) for s in n.sticks)
    return graph


def code_distance(n: Nest, graph: nx.Graph | None = None) -> int:
    """Minimum number of sticks joining the two boundaries."""
    graph = graph if graph is not None else nest_graph(n)
    first, second = n.boundaries
    try:
        return nx.shortest_path_length(graph, first, second)
    except nx.NetworkXNoPath:
        raise BoundariesDisconnectedError(
            f"{n.cls.value} boundaries {first.name!r} and {second.name!r} are not connected"
        ) from None


@dataclass(frozen=True)
class DistanceTable:
    """Stick-count distance from every node to each boundary; absent nodes cannot reach it."""

    to: dict[BoundaryId, dict[NodeId, int]]

    def distance(self, node: NodeId, boundary: BoundaryId) -> float:
        return self.to[boundary].get(node, math.inf)


def distance_table(n: Nest, graph: nx.Graph | None = None) -> DistanceTable:
    graph = graph if graph is not None else nest_graph(n)
    return DistanceTable({b: dict(nx.single_source_shortest_path_length(graph, b)) for b in n.boundaries})


def stick_weight(stick: Stick, p: float) -> float:
    """-log of the stick probability at physical rate p."""
    q = stick.probability(p)
    if q <= 0:
        return math.inf
    return max(0.0, -math.log(q))


def stick_weights(n: Nest, p: float) -> list[float]:
    return [stick_weight(s, p) for s in n.sticks]


def _weight_fn(weights: list[float]):
    return lambda u, v, data: weights[data["sid"]]


def path_sticks(n: Nest, nodes: list[NodeId]) -> list[Stick]:
    return [n.stick_between(a, b) for a, b in zip(nodes, nodes[1:])]


def shortest_path_weight(n: Nest, a: NodeId, b: NodeId, p: float,
                         graph: nx.Graph | None = None) -> tuple[float, list[Stick]]:
    """
    Most probable stick path between two nodes of one class.

    Args:
        n: Nest
        a: Start node
        b: End node
        p: Physical error rate

    Returns:
        tuple: (sum of -log stick probabilities, sticks along the path)
    """
    if a == b:
        return 0.0, []
    graph = graph if graph is not None else nest_graph(n)
    try:
        weight, nodes = nx.single_source_dijkstra(graph, a, target=b, weight=_weight_fn(stick_weights(n, p)))
    except (nx.NetworkXNoPath, nx.NodeNotFound):
        raise UnreachableError(f"no stick path from {a} to {b}") from None
    return weight, path_sticks(n, nodes)


def dijkstra_from(graph: nx.Graph, source: NodeId, weights: list[float]) -> tuple[dict, dict]:
    """All-targets Dijkstra from one node: (distance by node, node path by node)."""
    return nx.single_source_dijkstra(graph, source, weight=_weight_fn(weights))


def correction_syndrome(n: Nest, sticks: Iterable[Stick]) -> set[DetectionEventId]:
    """Detection events flipped by a set of sticks (their odd-degree event endpoints)."""
    flipped = set()
    for stick in sticks:
        for node in stick.endpoints:
            if isinstance(node, DetectionEventId):
                flipped ^= {node}
    return flipped
