"""Equivalence transitivity over asserted correspondences.

Every member of every correspondence becomes a node of an undirected graph;
each asserted equivalence is an edge weighted by its confidence.  Two
members are equivalent whenever they are connected, so a source-side member
and a target-side member in the same component yield a correspondence.  Its
confidence is the widest-path value: the best, over all connecting paths,
of the weakest edge on the path.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable

from .alignment import Correspondence, Origin
from .expressions import ClassExpression, Side, sort_key

Node = tuple[str, ClassExpression]  # (entity kind, canonical member)


def node_key(node: Node):
    return (node[0], sort_key(node[1]))


@dataclass
class EquivalenceGraph:
    nodes: set[Node] = field(default_factory=set)
    edges: dict[frozenset, float] = field(default_factory=dict)

    def add_edge(self, a: Node, b: Node, weight: float):
        if not 0.0 <= weight <= 1.0:
            raise ValueError(f"edge weight {weight} outside [0, 1]")
        self.nodes.update((a, b))
        if a == b:
            return
        key = frozenset((a, b))
        self.edges[key] = max(weight, self.edges.get(key, -1.0))

    def neighbours(self) -> dict[Node, list[tuple[Node, float]]]:
        adj: dict[Node, list[tuple[Node, float]]] = {n: [] for n in self.nodes}
        for pair, w in self.edges.items():
            a, b = tuple(pair)
            adj[a].append((b, w))
            adj[b].append((a, w))
        return adj

    def components(self) -> list[list[Node]]:
        adj = self.neighbours()
        seen: set[Node] = set()
        comps = []
        for start in sorted(self.nodes, key=node_key):
            if start in seen:
                continue
            stack, comp = [start], []
            seen.add(start)
            while stack:
                n = stack.pop()
                comp.append(n)
                for m, _ in adj[n]:
                    if m not in seen:
                        seen.add(m)
                        stack.append(m)
            comps.append(sorted(comp, key=node_key))
        return comps


def build_equivalence_graph(cs: Iterable[Correspondence]) -> EquivalenceGraph:
    g = EquivalenceGraph()
    for c in cs:
        g.add_edge((c.entity, c.source), (c.entity, c.target), c.confidence)
    return g


def widest_paths(adj: dict[Node, list[tuple[Node, float]]], start: Node) -> dict[Node, float]:
    """Bottleneck value from ``start`` to every reachable node (max-min Dijkstra)."""
    best = {start: 1.0}
    done: set[Node] = set()
    heap = [(-1.0, 0, start)]
    tie = 1
    while heap:
        neg, _, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        width = -neg
        for nxt, w in adj[node]:
            cand = min(width, w)
            if nxt not in done and cand > best.get(nxt, -1.0):
                best[nxt] = cand
                heapq.heappush(heap, (-cand, tie, nxt))
                tie += 1
    del best[start]
    return best


def derive_closure(g: EquivalenceGraph) -> list[Correspondence]:
    """Derived cross-ontology correspondences, in canonical order."""
    adj = g.neighbours()
    derived = []
    for comp in g.components():
        for node in comp:
            kind, expr = node
            if expr.side is not Side.SOURCE:
                continue
            for other, width in widest_paths(adj, node).items():
                if other[1].side is not Side.TARGET:
                    continue
                if frozenset((node, other)) in g.edges:
                    continue
                derived.append(Correspondence(expr, other[1], width, Origin.DERIVED, kind))
    derived.sort(key=lambda c: (c.entity, sort_key(c.source), sort_key(c.target)))
    return derived


def close(cs: Iterable[Correspondence], min_confidence: float = 0.0) -> list[Correspondence]:
    """Asserted correspondences followed by the derived ones above ``min_confidence``."""
    cs = list(cs)
    derived = derive_closure(build_equivalence_graph(cs))
    return cs + [c for c in derived if c.confidence >= min_confidence]


__all__ = ["EquivalenceGraph", "build_equivalence_graph", "close", "derive_closure", "widest_paths"]
