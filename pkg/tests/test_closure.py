import random

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alignrw.alignment import Correspondence, Origin, load_alignment
from alignrw.cli import bundled
from alignrw.closure import EquivalenceGraph, build_equivalence_graph, close, derive_closure, widest_paths
from alignrw.expressions import Atom, EntityIri, Side, parse_class_expression


def node(i: int, side: Side) -> Atom:
    prefix = "onto_Source" if side is Side.SOURCE else "target_onto"
    return Atom(EntityIri(side, prefix, f"N{i}"))


def random_correspondences(rng: random.Random, max_nodes: int = 8) -> list[Correspondence]:
    k = rng.randint(2, max_nodes)
    members = [node(i, rng.choice((Side.SOURCE, Side.TARGET))) for i in range(k)]
    cs = []
    for _ in range(rng.randint(1, k * 2)):
        a, b = rng.sample(members, 2)
        if a.side is Side.TARGET and b.side is Side.SOURCE:
            a, b = b, a
        weight = rng.choice((0.3, 0.5, 0.6, 0.75, 0.9, 1.0, round(rng.random(), 2)))
        cs.append(Correspondence(a, b, weight))
    return cs


def brute_force(cs: list[Correspondence]) -> dict[tuple, float]:
    """Widest path by enumerating every simple path."""
    g = nx.Graph()
    for c in cs:
        w = max(c.confidence, g.edges[c.source, c.target]["w"]) if g.has_edge(c.source, c.target) else c.confidence
        g.add_edge(c.source, c.target, w=w)
    out = {}
    for a in g.nodes:
        if a.side is not Side.SOURCE:
            continue
        for b in g.nodes:
            if b.side is not Side.TARGET or g.has_edge(a, b):
                continue
            best = None
            for path in nx.all_simple_paths(g, a, b):
                width = min(g.edges[u, v]["w"] for u, v in zip(path, path[1:]))
                best = width if best is None else max(best, width)
            if best is not None:
                out[(a, b)] = best
    return out


def test_closure_matches_brute_force_on_random_graphs():
    rng = random.Random(7)
    for _ in range(300):
        cs = random_correspondences(rng)
        got = {(c.source, c.target): c.confidence for c in derive_closure(build_equivalence_graph(cs))}
        assert got == brute_force(cs)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_closure_property(seed):
    cs = random_correspondences(random.Random(seed))
    derived = derive_closure(build_equivalence_graph(cs))
    assert {(c.source, c.target): c.confidence for c in derived} == brute_force(cs)
    assert all(c.origin is Origin.DERIVED and c.is_cross for c in derived)


def test_widest_path_prefers_strong_detour():
    a, b, c = node(1, Side.SOURCE), node(2, Side.SOURCE), node(3, Side.TARGET)
    g = EquivalenceGraph()
    g.add_edge(("class", a), ("class", c), 0.2)
    g.add_edge(("class", a), ("class", b), 0.9)
    g.add_edge(("class", b), ("class", c), 0.8)
    assert widest_paths(g.neighbours(), ("class", a))[("class", c)] == 0.8


def test_duplicate_edges_keep_maximum():
    g = EquivalenceGraph()
    a, b = ("class", node(1, Side.SOURCE)), ("class", node(2, Side.TARGET))
    g.add_edge(a, b, 0.4)
    g.add_edge(b, a, 0.7)
    g.add_edge(a, b, 0.5)
    assert g.edges[frozenset((a, b))] == 0.7
    with pytest.raises(ValueError):
        g.add_edge(a, b, 1.2)


def test_properties_and_classes_do_not_mix():
    p = Atom(EntityIri(Side.SOURCE, "onto_Source", "X"))
    q = Atom(EntityIri(Side.TARGET, "target_onto", "X"))
    r = Atom(EntityIri(Side.TARGET, "target_onto", "Y"))
    cs = [Correspondence(p, q, entity="property"), Correspondence(p, r)]
    assert derive_closure(build_equivalence_graph(cs)) == []


def test_min_confidence_filters_only_derived():
    a, b, c = node(1, Side.SOURCE), node(2, Side.TARGET), node(3, Side.TARGET)
    cs = [Correspondence(a, b, 0.3), Correspondence(b, c, 0.9)]
    assert close(cs, 0.5) == cs
    assert len(close(cs, 0.3)) == 3


F1 = "ConferencePaper and (hasDecision some Acceptance)"
F1_TARGET = "Paper and (accepted value true)"


@pytest.mark.parametrize("fixture", ["reasoning1.align.json", "reasoning2.align.json", "ekaw-edas-mini.align.json"])
def test_fixtures_derive_complex_correspondence(fixture):
    derived = derive_closure(build_equivalence_graph(load_alignment(bundled(fixture)).correspondences))
    pairs = {(c.source, c.target): c.confidence for c in derived}
    key = (parse_class_expression(F1), parse_class_expression(F1_TARGET, Side.TARGET))
    assert pairs[key] == 1.0


def test_closure_output_is_deterministic():
    cs = list(load_alignment(bundled("ekaw-edas-mini.align.json")).correspondences)
    first = close(cs)
    assert close(list(reversed(cs)))[len(cs):] == first[len(cs):]
