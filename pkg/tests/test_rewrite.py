import itertools

import pytest
from hypothesis import given, settings

from alignrw.alignment import Correspondence, build_dictionary, load_alignment
from alignrw.cli import bundled
from alignrw.closure import close
from alignrw.errors import KeyNotFoundError, RewriteError, UnmappedVocabularyError
from alignrw.expressions import Atom, EntityIri, Side, parse_class_expression
from alignrw.rewrite import (
    APPROXIMATED,
    FreshVariables,
    compile_pattern,
    generate_query_pair,
    match_pattern,
    query_for_member,
    rewrite_query,
)
from alignrw.sparql import (
    RDF_TYPE,
    GroupPattern,
    SelectQuery,
    TriplePattern,
    Variable,
    iter_triples,
    parse_select,
    query_iris,
    serialize_select,
)

from strategies import queries

MINI = load_alignment(bundled("ekaw-edas-mini.align.json"))
P = MINI.prefixes
D = build_dictionary(close(MINI.correspondences))

F1 = "ConferencePaper and (hasDecision some Acceptance)"
F10_SOURCE = (
    "SELECT DISTINCT ?v1 WHERE { ?v1 rdf:type onto_Source:ConferencePaper . "
    "?v1 onto_Source:hasDecision ?v2 . ?v2 rdf:type onto_Source:Acceptance }"
)


def q(text):
    return parse_select(text, P)


def src(text):
    return parse_class_expression(text, Side.SOURCE, P)


def tgt(text):
    return parse_class_expression(text, Side.TARGET, P)


def test_compile_intersection_with_existential():
    p = compile_pattern(src(F1))
    assert [str(t) for t in p.triples] == [
        "?v1 rdf:type onto_Source:ConferencePaper",
        "?v1 onto_Source:hasDecision ?v2",
        "?v2 rdf:type onto_Source:Acceptance",
    ]
    assert p.variables() == ["v1", "v2"]
    assert p.warnings == ()


def test_compile_union_and_value():
    p = compile_pattern(tgt("Conference or ConferenceEvent or ConferenceSession"))
    assert p.triples == () and len(p.disjunctive) == 3
    v = compile_pattern(tgt("Paper and (accepted value true)"))
    assert [str(t) for t in v.triples] == ["?v1 rdf:type target_onto:Paper", "?v1 target_onto:accepted true"]


def test_compile_flags_universal_and_cardinality():
    assert APPROXIMATED in compile_pattern(src("hasAuthor only Person")).warnings
    assert APPROXIMATED in compile_pattern(src("hasAuthor min 1")).warnings


def test_compile_nested_unions_are_distributed():
    p = compile_pattern(src("(A or B) and (C or D)"))
    assert len(p.disjunctive) == 2 and all(len(alt.disjunctive) == 2 for alt in p.disjunctive)
    leaves = {(str(alt.triples[0].object), str(inner.triples[0].object)) for alt in p.disjunctive for inner in alt.disjunctive}
    assert len(leaves) == 4


def test_fresh_variables_continue_numbering():
    fresh = FreshVariables({"v1", "v3", "x"})
    assert [fresh().name for _ in range(2)] == ["v4", "v5"]


def test_match_pattern_enumerates_homomorphisms():
    p = compile_pattern(src("A"), "x")
    g = q("SELECT DISTINCT ?a ?b WHERE { ?a rdf:type onto_Source:A . ?b rdf:type onto_Source:A }").where
    found = match_pattern(p, g)
    assert [b.consumed for b in found] == [(0,), (1,)]
    assert found[0][Variable("x")] == Variable("a")


def test_anchor_never_binds_an_iri():
    p = compile_pattern(src("A"), "x")
    g = q("SELECT DISTINCT ?c WHERE { onto_Source:ind rdf:type onto_Source:A . ?c rdf:type onto_Source:B }").where
    assert match_pattern(p, g) == []


def test_simple_rewrite():
    [(out, rep)] = rewrite_query(q("SELECT DISTINCT ?v1 WHERE {?v1 rdf:type onto_Source:Conference_Banquet}"), D)
    assert out == q("SELECT DISTINCT ?v1 WHERE {?v1 rdf:type target_onto:ConferenceDinner}")
    assert rep.dropped_variables == set() and rep.confidence == 1.0


def test_union_rewrite():
    [(out, _)] = rewrite_query(q("SELECT DISTINCT ?v1 WHERE {?v1 rdf:type onto_Source:Event}"), D)
    assert out == q(
        "SELECT DISTINCT ?v1 WHERE { {?v1 rdf:type target_onto:Conference} UNION "
        "{?v1 rdf:type target_onto:ConferenceEvent} UNION {?v1 rdf:type target_onto:ConferenceSession} }"
    )


def test_complex_rewrite_drops_unbound_variable():
    results = rewrite_query(q(F10_SOURCE), D)
    expected = q("SELECT DISTINCT ?v1 WHERE { ?v1 rdf:type target_onto:Paper . ?v1 target_onto:accepted true }")
    assert [r.confidence for _, r in results] == [1.0, 1.0]
    hit = [rep for out, rep in results if out == expected]
    assert len(hit) == 1 and hit[0].dropped_variables == {"v2"}
    assert all(rep.applied[0][0].source == src(F1) for _, rep in results)


def test_longest_pattern_wins():
    # the three triples could also be read as separate atoms; the complex key must consume them
    for _, rep in rewrite_query(q(F10_SOURCE), D):
        assert [b.consumed for _, b in rep.applied] == [(0, 1, 2)]


def test_branching_over_multiple_values():
    cs = [
        Correspondence(src("A"), tgt("X"), 0.6),
        Correspondence(src("A"), tgt("Y"), 0.9),
        Correspondence(src("B"), tgt("Z"), 0.5),
        Correspondence(src("B"), tgt("W"), 0.5),
    ]
    d = build_dictionary(cs)
    results = rewrite_query(q("SELECT DISTINCT ?a ?b WHERE { ?a rdf:type onto_Source:A . ?b rdf:type onto_Source:B }"), d)
    assert [round(r.confidence, 3) for _, r in results] == [0.45, 0.45, 0.3, 0.3]
    objects = [tuple(t.object.local_name for t in out.where.triples) for out, _ in results]
    assert objects == [("Y", "W"), ("Y", "Z"), ("X", "W"), ("X", "Z")]


def test_property_substitution():
    [(out, rep)] = rewrite_query(
        q("SELECT DISTINCT ?p ?a WHERE { ?p rdf:type onto_Source:Paper . ?p onto_Source:writtenBy ?a }"), D
    )
    assert [str(t) for t in out.where.triples] == ["?p rdf:type target_onto:Paper", "?p target_onto:isWrittenBy ?a"]
    assert len(rep.applied) == 2


def test_strict_mode_lists_unmapped_iris():
    query = q("SELECT DISTINCT ?x WHERE { ?x rdf:type onto_Source:Unicorn . ?x onto_Source:horn ?h }")
    with pytest.raises(UnmappedVocabularyError) as info:
        rewrite_query(query, D)
    assert info.value.iris == ["onto_Source:Unicorn", "onto_Source:horn"]
    [(out, rep)] = rewrite_query(query, D, strict=False)
    assert rep.unmapped_iris == {"onto_Source:Unicorn", "onto_Source:horn"}
    assert out.where == query.where


def test_shared_internal_variable_blocks_complex_match():
    # ?v2 is also projected and used elsewhere, so the existential pattern may not swallow it
    query = q(
        "SELECT DISTINCT ?v1 ?v2 WHERE { ?v1 rdf:type onto_Source:ConferencePaper . ?v1 onto_Source:hasDecision ?v2 . "
        "?v2 rdf:type onto_Source:Acceptance . ?v2 onto_Source:writtenBy ?v3 }"
    )
    [(_, rep)] = rewrite_query(query, D, strict=False)
    assert all(c.source != src(F1) for c, _ in rep.applied)
    assert "onto_Source:ConferencePaper" in rep.unmapped_iris


def test_empty_projection_is_an_error():
    query = q(F10_SOURCE.replace("SELECT DISTINCT ?v1", "SELECT DISTINCT ?v2"))
    with pytest.raises(RewriteError):
        rewrite_query(query, D)


def test_fresh_target_variables_do_not_clash():
    query = q("SELECT DISTINCT ?v1 ?v3 WHERE { ?v1 rdf:type onto_Source:Conference_Session . ?v3 rdf:type onto_Source:Person }")
    [(out, _)] = rewrite_query(query, D)
    assert "?v1 target_onto:isPartOf ?v4" in [str(t) for t in out.where.triples]


def test_union_in_query_matches_disjunctive_key():
    inverted = MINI.inverted()
    d = build_dictionary(close(inverted.correspondences))
    query = parse_select(
        "SELECT DISTINCT ?v1 WHERE { {?v1 rdf:type target_onto:ConferenceSession} UNION "
        "{?v1 rdf:type target_onto:Conference} UNION {?v1 rdf:type target_onto:ConferenceEvent} }",
        inverted.prefixes,
    )
    [(out, _)] = rewrite_query(query, d)
    assert serialize_select(out) == "SELECT DISTINCT ?v1\nWHERE {\n  ?v1 rdf:type onto_Source:Event .\n}\n"


def test_prefix_lines_follow_the_input():
    text = (
        "PREFIX rdf: <http://www.w3.org/1999/02/22-rdf-syntax-ns#>\nPREFIX onto_Source: <http://ekaw#>\n"
        "SELECT DISTINCT ?v1 WHERE {?v1 rdf:type onto_Source:Conference_Banquet}"
    )
    [(out, _)] = rewrite_query(q(text), D, prefixes=P)
    assert out.prefixes == (("rdf", "http://www.w3.org/1999/02/22-rdf-syntax-ns#"), ("target_onto", "http://edas#"))


def test_generate_query_pair():
    source, targets = generate_query_pair(src(F1), D)
    assert source.projection == ("v1", "v2")
    assert [t.projection for t in targets] == [("v1",), ("v1",)]
    with pytest.raises(KeyNotFoundError):
        generate_query_pair(src("Unicorn"), D)


def test_union_member_query_projects_anchor():
    assert query_for_member(tgt("Session and (isPartOf some (Conference or Workshop))")).projection == ("v1",)


def fixture_queries():
    """Conjunctions of one or two member queries over the fixture dictionary."""
    singles = [query_for_member(k) for k in D]
    out = list(singles)
    for a, b in itertools.combinations(list(D)[:6], 2):
        pa = compile_pattern(a, "v1")
        pb = compile_pattern(b, "v1", FreshVariables(set(pa.variables())))
        if pa.disjunctive or pb.disjunctive:
            continue
        out.append(SelectQuery(("v1",), GroupPattern(pa.triples + pb.triples)))
    return out


def test_outputs_use_target_vocabulary_only():
    for query in fixture_queries():
        for out, rep in rewrite_query(query, D):
            assert all(iri.side is Side.TARGET for iri in query_iris(out)), serialize_select(out)
            consumed = [i for _, b in rep.applied for i in b.consumed if b.mapping]
            assert len(consumed) == len(set(consumed))


def test_rewrite_is_deterministic():
    for query in fixture_queries():
        first = [serialize_select(o) for o, _ in rewrite_query(query, D)]
        assert first == [serialize_select(o) for o, _ in rewrite_query(query, D)]


def _to_target(term):
    return EntityIri(Side.TARGET, "target_onto", term.local_name) if isinstance(term, EntityIri) else term


def _flip_query(query: SelectQuery) -> GroupPattern:
    fix = _to_target

    def walk(g):
        triples = tuple(TriplePattern(*(fix(x) for x in t.terms())) for t in g.triples)
        return GroupPattern(triples, None if g.union is None else tuple(walk(b) for b in g.union))

    return walk(query.where)


@settings(max_examples=300, deadline=None)
@given(queries(mappable=True))
def test_identity_alignment_preserves_structure(query):
    cs = []
    for _, _, t in iter_triples(query.where):
        if t.predicate is RDF_TYPE:
            if isinstance(t.object, EntityIri):
                cs.append(Correspondence(Atom(t.object), Atom(_to_target(t.object))))
        else:
            cs.append(Correspondence(Atom(t.predicate), Atom(_to_target(t.predicate)), entity="property"))
    [(out, rep)] = rewrite_query(query, build_dictionary(cs))
    assert out.projection == query.projection
    assert out.where == _flip_query(query)
    assert rep.dropped_variables == set()
