import json

import pytest

from alignrw.alignment import (
    Correspondence,
    Origin,
    PatternKind,
    alignment_to_json,
    build_dictionary,
    classify_pattern,
    load_alignment,
    parse_alignment,
    validate_alignment,
)
from alignrw.cli import bundled
from alignrw.errors import AlignmentError, SideError
from alignrw.expressions import Atom, EntityIri, Side, parse_class_expression


def src(text):
    return parse_class_expression(text, Side.SOURCE)


def tgt(text):
    return parse_class_expression(text, Side.TARGET)


def entry(source, target, **extra):
    return {"source": source, "target": target, **extra}


def doc(*entries):
    return {"correspondences": list(entries)}


@pytest.mark.parametrize(
    "source, target, kind",
    [
        ("Conference_Banquet", "ConferenceDinner", PatternKind.CLASS_SS),
        ("Event", "Conference or ConferenceEvent or ConferenceSession", PatternKind.CU),
        ("Conference_Session", "Session and (isPartOf some Conference)", PatternKind.CAT),
        ("Rejected_Paper", "Paper and (accepted value false)", PatternKind.CAV),
        ("Accepted_Paper", "Paper and Accepted", PatternKind.CI),
        ("A and B", "C and D", PatternKind.CC),
        ("Person", "hasRole only Author", PatternKind.CAT),
    ],
)
def test_classify_pattern(source, target, kind):
    assert classify_pattern(Correspondence(src(source), tgt(target))) is kind


def test_property_correspondence():
    a = parse_alignment(doc(entry("writtenBy", "isWrittenBy", entity="property")))
    c = a.correspondences[0]
    assert classify_pattern(c) is PatternKind.PROP_SS
    d = build_dictionary(a.correspondences)
    assert len(d) == 0
    assert list(d.properties) == [EntityIri(Side.SOURCE, "onto_Source", "writtenBy")]


def test_confidence_out_of_range():
    with pytest.raises(AlignmentError, match="confidence out of range: 1.5"):
        Correspondence(src("A"), tgt("B"), 1.5)
    with pytest.raises(AlignmentError) as info:
        parse_alignment(doc(entry("A", "B"), entry("A", "C", confidence=-0.1)))
    assert info.value.entry == 2


def test_reversed_sides_rejected():
    with pytest.raises(SideError):
        Correspondence(tgt("B"), src("A"))
    with pytest.raises(AlignmentError, match="side"):
        parse_alignment(doc(entry("target_onto:B", "onto_Source:A")))


def test_intra_side_entries_are_kept_but_not_indexed():
    a = parse_alignment(doc(entry("A", "onto_Source:B and onto_Source:C"), entry("A", "D")))
    assert not a.correspondences[0].is_cross
    d = build_dictionary(a.correspondences)
    assert list(d) == [src("A")]
    assert [v.target for v in d[src("A")]] == [tgt("D")]


def test_dictionary_merges_duplicates_and_orders_values():
    cs = [
        Correspondence(src("A"), tgt("B"), 0.5),
        Correspondence(src("A"), tgt("B"), 0.8, Origin.DERIVED),
        Correspondence(src("A"), tgt("C"), 0.8),
        Correspondence(src("A"), tgt("Z"), 0.9),
    ]
    values = build_dictionary(cs)[src("A")]
    assert [(str(v.target), v.confidence, v.origin) for v in values] == [
        ("Z", 0.9, Origin.ASSERTED),
        ("B", 0.8, Origin.DERIVED),
        ("C", 0.8, Origin.ASSERTED),
    ]


def test_dictionary_keys_are_canonical():
    d = build_dictionary([Correspondence(src("B and A"), tgt("X"))])
    assert src("A and B") in d


def test_json_round_trip_of_bundled_fixture():
    a = load_alignment(bundled("ekaw-edas-mini.align.json"))
    again = parse_alignment(alignment_to_json(a))
    assert again == a


def test_inverted_alignment_swaps_sides():
    original = load_alignment(bundled("ekaw-edas-mini.align.json"))
    a = original.inverted()
    first = a.correspondences[0]
    assert str(first) == "ConferenceDinner ≡ Conference_Banquet"
    assert first.source.side is Side.SOURCE
    assert a.prefixes.source == (("target_onto", "http://edas#"),)
    assert a.inverted() == original


def test_json_errors_carry_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "correspondences": [\n    {"source": "A",\n  ]\n}\n')
    with pytest.raises(AlignmentError) as info:
        load_alignment(p)
    assert info.value.line is not None and info.value.line >= 3


@pytest.mark.parametrize(
    "data",
    [
        [],
        {"correspondences": {}},
        doc({"source": "A"}),
        doc(entry("A", "B and")),
        doc(entry("A", "B", confidence="high")),
        doc(entry("A", "B", relation="subsumption")),
        doc(entry("A", "B and C", entity="property")),
        {"source_prefixes": {"rdf": "http://x#"}, "correspondences": []},
    ],
)
def test_malformed_alignments(data):
    with pytest.raises(AlignmentError):
        parse_alignment(data)


def test_validate_reports_kinds(tmp_path):
    p = tmp_path / "a.json"
    p.write_text(json.dumps(doc(entry("A", "B"), entry("C", "D or E"))))
    _, kinds = validate_alignment(p)
    assert [k for _, k in kinds] == [PatternKind.CLASS_SS, PatternKind.CU]


def test_atom_helper_types():
    c = Correspondence(src("A"), tgt("B"))
    assert isinstance(c.source, Atom) and c.is_cross
