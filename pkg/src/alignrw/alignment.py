"""Correspondences, alignment files and the source-to-target dictionary."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import AlignmentError, ExpressionSyntaxError, SideError
from .expressions import (
    And,
    Atom,
    Card,
    ClassExpression,
    DataValue,
    EntityIri,
    Only,
    Or,
    PrefixTable,
    Side,
    Some,
    map_iris,
    parse_class_expression,
    serialize_class_expression,
    sort_key,
)


class Origin(str, Enum):
    ASSERTED = "asserted"
    DERIVED = "derived"


class PatternKind(str, Enum):
    CLASS_SS = "CLASS_SS"
    CAT = "CAT"
    CAV = "CAV"
    CU = "CU"
    CI = "CI"
    CC = "CC"
    PROP_SS = "PROP_SS"


CLASS = "class"
PROPERTY = "property"


@dataclass(frozen=True)
class Correspondence:
    """An equivalence between two members with a confidence in [0, 1].

    Cross-ontology correspondences have a source-side ``source`` and a
    target-side ``target``.  Members on the same side are intra-ontology
    equivalences; they feed the closure engine but never the dictionary.
    """

    source: ClassExpression
    target: ClassExpression
    confidence: float = 1.0
    origin: Origin = Origin.ASSERTED
    entity: str = CLASS
    relation: str = "equivalence"

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise AlignmentError(f"confidence out of range: {self.confidence}")
        if self.relation != "equivalence":
            raise AlignmentError(f"unsupported relation {self.relation!r}")
        if self.source.side is Side.TARGET and self.target.side is Side.SOURCE:
            raise SideError("source member uses target vocabulary and target member uses source vocabulary")
        if self.entity == PROPERTY:
            if not (isinstance(self.source, Atom) and isinstance(self.target, Atom)):
                raise AlignmentError("property correspondences relate two named properties")
        elif self.entity != CLASS:
            raise AlignmentError(f"unknown entity kind {self.entity!r}")

    @property
    def is_cross(self) -> bool:
        return self.source.side is Side.SOURCE and self.target.side is Side.TARGET

    def __str__(self) -> str:
        return f"{self.source} ≡ {self.target}"


@dataclass(frozen=True)
class Alignment:
    prefixes: PrefixTable
    correspondences: tuple[Correspondence, ...]

    def inverted(self) -> "Alignment":
        """Swap the roles of the two ontologies."""
        return Alignment(self.prefixes.swapped(), tuple(invert(c) for c in self.correspondences))


def _flip(expr: ClassExpression) -> ClassExpression:
    return map_iris(expr, EntityIri.flipped)


def invert(c: Correspondence) -> Correspondence:
    return replace(c, source=_flip(c.target), target=_flip(c.source))


def classify_pattern(c: Correspondence) -> PatternKind:
    if c.entity == PROPERTY:
        return PatternKind.PROP_SS
    src_atom, tgt_atom = isinstance(c.source, Atom), isinstance(c.target, Atom)
    if src_atom and tgt_atom:
        return PatternKind.CLASS_SS
    if not src_atom and not tgt_atom:
        return PatternKind.CC
    complex_member = c.target if src_atom else c.source
    if isinstance(complex_member, Or):
        return PatternKind.CU
    parts = complex_member.children if isinstance(complex_member, And) else (complex_member,)
    if any(isinstance(p, (Some, Only, Card)) for p in parts):
        return PatternKind.CAT
    if any(isinstance(p, DataValue) for p in parts):
        return PatternKind.CAV
    return PatternKind.CI


# -- alignment file --------------------------------------------------------------

def _parse_member(text, side: Side, prefixes: PrefixTable, entry: int) -> ClassExpression:
    if not isinstance(text, str):
        raise AlignmentError("member must be an expression string", entry=entry)
    try:
        return parse_class_expression(text, side, prefixes)
    except (ExpressionSyntaxError, SideError) as exc:
        raise AlignmentError(f"{exc} in {text!r}", entry=entry) from None


def parse_alignment(data: Mapping) -> Alignment:
    if not isinstance(data, Mapping):
        raise AlignmentError("alignment file must hold a JSON object")
    try:
        if "source_prefixes" in data or "target_prefixes" in data:
            prefixes = PrefixTable.from_dicts(data.get("source_prefixes", {}), data.get("target_prefixes", {}))
        else:
            prefixes = PrefixTable.default()
    except (ValueError, AttributeError) as exc:
        raise AlignmentError(f"bad prefix table: {exc}") from None
    entries = data.get("correspondences", [])
    if not isinstance(entries, list):
        raise AlignmentError("'correspondences' must be a list")
    out = []
    for i, entry in enumerate(entries, 1):
        if not isinstance(entry, Mapping) or "source" not in entry or "target" not in entry:
            raise AlignmentError("correspondence needs 'source' and 'target'", entry=i)
        source = _parse_member(entry["source"], Side.SOURCE, prefixes, i)
        target = _parse_member(entry["target"], Side.TARGET, prefixes, i)
        confidence = entry.get("confidence", 1.0)
        if isinstance(confidence, bool) or not isinstance(confidence, (int, float)):
            raise AlignmentError("confidence must be a number", entry=i)
        try:
            out.append(
                Correspondence(
                    source,
                    target,
                    float(confidence),
                    Origin(entry.get("origin", "asserted")),
                    entry.get("entity", CLASS),
                    entry.get("relation", "equivalence"),
                )
            )
        except AlignmentError as exc:
            raise AlignmentError(str(exc), entry=i) from None
        except (SideError, ValueError) as exc:
            raise AlignmentError(f"side violation: {exc}" if isinstance(exc, SideError) else str(exc), entry=i) from None
    return Alignment(prefixes, tuple(out))


def load_alignment(path: str | Path) -> Alignment:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise AlignmentError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    return parse_alignment(data)


def format_member(expr: ClassExpression, field_side: Side, prefixes: PrefixTable) -> str:
    """Serialize a member so that it reparses under ``field_side``."""
    try:
        default = prefixes.default_prefix(field_side)
    except SideError:
        default = None
    plain = expr.side is field_side and all(iri.prefix == default for iri in expr.iris())
    return serialize_class_expression(expr, qualified=not plain)


def alignment_to_json(alignment: Alignment, include_origin: bool = False) -> dict:
    prefixes = alignment.prefixes
    items = []
    for c in alignment.correspondences:
        item = {
            "source": format_member(c.source, Side.SOURCE, prefixes),
            "target": format_member(c.target, Side.TARGET, prefixes),
            "relation": c.relation,
            "confidence": c.confidence,
        }
        if c.entity != CLASS:
            item["entity"] = c.entity
        if include_origin:
            item["origin"] = c.origin.value
        items.append(item)
    return {
        "source_prefixes": dict(prefixes.source),
        "target_prefixes": dict(prefixes.target),
        "correspondences": items,
    }


# -- dictionary ---------------------------------------------------------------------

@dataclass(frozen=True)
class DictionaryValue:
    target: ClassExpression
    confidence: float
    origin: Origin


def _value_order(v: DictionaryValue):
    return (-v.confidence, sort_key(v.target))


class AlignmentDictionary(Mapping):
    """Canonical source expression -> ordered equivalent target expressions.

    Class correspondences live in the mapping itself; property
    correspondences are kept apart in ``properties`` because they rename
    predicates rather than match subgraphs.
    """

    def __init__(self, entries=None, properties=None):
        self._entries: dict[ClassExpression, tuple[DictionaryValue, ...]] = dict(entries or {})
        self.properties: dict[EntityIri, tuple[DictionaryValue, ...]] = dict(properties or {})

    def __getitem__(self, key: ClassExpression) -> tuple[DictionaryValue, ...]:
        return self._entries[key]

    def __iter__(self) -> Iterator[ClassExpression]:
        return iter(sorted(self._entries, key=sort_key))

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, AlignmentDictionary):
            return NotImplemented
        return self._entries == other._entries and self.properties == other.properties

    def correspondences(self) -> list[Correspondence]:
        out = []
        for key in self:
            for v in self[key]:
                out.append(Correspondence(key, v.target, v.confidence, v.origin))
        for prop in sorted(self.properties):
            for v in self.properties[prop]:
                out.append(Correspondence(Atom(prop), v.target, v.confidence, v.origin, PROPERTY))
        return out


def _merge(values: Iterable[DictionaryValue]) -> tuple[DictionaryValue, ...]:
    best: dict[ClassExpression, DictionaryValue] = {}
    for v in values:
        old = best.get(v.target)
        if old is None or (v.confidence, v.origin is Origin.ASSERTED) > (old.confidence, old.origin is Origin.ASSERTED):
            best[v.target] = v
    return tuple(sorted(best.values(), key=_value_order))


def build_dictionary(cs: Iterable[Correspondence]) -> AlignmentDictionary:
    classes: dict[ClassExpression, list[DictionaryValue]] = {}
    props: dict[EntityIri, list[DictionaryValue]] = {}
    for c in cs:
        if not c.is_cross:
            continue
        value = DictionaryValue(c.target, c.confidence, c.origin)
        if c.entity == PROPERTY:
            props.setdefault(c.source.iri, []).append(value)
        else:
            classes.setdefault(c.source, []).append(value)
    return AlignmentDictionary(
        {k: _merge(v) for k, v in classes.items()},
        {k: _merge(v) for k, v in props.items()},
    )


def validate_alignment(path: str | Path) -> tuple[Alignment, list[tuple[Correspondence, PatternKind]]]:
    alignment = load_alignment(path)
    return alignment, [(c, classify_pattern(c)) for c in alignment.correspondences]


__all__ = [
    "Alignment",
    "AlignmentDictionary",
    "Correspondence",
    "DictionaryValue",
    "Origin",
    "PatternKind",
    "alignment_to_json",
    "build_dictionary",
    "classify_pattern",
    "invert",
    "load_alignment",
    "parse_alignment",
]
