"""Rewrite source-vocabulary queries into target-vocabulary queries.

Each dictionary key is compiled into a small graph pattern.  Keys are
matched against the query's triples, longest pattern first, and each match
is replaced by the compiled pattern of an equivalent target member.  Keys
with several target members make the rewrite branch into one output query
per combination of choices.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import reduce
from itertools import permutations, product
from typing import Callable, Iterable

from .alignment import PROPERTY, AlignmentDictionary, Correspondence, DictionaryValue
from .errors import KeyNotFoundError, RewriteError, UnmappedVocabularyError
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
    sort_key,
)
from .sparql import (
    RDF_TYPE,
    GroupPattern,
    SelectQuery,
    Term,
    TriplePattern,
    Variable,
    group_variables,
    iter_triples,
    query_variables,
)

APPROXIMATED = "restriction approximated existentially"


class FreshVariables:
    """Hands out ``v<k>`` names not already taken, continuing the numbering."""

    def __init__(self, taken: Iterable[str] = (), prefix: str = "v"):
        self.prefix = prefix
        self.taken = set(taken)
        nums = [int(m.group(1)) for n in self.taken if (m := re.fullmatch(rf"{prefix}(\d+)", n))]
        self.counter = max(nums, default=0) + 1

    def __call__(self) -> Variable:
        while f"{self.prefix}{self.counter}" in self.taken:
            self.counter += 1
        name = f"{self.prefix}{self.counter}"
        self.taken.add(name)
        self.counter += 1
        return Variable(name)


@dataclass(frozen=True)
class PatternBgp:
    anchor: Variable
    triples: tuple[TriplePattern, ...] = ()
    disjunctive: tuple["PatternBgp", ...] | None = None
    warnings: tuple[str, ...] = ()

    def triple_count(self) -> int:
        return len(self.triples) + sum(alt.triple_count() for alt in self.disjunctive or ())

    def variables(self) -> list[str]:
        """Pattern variables in order of first use."""
        seen: list[str] = []
        for t in self.triples:
            for term in t.terms():
                if isinstance(term, Variable) and term.name not in seen:
                    seen.append(term.name)
        for alt in self.disjunctive or ():
            for name in alt.variables():
                if name not in seen:
                    seen.append(name)
        return seen

    def to_group(self, subst: dict[Variable, Term] | None = None) -> GroupPattern:
        subst = subst or {}
        triples = tuple(_substitute(t, subst) for t in self.triples)
        union = None
        if self.disjunctive:
            union = tuple(alt.to_group(subst) for alt in self.disjunctive)
        return GroupPattern(triples, union)


def _substitute(t: TriplePattern, subst: dict) -> TriplePattern:
    return TriplePattern(*(subst.get(term, term) for term in t.terms()))


def _merge_warnings(*groups: tuple[str, ...]) -> tuple[str, ...]:
    out: list[str] = []
    for group in groups:
        for w in group:
            if w not in out:
                out.append(w)
    return tuple(out)


def _conjoin(a: PatternBgp, b: PatternBgp) -> PatternBgp:
    if a.disjunctive is None:
        disjunctive = b.disjunctive
    elif b.disjunctive is None:
        disjunctive = a.disjunctive
    else:
        # (A1 | A2) and (B1 | B2): push the second block into every branch of the first
        block = PatternBgp(a.anchor, (), b.disjunctive)
        disjunctive = tuple(_conjoin(alt, block) for alt in a.disjunctive)
    return PatternBgp(a.anchor, a.triples + b.triples, disjunctive, _merge_warnings(a.warnings, b.warnings))


def _compile(expr: ClassExpression, node: Variable, fresh: Callable[[], Variable]) -> PatternBgp:
    if isinstance(expr, Atom):
        return PatternBgp(node, (TriplePattern(node, RDF_TYPE, expr.iri),))
    if isinstance(expr, And):
        return reduce(_conjoin, (_compile(c, node, fresh) for c in expr.children))
    if isinstance(expr, Or):
        return PatternBgp(node, (), tuple(_compile(c, node, fresh) for c in expr.children))
    if isinstance(expr, DataValue):
        return PatternBgp(node, (TriplePattern(node, expr.prop, expr.literal),))
    if isinstance(expr, (Some, Only, Card)):
        y = fresh()
        warnings = () if isinstance(expr, Some) else (APPROXIMATED,)
        head = PatternBgp(node, (TriplePattern(node, expr.prop, y),), None, warnings)
        if expr.filler is None:
            return head
        return _conjoin(head, _compile(expr.filler, y, fresh))
    raise TypeError(f"not a class expression: {expr!r}")


def compile_pattern(
    expr: ClassExpression,
    anchor: Variable | str = "v1",
    fresh: Callable[[], Variable] | None = None,
) -> PatternBgp:
    """Turn a class expression into triple patterns rooted at ``anchor``.

    Atoms become ``rdf:type`` triples, ``and`` conjoins, ``or`` yields
    alternatives, ``some`` introduces a fresh variable for the filler and
    ``value`` emits a literal-object triple.  ``only`` and cardinality
    restrictions are compiled like ``some`` and flagged in ``warnings``.
    """
    if isinstance(anchor, str):
        anchor = Variable(anchor)
    if fresh is None:
        fresh = FreshVariables({anchor.name})
    return _compile(expr, anchor, fresh)


# -- matching --------------------------------------------------------------------------

@dataclass(frozen=True)
class MatchBinding:
    mapping: tuple[tuple[Variable, Term], ...]
    consumed: tuple[int, ...]

    def __getitem__(self, var: Variable) -> Term:
        for k, v in self.mapping:
            if k == var:
                return v
        raise KeyError(var)

    def get(self, var: Variable, default=None):
        try:
            return self[var]
        except KeyError:
            return default

    def as_dict(self) -> dict[Variable, Term]:
        return dict(self.mapping)


def _unify(pt: TriplePattern, qt: TriplePattern, mapping: dict, anchor: Variable) -> dict | None:
    out = None
    for p_term, q_term in zip(pt.terms(), qt.terms()):
        if isinstance(p_term, Variable):
            bound = (out or mapping).get(p_term)
            if bound is not None:
                if bound != q_term:
                    return None
                continue
            if p_term == anchor and not isinstance(q_term, Variable):
                return None
            if out is None:
                out = dict(mapping)
            out[p_term] = q_term
        elif p_term != q_term:
            return None
    return mapping if out is None else out


def match_pattern(
    p: PatternBgp,
    g: GroupPattern,
    available: Iterable[int] | None = None,
    initial: dict[Variable, Term] | None = None,
) -> list[MatchBinding]:
    """Every homomorphism from ``p.triples`` into the triples of ``g``.

    The anchor only maps to query variables.  Bindings are ordered by the
    indices of the query triples they consume.
    """
    if p.disjunctive is not None:
        raise ValueError("disjunctive patterns are matched branch by branch")
    indices = sorted(range(len(g.triples)) if available is None else available)
    found: set[tuple[tuple[int, ...], tuple]] = set()

    def search(k: int, mapping: dict, used: tuple[int, ...]):
        if k == len(p.triples):
            key = tuple(sorted(mapping.items(), key=lambda kv: kv[0].name))
            found.add((tuple(sorted(used)), key))
            return
        for i in indices:
            if i in used:
                continue
            m = _unify(p.triples[k], g.triples[i], mapping, p.anchor)
            if m is not None:
                search(k + 1, m, used + (i,))

    search(0, dict(initial or {}), ())
    ordered = sorted(found, key=lambda item: (item[0], repr(item[1])))
    return [MatchBinding(mapping, consumed) for consumed, mapping in ordered]


# -- rewriting --------------------------------------------------------------------------

@dataclass
class RewriteReport:
    applied: list[tuple[Correspondence, MatchBinding]] = field(default_factory=list)
    dropped_variables: set[str] = field(default_factory=set)
    unmapped_iris: set[str] = field(default_factory=set)
    warnings: list[str] = field(default_factory=list)
    confidence: float = 1.0

    def to_json(self) -> dict:
        return {
            "confidence": self.confidence,
            "applied": [
                {
                    "source": str(c.source),
                    "target": str(c.target),
                    "entity": c.entity,
                    "confidence": c.confidence,
                    "origin": c.origin.value,
                    "binding": {var.name: _term_json(term) for var, term in b.mapping},
                    "consumed": list(b.consumed),
                }
                for c, b in self.applied
            ],
            "dropped_variables": sorted(self.dropped_variables),
            "unmapped_iris": sorted(self.unmapped_iris),
            "warnings": list(self.warnings),
        }


def _term_json(term: Term) -> str:
    if isinstance(term, EntityIri):
        return term.qname
    return str(term)


@dataclass
class _Application:
    key: ClassExpression
    pattern: PatternBgp
    binding: MatchBinding
    takes_union: bool = False


@dataclass
class _GroupPlan:
    group: GroupPattern
    apps: list[_Application]
    consumed: set[int]
    branches: list["_GroupPlan"] | None
    union_taken: bool


class _Rewriter:
    def __init__(self, q: SelectQuery, d: AlignmentDictionary):
        self.q = q
        self.d = d
        self.occurrences: dict[str, set[tuple[tuple[int, ...], int]]] = {}
        for path, i, t in iter_triples(q.where):
            for term in t.terms():
                if isinstance(term, Variable):
                    self.occurrences.setdefault(term.name, set()).add((path, i))
        candidates = []
        for key in d:
            pattern = compile_pattern(key, Variable("x"), FreshVariables({"x"}, prefix="y"))
            candidates.append((key, pattern))
        candidates.sort(key=lambda kp: (-kp[1].triple_count(), -d[kp[0]][0].confidence, sort_key(kp[0])))
        self.candidates = candidates

    def safe(self, binding: MatchBinding, anchor: Variable, path: tuple[int, ...], extra=()) -> bool:
        """Internal pattern nodes must map to distinct variables used nowhere else."""
        images = []
        for var, term in binding.mapping:
            if var == anchor:
                continue
            if not isinstance(term, Variable):
                return False
            images.append(term)
        anchor_image = binding.get(anchor)
        if len(set(images)) != len(images) or anchor_image in images:
            return False
        allowed = {(path, i) for i in binding.consumed} | set(extra)
        return all(self.occurrences.get(v.name, set()) <= allowed for v in images)

    def match_union(self, pattern: PatternBgp, group: GroupPattern, path, available) -> MatchBinding | None:
        branches = group.union
        alts = pattern.disjunctive
        if branches is None or len(alts) != len(branches):
            return None
        if any(alt.disjunctive is not None for alt in alts):
            return None
        if any(b.union is not None for b in branches):
            return None
        head = PatternBgp(pattern.anchor, pattern.triples)
        heads = match_pattern(head, group, available) if pattern.triples else [MatchBinding((), ())]
        for hb in heads:
            if pattern.triples and not self.safe(hb, pattern.anchor, path):
                continue
            for perm in permutations(range(len(branches))):
                anchor_image = hb.get(pattern.anchor)
                ok = True
                for alt, b in zip(alts, perm):
                    branch = branches[b]
                    initial = {} if anchor_image is None else {pattern.anchor: anchor_image}
                    hit = None
                    for cand in match_pattern(alt, branch, None, initial):
                        if len(cand.consumed) == len(branch.triples) and self.safe(cand, pattern.anchor, path + (b,)):
                            hit = cand
                            break
                    if hit is None:
                        ok = False
                        break
                    anchor_image = hit[pattern.anchor]
                if ok:
                    mapping = dict(hb.mapping)
                    mapping[pattern.anchor] = anchor_image
                    key = tuple(sorted(mapping.items(), key=lambda kv: kv[0].name))
                    return MatchBinding(key, hb.consumed)
        return None

    def plan(self, group: GroupPattern, path: tuple[int, ...] = ()) -> _GroupPlan:
        available = set(range(len(group.triples)))
        apps: list[_Application] = []
        union_taken = False
        for key, pattern in self.candidates:
            if pattern.disjunctive is not None:
                if not union_taken and group.union is not None:
                    binding = self.match_union(pattern, group, path, available)
                    if binding is not None:
                        apps.append(_Application(key, pattern, binding, True))
                        available -= set(binding.consumed)
                        union_taken = True
                continue
            while True:
                hit = next(
                    (b for b in match_pattern(pattern, group, available) if self.safe(b, pattern.anchor, path)),
                    None,
                )
                if hit is None:
                    break
                apps.append(_Application(key, pattern, hit))
                available -= set(hit.consumed)
        branches = None
        if group.union is not None and not union_taken:
            branches = [self.plan(b, path + (i,)) for i, b in enumerate(group.union)]
        consumed = set(range(len(group.triples))) - available
        return _GroupPlan(group, apps, consumed, branches, union_taken)


def _walk(plan: _GroupPlan):
    yield plan
    for b in plan.branches or ():
        yield from _walk(b)


def _residual_triples(plan: _GroupPlan):
    for node in _walk(plan):
        for i, t in enumerate(node.group.triples):
            if i not in node.consumed:
                yield t


def _conjoin_union(g: GroupPattern, branches: tuple[GroupPattern, ...]) -> GroupPattern:
    if g.union is None:
        return GroupPattern(g.triples, branches)
    return GroupPattern(g.triples, tuple(_conjoin_union(b, branches) for b in g.union))


class _Builder:
    def __init__(self, d: AlignmentDictionary, choice: dict, fresh: FreshVariables, report: RewriteReport):
        self.d = d
        self.choice = choice
        self.fresh = fresh
        self.report = report

    def emit(self, app: _Application, triples: list, unions: list):
        value: DictionaryValue = self.choice[("class", app.key)]
        anchor_image = app.binding[app.pattern.anchor]
        target = compile_pattern(value.target, anchor_image, self.fresh)
        triples.extend(target.triples)
        if target.disjunctive:
            unions.append(tuple(alt.to_group() for alt in target.disjunctive))
        self.report.applied.append(
            (Correspondence(app.key, value.target, value.confidence, value.origin), app.binding)
        )
        for w in _merge_warnings(app.pattern.warnings, target.warnings):
            if w not in self.report.warnings:
                self.report.warnings.append(w)

    def rename(self, t: TriplePattern, index: int) -> TriplePattern:
        p = t.predicate
        if isinstance(p, EntityIri) and p.side is Side.SOURCE and p in self.d.properties:
            value: DictionaryValue = self.choice[("property", p)]
            self.report.applied.append(
                (
                    Correspondence(Atom(p), value.target, value.confidence, value.origin, PROPERTY),
                    MatchBinding((), (index,)),
                )
            )
            return TriplePattern(t.subject, value.target.iri, t.object)
        return t

    def build(self, plan: _GroupPlan) -> GroupPattern:
        starts = {min(a.binding.consumed): a for a in plan.apps if a.binding.consumed}
        floating = [a for a in plan.apps if not a.binding.consumed]
        triples: list[TriplePattern] = []
        unions: list[tuple[GroupPattern, ...]] = []
        for i, t in enumerate(plan.group.triples):
            if i in starts:
                self.emit(starts[i], triples, unions)
            elif i not in plan.consumed:
                triples.append(self.rename(t, i))
        for app in floating:
            self.emit(app, triples, unions)
        if plan.branches is not None:
            unions.insert(0, tuple(self.build(b) for b in plan.branches))
        g = GroupPattern(tuple(triples))
        for block in unions:
            g = _conjoin_union(g, block)
        return g


def _output_prefixes(q: SelectQuery, where: GroupPattern, prefixes: PrefixTable | None):
    if not q.prefixes:
        return ()
    declared = dict(q.prefixes)
    used = []
    for _, _, t in iter_triples(where):
        for term in t.terms():
            if isinstance(term, EntityIri) and term.prefix not in used:
                used.append(term.prefix)
    out = []
    if "rdf" in declared:
        out.append(("rdf", declared["rdf"]))
    ordered = [label for label, _ in (prefixes.target + prefixes.source if prefixes else ())]
    ordered += [label for label in declared if label not in ordered]
    for label in ordered:
        if label in used:
            ns = declared.get(label) or (prefixes.namespace(label) if prefixes else None)
            if ns is not None:
                out.append((label, ns))
    return tuple(out)


def rewrite_query(
    q: SelectQuery,
    d: AlignmentDictionary,
    strict: bool = True,
    prefixes: PrefixTable | None = None,
) -> list[tuple[SelectQuery, RewriteReport]]:
    """Rewrite ``q`` into every target-vocabulary variant ``d`` allows.

    Outputs are ordered by descending product of the confidences used.  In
    strict mode a source IRI that no correspondence covers raises
    ``UnmappedVocabularyError``; in lenient mode it is kept and reported.
    Variables that no longer occur are dropped from the projection.
    """
    rw = _Rewriter(q, d)
    plan = rw.plan(q.where)

    unmapped: set[str] = set()
    prop_keys: list[EntityIri] = []
    for t in _residual_triples(plan):
        for pos, term in zip(("s", "p", "o"), t.terms()):
            if not isinstance(term, EntityIri) or term.side is not Side.SOURCE:
                continue
            if pos == "p" and term in d.properties:
                if term not in prop_keys:
                    prop_keys.append(term)
            else:
                unmapped.add(term.qname)
    if unmapped and strict:
        raise UnmappedVocabularyError(unmapped)

    class_keys: list[ClassExpression] = []
    for node in _walk(plan):
        for app in node.apps:
            if app.key not in class_keys:
                class_keys.append(app.key)
    dims = [(("class", k), d[k]) for k in class_keys] + [(("property", p), d.properties[p]) for p in prop_keys]
    combos = list(product(*(range(len(values)) for _, values in dims)))

    def score(combo) -> float:
        return math.prod(values[i].confidence for (_, values), i in zip(dims, combo))

    combos.sort(key=lambda c: (-score(c), c))
    base_vars = query_variables(q)
    results = []
    for combo in combos:
        choice = {dim: values[i] for (dim, values), i in zip(dims, combo)}
        report = RewriteReport(confidence=score(combo), unmapped_iris=set(unmapped))
        if unmapped:
            report.warnings.append("unmapped source IRIs kept: " + ", ".join(sorted(unmapped)))
        builder = _Builder(d, choice, FreshVariables(base_vars), report)
        where = builder.build(plan)
        out_vars = group_variables(where)
        report.dropped_variables = base_vars - out_vars
        projection = tuple(v for v in q.projection if v in out_vars)
        if not projection:
            raise RewriteError("rewriting leaves no projected variable bound")
        results.append((SelectQuery(projection, where, _output_prefixes(q, where, prefixes)), report))
    return results


# -- query generation from a dictionary entry -----------------------------------------

def query_for_member(expr: ClassExpression) -> SelectQuery:
    """``SELECT DISTINCT`` over the compiled member, anchored at ``?v1``."""
    pattern = compile_pattern(expr, "v1")
    projection = ["v1"] if pattern.disjunctive else pattern.variables()
    return SelectQuery(tuple(projection), pattern.to_group())


def query_for_property(prop: EntityIri) -> SelectQuery:
    t = TriplePattern(Variable("v1"), prop, Variable("v2"))
    return SelectQuery(("v1", "v2"), GroupPattern((t,)))


def generate_query_pair(key: ClassExpression, d: AlignmentDictionary) -> tuple[SelectQuery, list[SelectQuery]]:
    if key not in d:
        raise KeyNotFoundError(f"no dictionary entry for {key}")
    return query_for_member(key), [query_for_member(v.target) for v in d[key]]
