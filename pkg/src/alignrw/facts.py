"""In-memory fact stores, a BGP evaluator and a generator of aligned facts.

Together they check a rewrite semantically: facts are generated so that the
alignment holds on them, the original query is run on the source facts,
each rewrite on the target facts, and the two answers must agree.
"""

from __future__ import annotations

import logging
import random
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .alignment import PROPERTY, AlignmentDictionary, Correspondence
from .closure import build_equivalence_graph
from .errors import FactsError, QuerySyntaxError, RewriteError
from .expressions import (
    And,
    Atom,
    Card,
    ClassExpression,
    DataValue,
    EntityIri,
    Literal,
    Only,
    Or,
    PrefixTable,
    Side,
    Some,
)
from .rewrite import query_for_member, query_for_property, rewrite_query
from .sparql import (
    RDF_TYPE,
    GroupPattern,
    RdfType,
    SelectQuery,
    TriplePattern,
    Variable,
    format_term,
    tokenize,
)

log = logging.getLogger(__name__)

CHASE_ROUNDS = 100
NOISE_RATIO = 0.5


# -- stores -----------------------------------------------------------------------------

def _fact_key(t: TriplePattern):
    return tuple(format_term(x) for x in t.terms())


class FactStore:
    """A set of ground triples over one ontology's vocabulary."""

    def __init__(self, side: Side, triples: Iterable[TriplePattern] = (), prefixes: PrefixTable | None = None):
        self.side = side
        self.prefixes = prefixes or PrefixTable.default()
        self.triples: frozenset[TriplePattern] = frozenset(triples)
        self.by_p: dict = defaultdict(list)
        self.by_sp: dict = defaultdict(list)
        self.by_po: dict = defaultdict(list)
        for t in sorted(self.triples, key=_fact_key):
            self._check(t)
            self.by_p[t.predicate].append(t)
            self.by_sp[(t.subject, t.predicate)].append(t)
            self.by_po[(t.predicate, t.object)].append(t)

    def _check(self, t: TriplePattern):
        for term in t.terms():
            if isinstance(term, Variable):
                raise FactsError(f"facts must be ground: {t}")
            if isinstance(term, EntityIri) and term.side is not self.side:
                raise FactsError(f"{term.qname} is not {self.side.value} vocabulary")

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self) -> Iterator[TriplePattern]:
        return iter(sorted(self.triples, key=_fact_key))

    def __contains__(self, t) -> bool:
        return t in self.triples

    def __eq__(self, other) -> bool:
        if not isinstance(other, FactStore):
            return NotImplemented
        return self.side is other.side and self.triples == other.triples

    def candidates(self, s, p, o) -> list[TriplePattern]:
        """Facts that could match a pattern whose bound terms are ``s``, ``p``, ``o`` (``None`` if free)."""
        if p is None:
            return sorted(self.triples, key=_fact_key)
        if s is not None:
            return self.by_sp.get((s, p), [])
        if o is not None:
            return self.by_po.get((p, o), [])
        return self.by_p.get(p, [])


def _parse_fact(line_text: str, lineno: int, side: Side, prefixes: PrefixTable) -> TriplePattern | None:
    try:
        tokens = tokenize(line_text)[:-1]
    except QuerySyntaxError as exc:
        raise FactsError(str(exc), lineno) from None
    if not tokens:
        return None
    if tokens[-1].kind == "punct" and tokens[-1].text == ".":
        tokens = tokens[:-1]
    if len(tokens) != 3:
        raise FactsError("expected 'subject predicate object .'", lineno)
    terms = []
    for position, tok in zip(("subject", "predicate", "object"), tokens):
        if tok.kind == "pname":
            label, _, local = tok.text.partition(":")
            if label == "rdf" and local == "type" and position == "predicate":
                terms.append(RDF_TYPE)
                continue
            found = prefixes.side_of(label)
            if found is None or not local:
                raise FactsError(f"unknown name {tok.text}", lineno)
            if found is not side:
                raise FactsError(f"{tok.text} is {found.value} vocabulary in a {side.value} facts file", lineno)
            terms.append(EntityIri(side, label, local))
        elif tok.kind == "word" and tok.text == "a" and position == "predicate":
            terms.append(RDF_TYPE)
        elif position == "object" and tok.kind == "word" and tok.text in ("true", "false"):
            terms.append(Literal.boolean(tok.text == "true"))
        elif position == "object" and tok.kind == "int":
            terms.append(Literal.integer(int(tok.text)))
        elif position == "object" and tok.kind == "str":
            terms.append(Literal.string(tok.text[1:-1].replace('\\"', '"').replace("\\\\", "\\")))
        else:
            raise FactsError(f"unexpected {tok.text!r} in {position} position", lineno)
    return TriplePattern(*terms)


def load_facts(path: str | Path, side: Side, prefixes: PrefixTable | None = None) -> FactStore:
    prefixes = prefixes or PrefixTable.default()
    facts = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        fact = _parse_fact(line, lineno, side, prefixes)
        if fact is not None:
            facts.append(fact)
    return FactStore(side, facts, prefixes)


def write_facts(store: FactStore, path: str | Path):
    lines = [f"# {store.side.value} facts"]
    lines += [f"{t} ." for t in store]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- evaluation ---------------------------------------------------------------------------

@dataclass
class ResultSet:
    header: tuple[str, ...]
    rows: list[tuple]

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.header):
                raise ValueError("row width differs from header")

    def __len__(self) -> int:
        return len(self.rows)

    def project(self, columns: Iterable[str]) -> "ResultSet":
        columns = tuple(columns)
        idx = [self.header.index(c) for c in columns]
        return ResultSet(columns, [tuple(row[i] for i in idx) for row in self.rows])

    def neutral(self) -> list[tuple[str, ...]]:
        """Rows with IRIs reduced to local names, so both sides compare."""
        return sorted(tuple(_neutral(t) for t in row) for row in self.rows)


def _neutral(term) -> str:
    if isinstance(term, EntityIri):
        return term.local_name
    return str(term)


def _lookup(term, mu: dict):
    if isinstance(term, Variable):
        return mu.get(term)
    return term


def _bgp(triples: tuple[TriplePattern, ...], store: FactStore, mu: dict) -> Iterator[dict]:
    if not triples:
        yield mu
        return
    # evaluate the most constrained pattern first
    def bound(t):
        return -sum(_lookup(x, mu) is not None for x in t.terms())

    order = sorted(range(len(triples)), key=lambda i: (bound(triples[i]), i))
    first, rest = triples[order[0]], tuple(triples[i] for i in order[1:])
    s, p, o = (_lookup(x, mu) for x in first.terms())
    for fact in store.candidates(s, p, o):
        nu = dict(mu)
        ok = True
        for pat, val in zip(first.terms(), fact.terms()):
            if isinstance(pat, Variable):
                if nu.setdefault(pat, val) != val:
                    ok = False
                    break
            elif pat != val:
                ok = False
                break
        if ok:
            yield from _bgp(rest, store, nu)


def _solve(group: GroupPattern, store: FactStore, mu: dict) -> Iterator[dict]:
    for nu in _bgp(group.triples, store, mu):
        if group.union is None:
            yield nu
        else:
            for branch in group.union:
                yield from _solve(branch, store, nu)


def _align_labels(group: GroupPattern, q: SelectQuery, store: FactStore) -> GroupPattern:
    """Rename query prefixes that differ from the store's labels for the same namespace."""
    declared = dict(q.prefixes)
    renames = {}
    for label, ns in declared.items():
        if store.prefixes.side_of(label) is None:
            found = store.prefixes.find_namespace(ns)
            if found is not None:
                renames[label] = found[0]
    if not renames:
        return group

    def fix(term):
        if isinstance(term, EntityIri) and term.prefix in renames:
            return EntityIri(term.side, renames[term.prefix], term.local_name)
        return term

    def walk(g: GroupPattern) -> GroupPattern:
        triples = tuple(TriplePattern(*(fix(x) for x in t.terms())) for t in g.triples)
        return GroupPattern(triples, None if g.union is None else tuple(walk(b) for b in g.union))

    return walk(group)


def evaluate(q: SelectQuery, store: FactStore) -> ResultSet:
    where = _align_labels(q.where, q, store)
    header = q.projection
    rows = []
    seen = set()
    for mu in _solve(where, store, {}):
        row = tuple(mu.get(Variable(v)) for v in header)
        if q.distinct:
            if row in seen:
                continue
            seen.add(row)
        rows.append(row)
    return ResultSet(header, rows)


# -- aligned fact generation ------------------------------------------------------------

Fact = tuple  # (individual, predicate, object) with individuals as plain strings


def _instantiable(expr: ClassExpression) -> bool:
    if isinstance(expr, (Only, Card)):
        return False
    if isinstance(expr, (And, Or)):
        return all(_instantiable(c) for c in expr.children)
    if isinstance(expr, Some):
        return expr.filler is None or _instantiable(expr.filler)
    return True


class _World:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.facts: set[Fact] = set()
        self.counter = 0
        self.by_sp: dict = defaultdict(set)

    def individual(self) -> str:
        self.counter += 1
        return f"ind_{self.counter}"

    def add(self, fact: Fact) -> bool:
        if fact in self.facts:
            return False
        self.facts.add(fact)
        self.by_sp[(fact[0], fact[1])].add(fact[2])
        return True

    def holds(self, expr: ClassExpression, ind: str) -> bool:
        if isinstance(expr, Atom):
            return (ind, RDF_TYPE, expr.iri) in self.facts
        if isinstance(expr, And):
            return all(self.holds(c, ind) for c in expr.children)
        if isinstance(expr, Or):
            return any(self.holds(c, ind) for c in expr.children)
        if isinstance(expr, DataValue):
            return (ind, expr.prop, expr.literal) in self.facts
        if isinstance(expr, Some):
            fillers = self.by_sp.get((ind, expr.prop), ())
            return any(
                isinstance(y, str) and (expr.filler is None or self.holds(expr.filler, y)) for y in sorted(fillers)
            )
        raise TypeError(f"cannot instantiate {expr}")

    def instantiate(self, expr: ClassExpression, ind: str, out: list[Fact]):
        if isinstance(expr, Atom):
            out.append((ind, RDF_TYPE, expr.iri))
        elif isinstance(expr, And):
            for c in expr.children:
                self.instantiate(c, ind, out)
        elif isinstance(expr, Or):
            self.instantiate(self.rng.choice(expr.children), ind, out)
        elif isinstance(expr, DataValue):
            out.append((ind, expr.prop, expr.literal))
        elif isinstance(expr, Some):
            y = self.individual()
            out.append((ind, expr.prop, y))
            if expr.filler is not None:
                self.instantiate(expr.filler, y, out)
        else:
            raise TypeError(f"cannot instantiate {expr}")

    def subjects(self) -> list[str]:
        subs = {f[0] for f in self.facts} | {f[2] for f in self.facts if isinstance(f[2], str)}
        return sorted(subs, key=lambda s: int(s.split("_")[1]))


def _store(world: _World, side: Side, prefixes: PrefixTable) -> FactStore:
    label = prefixes.default_prefix(side)

    def ind(x):
        return EntityIri(side, label, x) if isinstance(x, str) else x

    triples = []
    for s, p, o in world.facts:
        vocab = o if p is RDF_TYPE else p
        if vocab.side is side:
            triples.append(TriplePattern(ind(s), p, ind(o)))
    return FactStore(side, triples, prefixes)


@dataclass
class GeneratedPair:
    source: FactStore
    target: FactStore
    warnings: list[str] = field(default_factory=list)

    def __iter__(self):
        return iter((self.source, self.target))


def generate_aligned_pair(
    cs: Iterable[Correspondence],
    n: int,
    seed: int,
    prefixes: PrefixTable | None = None,
) -> GeneratedPair:
    """Seeded source and target facts on which every correspondence holds.

    Each correspondence gets ``n`` individuals built from its source member,
    plus ``n // 2`` noise individuals (a decoy type or an incomplete copy of
    the member).  The facts are then saturated: an individual satisfying one
    member of an equivalence class receives facts for every other member,
    on both sides.  Classes containing ``only`` or cardinality restrictions
    are skipped with a warning.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    prefixes = prefixes or PrefixTable.default()
    cs = list(cs)
    rng = random.Random(seed)
    world = _World(rng)
    warnings: list[str] = []

    graph = build_equivalence_graph(cs)
    class_groups, prop_groups = [], []
    skipped = set()
    for comp in graph.components():
        members = [expr for _, expr in comp]
        if comp[0][0] == PROPERTY:
            prop_groups.append([m.iri for m in members])
        elif all(_instantiable(m) for m in members):
            class_groups.append(members)
        else:
            skipped.update(members)
            warnings.append("skipped (not instantiable): " + " ≡ ".join(str(m) for m in members))
    prop_of = {p: group for group in prop_groups for p in group}

    decoys = 0
    for c in cs:
        if c.source in skipped:
            continue
        if c.entity == PROPERTY:
            for _ in range(n):
                world.add((world.individual(), c.source.iri, world.individual()))
            continue
        for _ in range(n):
            out: list[Fact] = []
            world.instantiate(c.source, world.individual(), out)
            for f in out:
                world.add(f)
        for _ in range(int(n * NOISE_RATIO)):
            out = []
            world.instantiate(c.source, world.individual(), out)
            if len(out) > 1 and rng.random() < 0.5:
                out.pop()
            else:
                decoys += 1
                side = rng.choice((Side.SOURCE, Side.TARGET))
                decoy = EntityIri(side, prefixes.default_prefix(side), f"Decoy_{decoys}")
                out = [(out[0][0], RDF_TYPE, decoy)]
            for f in out:
                world.add(f)

    for _ in range(CHASE_ROUNDS):
        changed = False
        for s, p, o in sorted(world.facts, key=lambda f: tuple(map(str, f))):
            for q in prop_of.get(p, ()):
                changed |= world.add((s, q, o))
        for ind in world.subjects():
            for members in class_groups:
                if not any(world.holds(m, ind) for m in members):
                    continue
                for m in members:
                    if not world.holds(m, ind):
                        out = []
                        world.instantiate(m, ind, out)
                        for f in out:
                            changed |= world.add(f)
        if not changed:
            break
    else:
        warnings.append(f"saturation stopped after {CHASE_ROUNDS} rounds")

    for w in warnings:
        log.warning(w)
    return GeneratedPair(_store(world, Side.SOURCE, prefixes), _store(world, Side.TARGET, prefixes), warnings)


# -- oracle ---------------------------------------------------------------------------------

@dataclass
class OracleOutcome:
    correspondence: Correspondence
    passed: bool
    source_rows: int = 0
    rewrites: int = 0
    detail: str = ""


def check_correspondence(
    c: Correspondence,
    d: AlignmentDictionary,
    source: FactStore,
    target: FactStore,
    prefixes: PrefixTable | None = None,
) -> OracleOutcome:
    """Run the query for ``c.source`` on the source facts and every rewrite on the target facts."""
    q = query_for_property(c.source.iri) if c.entity == PROPERTY else query_for_member(c.source)
    expected = evaluate(q, source)
    try:
        rewrites = rewrite_query(q, d, strict=True, prefixes=prefixes)
    except RewriteError as exc:
        return OracleOutcome(c, False, len(expected), 0, f"rewrite failed: {exc}")
    if not expected.rows:
        return OracleOutcome(c, False, 0, len(rewrites), "no source answers; the check would be vacuous")
    for q2, _report in rewrites:
        want = sorted(set(expected.project(q2.projection).neutral()))
        got = evaluate(q2, target).neutral()
        if want != got:
            missing = sorted(set(want) - set(got))
            extra = sorted(set(got) - set(want))
            detail = (
                f"rows differ for target query over {', '.join(q2.projection)}: "
                f"{len(want)} expected, {len(got)} returned; missing {missing[:5]}; unexpected {extra[:5]}"
            )
            return OracleOutcome(c, False, len(expected), len(rewrites), detail)
    return OracleOutcome(c, True, len(expected), len(rewrites))


def run_oracle(
    d: AlignmentDictionary,
    source: FactStore,
    target: FactStore,
    prefixes: PrefixTable | None = None,
) -> list[OracleOutcome]:
    return [check_correspondence(c, d, source, target, prefixes) for c in d.correspondences()]
