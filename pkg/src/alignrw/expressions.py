"""Ontology entities and Manchester-style class expressions.

Expressions are immutable trees.  ``parse_class_expression`` always returns the
canonical form (flattened, deduplicated, sorted connectives), and two
expressions are considered equal when their canonical forms are structurally
equal.  That is what lets them act as dictionary keys.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Mapping

from .errors import ExpressionSyntaxError, SideError

LOCAL_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
PREFIX_LABEL = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*\Z")


class Side(str, Enum):
    SOURCE = "source"
    TARGET = "target"

    @property
    def other(self) -> "Side":
        return Side.TARGET if self is Side.SOURCE else Side.SOURCE


@dataclass(frozen=True, order=True)
class EntityIri:
    side: Side
    prefix: str
    local_name: str

    def __post_init__(self):
        if not LOCAL_NAME.match(self.local_name):
            raise ValueError(f"invalid local name {self.local_name!r}")

    @property
    def qname(self) -> str:
        return f"{self.prefix}:{self.local_name}"

    def flipped(self) -> "EntityIri":
        return EntityIri(self.side.other, self.prefix, self.local_name)


@dataclass(frozen=True)
class PrefixTable:
    """Prefix labels of both ontologies.  A label belongs to exactly one side."""

    source: tuple[tuple[str, str], ...] = ()
    target: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        seen: set[str] = set()
        for label, _ in self.source + self.target:
            if not PREFIX_LABEL.match(label):
                raise ValueError(f"invalid prefix label {label!r}")
            if label in seen:
                raise SideError(f"prefix {label!r} declared more than once")
            if label == "rdf":
                raise SideError("prefix 'rdf' is reserved")
            seen.add(label)

    @classmethod
    def from_dicts(cls, source: Mapping[str, str], target: Mapping[str, str]) -> "PrefixTable":
        return cls(tuple(source.items()), tuple(target.items()))

    @classmethod
    def default(cls) -> "PrefixTable":
        return cls(
            (("onto_Source", "http://example.org/source#"),),
            (("target_onto", "http://example.org/target#"),),
        )

    def entries(self, side: Side) -> tuple[tuple[str, str], ...]:
        return self.source if side is Side.SOURCE else self.target

    def side_of(self, label: str) -> Side | None:
        for side in Side:
            if any(lbl == label for lbl, _ in self.entries(side)):
                return side
        return None

    def namespace(self, label: str) -> str | None:
        for lbl, ns in self.source + self.target:
            if lbl == label:
                return ns
        return None

    def find_namespace(self, namespace: str) -> tuple[str, Side] | None:
        for side in Side:
            for lbl, ns in self.entries(side):
                if ns == namespace:
                    return lbl, side
        return None

    def default_prefix(self, side: Side) -> str:
        entries = self.entries(side)
        if not entries:
            raise SideError(f"no {side.value} prefix declared")
        return entries[0][0]

    def swapped(self) -> "PrefixTable":
        return PrefixTable(self.target, self.source)

    def resolve(self, name: str, default_side: Side) -> EntityIri:
        """Resolve ``prefix:local`` or a bare local name against the table."""
        if ":" in name:
            prefix, local = name.split(":", 1)
            side = self.side_of(prefix)
            if side is None:
                raise ExpressionSyntaxError(f"unknown prefix {prefix!r}")
            return EntityIri(side, prefix, local)
        return EntityIri(default_side, self.default_prefix(default_side), name)


@dataclass(frozen=True)
class Literal:
    kind: str  # "boolean" | "integer" | "string"
    value: str

    def __post_init__(self):
        if self.kind == "boolean":
            if self.value not in ("true", "false"):
                raise ValueError(f"invalid boolean literal {self.value!r}")
        elif self.kind == "integer":
            if not re.fullmatch(r"-?\d+", self.value) or str(int(self.value)) != self.value:
                raise ValueError(f"invalid integer literal {self.value!r}")
        elif self.kind != "string":
            raise ValueError(f"unknown literal kind {self.kind!r}")

    @classmethod
    def boolean(cls, value: bool) -> "Literal":
        return cls("boolean", "true" if value else "false")

    @classmethod
    def integer(cls, value: int) -> "Literal":
        return cls("integer", str(int(value)))

    @classmethod
    def string(cls, value: str) -> "Literal":
        return cls("string", value)

    def __str__(self) -> str:
        if self.kind == "string":
            escaped = self.value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
            return f'"{escaped}"'
        return self.value


def unquote(token: str) -> str:
    body = token[1:-1]
    return re.sub(r"\\(.)", lambda m: "\n" if m.group(1) == "n" else m.group(1), body)


class ClassExpression:
    """Base class of expression nodes.  Nodes are frozen dataclasses."""

    __slots__ = ()

    def iris(self) -> Iterator[EntityIri]:
        raise NotImplementedError

    @property
    def side(self) -> Side:
        return next(self.iris()).side

    def _check_side(self):
        sides = {iri.side for iri in self.iris()}
        if len(sides) > 1:
            raise SideError("expression mixes source and target entities")

    def __str__(self) -> str:
        return serialize_class_expression(self)


@dataclass(frozen=True)
class Atom(ClassExpression):
    iri: EntityIri

    def iris(self):
        yield self.iri


@dataclass(frozen=True)
class And(ClassExpression):
    children: tuple[ClassExpression, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) < 2:
            raise ValueError("'and' needs at least two operands")
        self._check_side()

    def iris(self):
        for child in self.children:
            yield from child.iris()


@dataclass(frozen=True)
class Or(ClassExpression):
    children: tuple[ClassExpression, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) < 2:
            raise ValueError("'or' needs at least two operands")
        self._check_side()

    def iris(self):
        for child in self.children:
            yield from child.iris()


@dataclass(frozen=True)
class Some(ClassExpression):
    prop: EntityIri
    filler: ClassExpression

    def __post_init__(self):
        self._check_side()

    def iris(self):
        yield self.prop
        yield from self.filler.iris()


@dataclass(frozen=True)
class Only(ClassExpression):
    prop: EntityIri
    filler: ClassExpression

    def __post_init__(self):
        self._check_side()

    def iris(self):
        yield self.prop
        yield from self.filler.iris()


CARD_KINDS = ("min", "max", "exactly")


@dataclass(frozen=True)
class Card(ClassExpression):
    kind: str
    n: int
    prop: EntityIri
    filler: ClassExpression | None = None

    def __post_init__(self):
        if self.kind not in CARD_KINDS:
            raise ValueError(f"unknown cardinality {self.kind!r}")
        if self.n < 0:
            raise ValueError("cardinality must be non-negative")
        self._check_side()

    def iris(self):
        yield self.prop
        if self.filler is not None:
            yield from self.filler.iris()


@dataclass(frozen=True)
class DataValue(ClassExpression):
    prop: EntityIri
    literal: Literal

    def iris(self):
        yield self.prop


RESTRICTIONS = (Some, Only, Card, DataValue)


# -- serialization -----------------------------------------------------------

def _name(iri: EntityIri, qualified: bool) -> str:
    return iri.qname if qualified else iri.local_name


def _bare(expr: ClassExpression, qualified: bool) -> str:
    if isinstance(expr, Atom):
        return _name(expr.iri, qualified)
    if isinstance(expr, (And, Or)):
        op = " and " if isinstance(expr, And) else " or "
        return op.join(_operand(child, qualified) for child in expr.children)
    if isinstance(expr, Some):
        return f"{_name(expr.prop, qualified)} some {_operand(expr.filler, qualified)}"
    if isinstance(expr, Only):
        return f"{_name(expr.prop, qualified)} only {_operand(expr.filler, qualified)}"
    if isinstance(expr, Card):
        text = f"{_name(expr.prop, qualified)} {expr.kind} {expr.n}"
        if expr.filler is not None:
            text += f" {_operand(expr.filler, qualified)}"
        return text
    if isinstance(expr, DataValue):
        return f"{_name(expr.prop, qualified)} value {expr.literal}"
    raise TypeError(f"not a class expression: {expr!r}")


def _operand(expr: ClassExpression, qualified: bool) -> str:
    if isinstance(expr, Atom):
        return _bare(expr, qualified)
    return f"({_bare(expr, qualified)})"


def serialize_class_expression(expr: ClassExpression, qualified: bool = False) -> str:
    """Render ``expr`` in the surface syntax.

    With ``qualified=False`` names are written without prefixes, which
    reparses correctly whenever each side uses a single prefix.
    """
    return _bare(expr, qualified)


# -- canonical form ------------------------------------------------------------

def _rank(expr: ClassExpression) -> int:
    if isinstance(expr, Atom):
        return 0
    if isinstance(expr, RESTRICTIONS):
        return 1
    return 2


def sort_key(expr: ClassExpression) -> tuple[int, str, str]:
    """Total order used for connective children and dictionary keys."""
    return (_rank(expr), _bare(expr, False), _bare(expr, True))


def canonicalize(expr: ClassExpression) -> ClassExpression:
    if isinstance(expr, (And, Or)):
        cls = type(expr)
        flat: list[ClassExpression] = []
        for child in expr.children:
            child = canonicalize(child)
            if isinstance(child, cls):
                flat.extend(child.children)
            else:
                flat.append(child)
        unique = sorted(set(flat), key=sort_key)
        if len(unique) == 1:
            return unique[0]
        return cls(tuple(unique))
    if isinstance(expr, Some):
        return Some(expr.prop, canonicalize(expr.filler))
    if isinstance(expr, Only):
        return Only(expr.prop, canonicalize(expr.filler))
    if isinstance(expr, Card) and expr.filler is not None:
        return Card(expr.kind, expr.n, expr.prop, canonicalize(expr.filler))
    return expr


def is_canonical(expr: ClassExpression) -> bool:
    return canonicalize(expr) == expr


def map_iris(expr: ClassExpression, fn: Callable[[EntityIri], EntityIri]) -> ClassExpression:
    if isinstance(expr, Atom):
        return Atom(fn(expr.iri))
    if isinstance(expr, (And, Or)):
        return type(expr)(tuple(map_iris(c, fn) for c in expr.children))
    if isinstance(expr, Some):
        return Some(fn(expr.prop), map_iris(expr.filler, fn))
    if isinstance(expr, Only):
        return Only(fn(expr.prop), map_iris(expr.filler, fn))
    if isinstance(expr, Card):
        filler = None if expr.filler is None else map_iris(expr.filler, fn)
        return Card(expr.kind, expr.n, fn(expr.prop), filler)
    if isinstance(expr, DataValue):
        return DataValue(fn(expr.prop), expr.literal)
    raise TypeError(f"not a class expression: {expr!r}")


def subexpressions(expr: ClassExpression) -> Iterator[ClassExpression]:
    yield expr
    if isinstance(expr, (And, Or)):
        for child in expr.children:
            yield from subexpressions(child)
    elif isinstance(expr, (Some, Only)):
        yield from subexpressions(expr.filler)
    elif isinstance(expr, Card) and expr.filler is not None:
        yield from subexpressions(expr.filler)


# -- parsing ---------------------------------------------------------------------

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<lp>\() | (?P<rp>\)) |
        (?P<str>"(?:[^"\\]|\\.)*") |
        (?P<int>-?\d+)(?![A-Za-z_]) |
        (?P<name>(?:[A-Za-z_][A-Za-z0-9_\-]*:)?[A-Za-z_][A-Za-z0-9_]*)
    )""",
    re.VERBOSE,
)

KEYWORDS = {"and", "or", "some", "only", "min", "max", "exactly", "value", "true", "false"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        value = m.group(kind)
        start = m.start(kind)
        if kind == "name" and ":" not in value and value.lower() in KEYWORDS:
            kind, value = "kw", value.lower()
        tokens.append((kind, value, start))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, side: Side, prefixes: PrefixTable):
        self.tokens = _tokenize(text)
        self.i = 0
        self.side = side
        self.prefixes = prefixes

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str):
        raise ExpressionSyntaxError(message, self.peek()[2])

    def resolve(self, name: str, pos: int) -> EntityIri:
        try:
            return self.prefixes.resolve(name, self.side)
        except ExpressionSyntaxError as exc:
            raise ExpressionSyntaxError(str(exc), pos) from None

    def expr(self) -> ClassExpression:
        items = [self.term()]
        op = None
        while self.peek()[0] == "kw" and self.peek()[1] in ("and", "or"):
            kw = self.peek()[1]
            if op is None:
                op = kw
            elif kw != op:
                self.error("mixed 'and'/'or' at one level; add parentheses")
            self.take()
            items.append(self.term())
        if op is None:
            return items[0]
        return And(tuple(items)) if op == "and" else Or(tuple(items))

    def term(self) -> ClassExpression:
        kind, value, pos = self.peek()
        if kind == "lp":
            self.take()
            inner = self.expr()
            if self.peek()[0] != "rp":
                self.error("expected ')'")
            self.take()
            return inner
        if kind != "name":
            self.error("expected a class expression")
        self.take()
        iri = self.resolve(value, pos)
        nxt_kind, nxt, _ = self.peek()
        if nxt_kind == "kw" and nxt in ("some", "only"):
            self.take()
            filler = self.term()
            return Some(iri, filler) if nxt == "some" else Only(iri, filler)
        if nxt_kind == "kw" and nxt in CARD_KINDS:
            self.take()
            if self.peek()[0] != "int" or self.peek()[1].startswith("-"):
                self.error("expected a non-negative integer")
            n = int(self.take()[1])
            filler = None
            if self.peek()[0] in ("lp", "name"):
                filler = self.term()
            return Card(nxt, n, iri, filler)
        if nxt_kind == "kw" and nxt == "value":
            self.take()
            return DataValue(iri, self.literal())
        return Atom(iri)

    def literal(self) -> Literal:
        kind, value, _ = self.peek()
        if kind == "kw" and value in ("true", "false"):
            self.take()
            return Literal.boolean(value == "true")
        if kind == "int":
            self.take()
            return Literal.integer(int(value))
        if kind == "str":
            self.take()
            return Literal.string(unquote(value))
        self.error("expected a literal")


def parse_class_expression(
    text: str, side: Side = Side.SOURCE, prefixes: PrefixTable | None = None
) -> ClassExpression:
    """Parse ``text`` into a canonical expression.

    Bare names resolve to the default prefix of ``side``; prefixed names use
    whichever side declares the prefix.  Mixing sides raises ``SideError``.
    """
    if not text or not text.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    parser = _Parser(text, side, prefixes or PrefixTable.default())
    expr = parser.expr()
    if parser.peek()[0] != "eof":
        parser.error(f"unexpected token {parser.peek()[1]!r}")
    return canonicalize(expr)


# -- lexical surface ----------------------------------------------------------

_WORD = re.compile(r"[A-Z]+(?![a-z])|[A-Z]?[a-z]+|\d+")


def split_identifier(name: str) -> list[str]:
    """``Conference_Banquet`` -> ``["conference", "banquet"]``; camelCase aware."""
    words = []
    for chunk in name.split("_"):
        words.extend(w.lower() for w in _WORD.findall(chunk))
    return words


def label_tokens(expr: ClassExpression) -> set[str]:
    tokens: set[str] = set()
    for iri in expr.iris():
        tokens.update(split_identifier(iri.local_name))
    for sub in subexpressions(expr):
        if isinstance(sub, DataValue) and sub.literal.kind == "boolean":
            tokens.add(sub.literal.value)
    return tokens
