"""AST, parser and serializer for the ``SELECT DISTINCT`` subset with UNION.

Grammar accepted::

    query  = { "PREFIX" pname_ns iriref } "SELECT" "DISTINCT" var { var } "WHERE" group
    group  = "{" { triple [ "." ] } [ union [ "." ] ] "}"
    union  = group "UNION" group { "UNION" group }
    triple = term term term
    term   = var | pname | literal | "rdf:type" | "a"

A lone nested group without ``UNION`` is merged into its parent, and the
``.`` after the last triple of a group is optional.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

from .errors import QuerySyntaxError
from .expressions import LOCAL_NAME, PREFIX_LABEL, EntityIri, Literal, PrefixTable, Side, unquote

RDF_NAMESPACE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"


@dataclass(frozen=True)
class Variable:
    name: str

    def __post_init__(self):
        if not LOCAL_NAME.match(self.name):
            raise ValueError(f"invalid variable name {self.name!r}")

    def __str__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class RdfType:
    def __str__(self) -> str:
        return "rdf:type"


RDF_TYPE = RdfType()

Term = Union[Variable, EntityIri, Literal, RdfType]


def format_term(term: Term) -> str:
    if isinstance(term, EntityIri):
        return term.qname
    return str(term)


@dataclass(frozen=True)
class TriplePattern:
    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self):
        if isinstance(self.predicate, Literal):
            raise ValueError("a predicate cannot be a literal")
        if isinstance(self.subject, (Literal, RdfType)):
            raise ValueError("subject must be a variable or an IRI")
        if isinstance(self.object, RdfType):
            raise ValueError("rdf:type is only allowed as a predicate")

    def terms(self) -> tuple[Term, Term, Term]:
        return (self.subject, self.predicate, self.object)

    def __str__(self) -> str:
        return " ".join(format_term(t) for t in self.terms())


@dataclass(frozen=True)
class GroupPattern:
    triples: tuple[TriplePattern, ...] = ()
    union: tuple["GroupPattern", ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "triples", tuple(self.triples))
        if self.union is not None:
            object.__setattr__(self, "union", tuple(self.union))
            if len(self.union) < 2:
                raise ValueError("a UNION block needs at least two branches")


@dataclass(frozen=True)
class SelectQuery:
    projection: tuple[str, ...]
    where: GroupPattern
    prefixes: tuple[tuple[str, str], ...] = ()
    distinct: bool = True

    def __post_init__(self):
        object.__setattr__(self, "projection", tuple(self.projection))
        object.__setattr__(self, "prefixes", tuple(tuple(p) for p in self.prefixes))
        if not self.projection:
            raise QuerySyntaxError("projection is empty")
        if len(set(self.projection)) != len(self.projection):
            raise QuerySyntaxError("duplicate projection variable")
        used = group_variables(self.where)
        for name in self.projection:
            if name not in used:
                raise QuerySyntaxError(f"projected variable ?{name} is unused")


# -- traversal helpers -----------------------------------------------------------

def iter_triples(group: GroupPattern, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], int, TriplePattern]]:
    """Yield ``(branch path, index, triple)`` for every triple in ``group``."""
    for i, t in enumerate(group.triples):
        yield path, i, t
    for b, branch in enumerate(group.union or ()):
        yield from iter_triples(branch, path + (b,))


def group_variables(group: GroupPattern) -> set[str]:
    return {
        term.name
        for _, _, t in iter_triples(group)
        for term in t.terms()
        if isinstance(term, Variable)
    }


def query_variables(q: SelectQuery) -> set[str]:
    return group_variables(q.where)


def query_iris(q: SelectQuery) -> set[EntityIri]:
    return {term for _, _, t in iter_triples(q.where) for term in t.terms() if isinstance(term, EntityIri)}


# -- serialization -----------------------------------------------------------------

def _group_lines(group: GroupPattern, depth: int) -> list[str]:
    pad = "  " * depth
    lines = [f"{pad}{t} ." for t in group.triples]
    for b, branch in enumerate(group.union or ()):
        if b:
            lines.append(f"{pad}UNION")
        lines.append(f"{pad}{{")
        lines.extend(_group_lines(branch, depth + 1))
        lines.append(f"{pad}}}")
    return lines


def serialize_select(q: SelectQuery) -> str:
    lines = [f"PREFIX {label}: <{ns}>" for label, ns in q.prefixes]
    lines.append("SELECT DISTINCT " + " ".join(f"?{v}" for v in q.projection))
    lines.append("WHERE {")
    lines.extend(_group_lines(q.where, 1))
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- parsing ------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*) |
    (?P<iriref><[^<>"{}|^`\\\s]*>) |
    (?P<var>[?$][A-Za-z_][A-Za-z0-9_]*) |
    (?P<pname>(?:[A-Za-z_][A-Za-z0-9_\-]*)?:(?:[A-Za-z_][A-Za-z0-9_]*)?) |
    (?P<str>"(?:[^"\\\n]|\\.)*") |
    (?P<int>-?\d+(?![A-Za-z_])) |
    (?P<word>[A-Za-z_][A-Za-z0-9_]*) |
    (?P<punct>[{}.])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), line, pos - line_start + 1))
        newlines = m.group().count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + m.group().rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _QueryParser:
    def __init__(self, text: str, prefixes: PrefixTable):
        self.tokens = tokenize(text)
        self.i = 0
        self.table = prefixes
        self.declared: dict[str, str] = {}
        self.sides: dict[str, Side] = {}

    def peek(self) -> Token:
        return self.tokens[self.i]

    def take(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise QuerySyntaxError(message, tok.line, tok.column)

    def is_word(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "word" and tok.text.upper() == word

    def expect_word(self, word: str):
        if not self.is_word(word):
            self.fail(f"expected {word}")
        self.take()

    def expect_punct(self, p: str):
        tok = self.peek()
        if tok.kind != "punct" or tok.text != p:
            self.fail(f"expected '{p}'")
        self.take()

    def skip_dot(self):
        tok = self.peek()
        if tok.kind == "punct" and tok.text == ".":
            self.take()

    def prefix_decl(self):
        self.take()
        label_tok = self.take()
        if label_tok.kind != "pname" or not label_tok.text.endswith(":"):
            self.fail("expected a prefix label such as 'ex:'", label_tok)
        label = label_tok.text[:-1]
        if not PREFIX_LABEL.match(label):
            self.fail("empty or invalid prefix label", label_tok)
        iri_tok = self.take()
        if iri_tok.kind != "iriref":
            self.fail("expected <namespace IRI>", iri_tok)
        namespace = iri_tok.text[1:-1]
        if label == "rdf":
            if namespace != RDF_NAMESPACE:
                self.fail("prefix rdf: must name the RDF namespace", iri_tok)
        else:
            side = self.table.side_of(label)
            if side is not None:
                if self.table.namespace(label) != namespace:
                    self.fail(f"prefix {label}: conflicts with the alignment's namespace", iri_tok)
            else:
                found = self.table.find_namespace(namespace)
                if found is None:
                    self.fail(f"unknown prefix {label}: (namespace not in either ontology)", label_tok)
                side = found[1]
            self.sides[label] = side
        self.declared[label] = namespace

    def query(self) -> SelectQuery:
        while self.is_word("PREFIX"):
            self.prefix_decl()
        self.expect_word("SELECT")
        if not self.is_word("DISTINCT"):
            self.fail("only SELECT DISTINCT queries are supported")
        self.take()
        projection: list[Token] = []
        while self.peek().kind == "var":
            projection.append(self.take())
        if not projection:
            self.fail("expected at least one projection variable")
        self.expect_word("WHERE")
        where = self.group()
        if self.peek().kind != "eof":
            self.fail(f"unexpected {self.peek().text!r} after the WHERE clause")
        used = group_variables(where)
        names = []
        for tok in projection:
            name = tok.text[1:]
            if name in names:
                self.fail(f"duplicate projection variable ?{name}", tok)
            if name not in used:
                self.fail(f"projected variable ?{name} is unused", tok)
            names.append(name)
        return SelectQuery(tuple(names), where, tuple(self.declared.items()))

    def group(self) -> GroupPattern:
        self.expect_punct("{")
        triples: list[TriplePattern] = []
        union = None
        while True:
            tok = self.peek()
            if tok.kind == "punct" and tok.text == "}":
                break
            if tok.kind == "eof":
                self.fail("unterminated group; expected '}'")
            if tok.kind == "punct" and tok.text == "{":
                if union is not None:
                    self.fail("only one UNION block is allowed per group")
                branches = [self.group()]
                while self.is_word("UNION"):
                    self.take()
                    branches.append(self.group())
                if len(branches) == 1:
                    inner = branches[0]
                    triples.extend(inner.triples)
                    union = inner.union
                else:
                    union = tuple(branches)
                self.skip_dot()
                continue
            if union is not None:
                self.fail("triples must precede the UNION block")
            triples.append(self.triple())
            self.skip_dot()
        self.expect_punct("}")
        return GroupPattern(tuple(triples), union)

    def triple(self) -> TriplePattern:
        start = self.peek()
        s = self.term("subject")
        p = self.term("predicate")
        o = self.term("object")
        try:
            return TriplePattern(s, p, o)
        except ValueError as exc:
            self.fail(str(exc), start)

    def term(self, position: str) -> Term:
        tok = self.take()
        if tok.kind == "var":
            return Variable(tok.text[1:])
        if tok.kind == "word":
            low = tok.text.lower()
            if tok.text == "a" and position == "predicate":
                return RDF_TYPE
            if low in ("true", "false") and position == "object":
                return Literal.boolean(low == "true")
            self.fail(f"unexpected {tok.text!r}", tok)
        if tok.kind == "int" and position == "object":
            return Literal.integer(int(tok.text))
        if tok.kind == "str" and position == "object":
            return Literal.string(unquote(tok.text))
        if tok.kind == "pname":
            return self.resolve(tok)
        self.fail(f"unexpected {tok.text or 'end of input'!r} in {position} position", tok)

    def resolve(self, tok: Token) -> Term:
        label, local = tok.text.split(":", 1)
        if not local:
            self.fail("prefixed name without local part", tok)
        if label == "rdf":
            if local == "type":
                return RDF_TYPE
            self.fail(f"unsupported term rdf:{local}", tok)
        side = self.sides.get(label) or self.table.side_of(label)
        if side is None:
            self.fail(f"unknown prefix {label}:", tok)
        return EntityIri(side, label, local)


def parse_select(text: str, prefixes: PrefixTable | None = None) -> SelectQuery:
    """Parse a query.  Prefixed names resolve through ``prefixes`` (the
    alignment's table) and any ``PREFIX`` lines of the text."""
    if not text or not text.strip():
        raise QuerySyntaxError("empty query", 1, 1)
    return _QueryParser(text, prefixes or PrefixTable.default()).query()
