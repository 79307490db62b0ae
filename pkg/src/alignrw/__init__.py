"""Rewrite SPARQL SELECT queries across aligned ontologies.

Simple and complex equivalence correspondences are loaded from an alignment
file, closed under transitivity, indexed by source member, and used to
rewrite queries or to answer a natural-language question with a
source/target query pair.
"""

from .alignment import (
    Alignment,
    AlignmentDictionary,
    Correspondence,
    Origin,
    PatternKind,
    build_dictionary,
    classify_pattern,
    load_alignment,
)
from .closure import build_equivalence_graph, close, derive_closure
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
    canonicalize,
    label_tokens,
    parse_class_expression,
    serialize_class_expression,
)
from .rewrite import compile_pattern, generate_query_pair, match_pattern, rewrite_query
from .sparql import parse_select, query_variables, serialize_select

__version__ = "0.1.0"

__all__ = [
    "Alignment",
    "AlignmentDictionary",
    "And",
    "Atom",
    "Card",
    "ClassExpression",
    "Correspondence",
    "DataValue",
    "EntityIri",
    "Literal",
    "Only",
    "Or",
    "Origin",
    "PatternKind",
    "PrefixTable",
    "Side",
    "Some",
    "build_dictionary",
    "build_equivalence_graph",
    "canonicalize",
    "classify_pattern",
    "close",
    "compile_pattern",
    "derive_closure",
    "generate_query_pair",
    "label_tokens",
    "load_alignment",
    "match_pattern",
    "parse_class_expression",
    "parse_select",
    "query_variables",
    "rewrite_query",
    "serialize_class_expression",
    "serialize_select",
]
