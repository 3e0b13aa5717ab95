"""SPARQL-subset parsing and evaluation."""

from .engine import CAST_FAILED, EvaluationError, ResultSet, cast_literal, evaluate
from .parser import (
    And,
    Comparison,
    Or,
    Query,
    QueryParseError,
    TriplePattern,
    Var,
    parse_query,
)

__all__ = [
    "And", "CAST_FAILED", "Comparison", "EvaluationError", "Or", "Query",
    "QueryParseError", "ResultSet", "TriplePattern", "Var", "cast_literal",
    "evaluate", "parse_query",
]
