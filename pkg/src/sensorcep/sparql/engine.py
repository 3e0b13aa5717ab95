"""Query evaluation over triple stores.

Patterns are matched left to right; each step picks the candidate list via
the most selective concrete position (bound subject first, then predicate),
so joins ride the store indexes. Filters apply after pattern matching, then
ORDER BY, OFFSET, LIMIT in that order.

Filter error semantics: every comparison leaf is evaluated (no short
circuit); if any leaf cannot be evaluated for a row (the variable is bound
to an IRI, or the lexical form does not parse under the cast), the row is
excluded. This is row-local and never aborts the query.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from datetime import datetime

from ..rdf import DT_DATETIME, DT_FLOAT, DT_INTEGER, Iri, Literal, TripleStore
from .parser import And, Comparison, Or, Query, TriplePattern, Var


class EvaluationError(Exception):
    """Evaluation cannot proceed (e.g. unknown named store)."""


class _CastFailure(Exception):
    pass


CAST_FAILED = object()


def cast_literal(term, target: str):
    """Typed value of a literal under the target datatype, or CAST_FAILED.

    Float and integer casts yield numbers ordered numerically; dateTime
    yields instants ordered chronologically. IRIs never cast.
    """
    if not isinstance(term, Literal):
        return CAST_FAILED
    try:
        if target == DT_FLOAT:
            return float(term.lexical)
        if target == DT_INTEGER:
            return int(term.lexical)
        if target == DT_DATETIME:
            return datetime.strptime(term.lexical, "%Y-%m-%dT%H:%M:%S")
    except ValueError:
        return CAST_FAILED
    return CAST_FAILED


@dataclass
class ResultSet:
    """Projected solutions plus the wall-clock cost of producing them."""

    variables: tuple[str, ...]
    rows: list[tuple]
    elapsed: float = 0.0

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def iter_dicts(self):
        for row in self.rows:
            yield dict(zip(self.variables, row))

    def to_csv(self) -> str:
        """Plot-ready CSV: header is the variable names, cells lexical forms."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.variables)
        for row in self.rows:
            writer.writerow([_plain(term) for term in row])
        return buf.getvalue()

    def to_json(self) -> str:
        """JSON rows keyed by variable, with term type and datatype kept."""
        out = []
        for row in self.rows:
            cell = {}
            for name, term in zip(self.variables, row):
                if isinstance(term, Iri):
                    cell[name] = {"type": "iri", "value": term.value}
                else:
                    cell[name] = {"type": "literal", "value": term.lexical,
                                  "datatype": term.datatype}
            out.append(cell)
        return json.dumps(out, indent=2)


def _plain(term) -> str:
    return term.value if isinstance(term, Iri) else term.lexical


def _substitute(term, binding: dict):
    if isinstance(term, Var):
        return binding.get(term)
    return term


def _match_patterns(patterns, store: TripleStore) -> list[dict]:
    bindings: list[dict] = [{}]
    for pattern in patterns:
        next_bindings = []
        for binding in bindings:
            s = _substitute(pattern.subject, binding)
            p = _substitute(pattern.predicate, binding)
            o = _substitute(pattern.object, binding)
            candidates = store.match(
                s if isinstance(s, Iri) else None,
                p if isinstance(p, Iri) else None,
                o if not isinstance(o, (Var, type(None))) else None,
            )
            for triple in candidates:
                new = _unify(pattern, triple, binding, s, p, o)
                if new is not None:
                    next_bindings.append(new)
        bindings = next_bindings
        if not bindings:
            break
    return bindings


def _unify(pattern: TriplePattern, triple, binding: dict, s, p, o) -> dict | None:
    # Concrete positions were already enforced by store.match; a position
    # whose substituted term is still a Var (or a non-Iri subject/predicate
    # placeholder) binds here, checking repeated-variable consistency.
    new = None
    for term, value in ((pattern.subject, triple.subject),
                        (pattern.predicate, triple.predicate),
                        (pattern.object, triple.object)):
        if isinstance(term, Var):
            current = (new or binding).get(term)
            if current is None:
                if new is None:
                    new = dict(binding)
                new[term] = value
            elif current != value:
                return None
        else:
            resolved = term if not isinstance(term, Var) else None
            if resolved is not None and resolved != value:
                return None
    return new if new is not None else dict(binding)


def _filter_holds(expr, binding: dict) -> bool:
    if isinstance(expr, Comparison):
        value = cast_literal(binding[expr.var], expr.cast)
        if value is CAST_FAILED:
            raise _CastFailure()
        op = expr.op
        c = expr.constant
        if op == "<":
            return value < c
        if op == "<=":
            return value <= c
        if op == ">":
            return value > c
        if op == ">=":
            return value >= c
        if op == "=":
            return value == c
        return value != c
    if isinstance(expr, And):
        results = [_filter_holds(p, binding) for p in expr.parts]
        return all(results)
    if isinstance(expr, Or):
        results = [_filter_holds(p, binding) for p in expr.parts]
        return any(results)
    raise TypeError(f"unknown filter node {expr!r}")


def _sort_key(term):
    """Total order over terms: numbers, then instants, then strings, then IRIs."""
    if isinstance(term, Literal):
        if term.datatype in (DT_FLOAT, DT_INTEGER):
            return (0, float(term.lexical), "")
        if term.datatype == DT_DATETIME:
            return (1, term.value().timestamp(), "")
        return (2, 0.0, term.lexical)
    return (3, 0.0, term.value)


def evaluate(query: Query, store: TripleStore, catalog: dict[str, TripleStore] | None = None) -> ResultSet:
    """Evaluate a parsed query; see module docstring for semantics.

    The optional catalog maps store names for FROM clauses; without a
    catalog the passed store is the single active dataset and any FROM
    clause refers to it.
    """
    if query.dataset is not None and catalog is not None:
        try:
            store = catalog[query.dataset]
        except KeyError:
            raise EvaluationError(f"unknown store {query.dataset!r}") from None
    t0 = time.perf_counter()
    bindings = _match_patterns(query.patterns, store)
    if query.filter is not None:
        kept = []
        for binding in bindings:
            try:
                if _filter_holds(query.filter, binding):
                    kept.append(binding)
            except _CastFailure:
                pass
        bindings = kept
    if query.order_by is not None:
        var, descending = query.order_by
        bindings.sort(key=lambda b: _sort_key(b[var]), reverse=descending)
    if query.offset is not None:
        bindings = bindings[query.offset:]
    if query.limit is not None:
        bindings = bindings[:query.limit]
    if query.select_vars is None:
        select = tuple(query.pattern_variables())
    else:
        select = query.select_vars
    rows = [tuple(b[v] for v in select) for b in bindings]
    elapsed = time.perf_counter() - t0
    return ResultSet(tuple(v.name for v in select), rows, elapsed)
