"""Tokenizer and recursive-descent parser for the supported SPARQL subset.

Grammar: PREFIX declarations, a single SELECT clause (variable list or *),
an optional FROM <store-name> dataset clause, a braced basic graph pattern
with optional typed FILTER constraints, then ORDER BY / LIMIT / OFFSET.
Comparisons take the form cast(?var) op constant with cast in
{xsd:float, xsd:integer, xsd:dateTime}, joined by && and ||.

The xsd prefix is predeclared with its standard namespace; every other
prefix must be declared before use. Unknown syntax is rejected with the
line and column where it appears.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime

from ..rdf import DT_DATETIME, DT_FLOAT, DT_INTEGER, DT_STRING, XSD, Iri, Literal

CAST_NAMES = {
    XSD + "float": DT_FLOAT,
    XSD + "integer": DT_INTEGER,
    XSD + "dateTime": DT_DATETIME,
}

COMPARISON_OPS = ("<=", ">=", "!=", "<", ">", "=")

KEYWORDS = {"prefix", "select", "where", "filter", "from", "order", "by",
            "asc", "desc", "limit", "offset"}


class QueryParseError(Exception):
    """Query text the subset does not accept, with its position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class TriplePattern:
    subject: Var | Iri | Literal
    predicate: Var | Iri | Literal
    object: Var | Iri | Literal

    def variables(self):
        return [t for t in (self.subject, self.predicate, self.object) if isinstance(t, Var)]


@dataclass(frozen=True)
class Comparison:
    """cast(?var) op constant; constant is already a typed Python value."""

    cast: str
    var: Var
    op: str
    constant: float | int | datetime


@dataclass(frozen=True)
class And:
    parts: tuple


@dataclass(frozen=True)
class Or:
    parts: tuple


@dataclass(frozen=True)
class Query:
    prefixes: dict
    select_vars: tuple[Var, ...] | None  # None means SELECT *
    dataset: str | None
    patterns: tuple[TriplePattern, ...]
    filter: Comparison | And | Or | None
    order_by: tuple[Var, bool] | None  # (variable, descending)
    limit: int | None
    offset: int | None

    def pattern_variables(self) -> list[Var]:
        seen: dict[Var, None] = {}
        for p in self.patterns:
            for v in p.variables():
                seen.setdefault(v)
        return list(seen)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


_IRIREF = re.compile(r'<[^\s<>"{}|^`\\]*>')
_PNAME = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*:[A-Za-z_][A-Za-z0-9_\-.]*")
_PNAME_NS = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*:")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*")
_VAR = re.compile(r"\?[A-Za-z_][A-Za-z0-9_]*")
_NUMBER = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_STRING = re.compile(r'"(?:[^"\\]|\\.)*"')
_MULTI_PUNCT = ("&&", "||", "^^", "<=", ">=", "!=")
_SINGLE_PUNCT = "{}().,*<>=;"


_STRING_ESCAPES = {"\\": "\\", '"': '"', "n": "\n", "t": "\t", "r": "\r"}


def _unescape_string(raw: str) -> str:
    out = []
    i = 0
    while i < len(raw):
        if raw[i] == "\\" and i + 1 < len(raw):
            out.append(_STRING_ESCAPES.get(raw[i + 1], raw[i + 1]))
            i += 2
        else:
            out.append(raw[i])
            i += 1
    return "".join(out)


def tokenize(text: str) -> list[_Token]:
    tokens = []
    line = 1
    line_start = 0
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            i += 1
            line_start = i
            continue
        if c.isspace():
            i += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        col = i - line_start + 1
        if c == "<":
            m = _IRIREF.match(text, i)
            if m:
                tokens.append(_Token("iriref", m.group()[1:-1], line, col))
                i = m.end()
                continue
        if c == '"':
            m = _STRING.match(text, i)
            if not m:
                raise QueryParseError("unterminated string", line, col)
            tokens.append(_Token("string", _unescape_string(m.group()[1:-1]), line, col))
            i = m.end()
            continue
        if c == "?":
            m = _VAR.match(text, i)
            if not m:
                raise QueryParseError("bad variable name", line, col)
            tokens.append(_Token("var", m.group()[1:], line, col))
            i = m.end()
            continue
        two = text[i:i + 2]
        if two in _MULTI_PUNCT:
            tokens.append(_Token("punct", two, line, col))
            i += 2
            continue
        if c.isdigit() or (c in "+-" and i + 1 < n and (text[i + 1].isdigit() or text[i + 1] == ".")):
            m = _NUMBER.match(text, i)
            tokens.append(_Token("number", m.group(), line, col))
            i = m.end()
            continue
        m = _PNAME.match(text, i)
        if m:
            tokens.append(_Token("pname", m.group(), line, col))
            i = m.end()
            continue
        m = _PNAME_NS.match(text, i)
        if m:
            tokens.append(_Token("pname_ns", m.group()[:-1], line, col))
            i = m.end()
            continue
        m = _IDENT.match(text, i)
        if m:
            word = m.group()
            kind = "keyword" if word.lower() in KEYWORDS else "ident"
            tokens.append(_Token(kind, word, line, col))
            i = m.end()
            continue
        if c in _SINGLE_PUNCT:
            tokens.append(_Token("punct", c, line, col))
            i += 1
            continue
        raise QueryParseError(f"unexpected character {c!r}", line, col)
    tokens.append(_Token("eof", "", line, n - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0
        self.prefixes: dict[str, str] = {"xsd": XSD}

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message: str, tok: _Token | None = None):
        tok = tok or self.peek()
        raise QueryParseError(message, tok.line, tok.column)

    def expect_punct(self, text: str) -> _Token:
        tok = self.next()
        if tok.kind != "punct" or tok.text != text:
            self.error(f"expected {text!r}, found {tok.text!r}", tok)
        return tok

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "keyword" and tok.text.lower() == word

    def take_keyword(self, word: str) -> bool:
        if self.at_keyword(word):
            self.next()
            return True
        return False

    def resolve_pname(self, tok: _Token) -> str:
        prefix, local = tok.text.split(":", 1)
        if prefix not in self.prefixes:
            self.error(f"undeclared prefix {prefix!r}", tok)
        return self.prefixes[prefix] + local

    # grammar productions

    def parse_query(self) -> Query:
        while self.take_keyword("prefix"):
            tok = self.next()
            if tok.kind != "pname_ns":
                self.error("expected a prefix name ending in ':'", tok)
            iri = self.next()
            if iri.kind != "iriref":
                self.error("expected <iri> after prefix name", iri)
            self.prefixes[tok.text] = iri.text
        if not self.take_keyword("select"):
            self.error("expected SELECT")
        select_vars = self.parse_select_vars()
        dataset = None
        if self.take_keyword("from"):
            tok = self.next()
            if tok.kind == "iriref":
                dataset = tok.text
            elif tok.kind in ("ident", "keyword"):
                dataset = tok.text
            else:
                self.error("expected a store name after FROM", tok)
        patterns, filters = self.parse_where()
        order_by, limit, offset = self.parse_modifiers()
        tok = self.peek()
        if tok.kind != "eof":
            self.error(f"unexpected trailing {tok.text!r}", tok)
        if len(filters) == 0:
            filt = None
        elif len(filters) == 1:
            filt = filters[0]
        else:
            filt = And(tuple(filters))
        query = Query(dict(self.prefixes), select_vars, dataset, tuple(patterns),
                      filt, order_by, limit, offset)
        self.check_variable_scope(query)
        return query

    def parse_select_vars(self):
        tok = self.peek()
        if tok.kind == "punct" and tok.text == "*":
            self.next()
            return None
        out = []
        while self.peek().kind == "var":
            out.append(Var(self.next().text))
        if not out:
            self.error("SELECT needs at least one variable or *")
        return tuple(out)

    def parse_where(self):
        self.take_keyword("where")
        self.expect_punct("{")
        patterns: list[TriplePattern] = []
        filters: list = []
        while True:
            tok = self.peek()
            if tok.kind == "punct" and tok.text == "}":
                self.next()
                break
            if tok.kind == "eof":
                self.error("unbalanced braces: missing '}'", tok)
            if self.take_keyword("filter"):
                filters.append(self.parse_filter())
                if self.peek().kind == "punct" and self.peek().text == ".":
                    self.next()
                continue
            patterns.append(self.parse_pattern())
            if self.peek().kind == "punct" and self.peek().text == ".":
                self.next()
        if not patterns:
            self.error("WHERE block has no triple patterns")
        return patterns, filters

    def parse_pattern(self) -> TriplePattern:
        s = self.parse_term()
        p = self.parse_term()
        o = self.parse_term()
        return TriplePattern(s, p, o)

    def parse_term(self):
        tok = self.next()
        if tok.kind == "var":
            return Var(tok.text)
        if tok.kind == "iriref":
            return Iri(tok.text)
        if tok.kind == "pname":
            return Iri(self.resolve_pname(tok))
        if tok.kind == "number":
            if re.fullmatch(r"[+-]?\d+", tok.text):
                return Literal(tok.text, DT_INTEGER)
            return Literal(tok.text, DT_FLOAT)
        if tok.kind == "string":
            if self.peek().kind == "punct" and self.peek().text == "^^":
                self.next()
                dt_tok = self.next()
                if dt_tok.kind == "iriref":
                    dt = dt_tok.text
                elif dt_tok.kind == "pname":
                    dt = self.resolve_pname(dt_tok)
                else:
                    self.error("expected a datatype after ^^", dt_tok)
                try:
                    return Literal(tok.text, dt)
                except ValueError as exc:
                    self.error(str(exc), tok)
            return Literal(tok.text, DT_STRING)
        self.error(f"expected a term, found {tok.text!r}", tok)

    def parse_filter(self):
        self.expect_punct("(")
        expr = self.parse_or()
        self.expect_punct(")")
        return expr

    def parse_or(self):
        parts = [self.parse_and()]
        while self.peek().kind == "punct" and self.peek().text == "||":
            self.next()
            parts.append(self.parse_and())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def parse_and(self):
        parts = [self.parse_primary()]
        while self.peek().kind == "punct" and self.peek().text == "&&":
            self.next()
            parts.append(self.parse_primary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def parse_primary(self):
        tok = self.peek()
        if tok.kind == "punct" and tok.text == "(":
            self.next()
            expr = self.parse_or()
            self.expect_punct(")")
            return expr
        return self.parse_comparison()

    def parse_cast_name(self) -> str:
        tok = self.next()
        if tok.kind == "pname":
            iri = self.resolve_pname(tok)
        elif tok.kind == "iriref":
            iri = tok.text
        else:
            self.error("expected a cast function", tok)
        if iri not in CAST_NAMES:
            self.error(f"unknown cast function {tok.text!r}", tok)
        return CAST_NAMES[iri]

    def parse_comparison(self) -> Comparison:
        start = self.peek()
        cast = self.parse_cast_name()
        self.expect_punct("(")
        var_tok = self.next()
        if var_tok.kind != "var":
            self.error("cast argument must be a variable", var_tok)
        self.expect_punct(")")
        op_tok = self.next()
        if op_tok.kind != "punct" or op_tok.text not in COMPARISON_OPS:
            self.error(f"expected a comparison operator, found {op_tok.text!r}", op_tok)
        constant = self.parse_constant(cast)
        return Comparison(cast, Var(var_tok.text), op_tok.text, constant)

    def parse_constant(self, cast: str):
        tok = self.peek()
        if tok.kind == "number":
            self.next()
            if cast == DT_DATETIME:
                self.error("dateTime comparison needs a dateTime constant", tok)
            if cast == DT_INTEGER:
                if not re.fullmatch(r"[+-]?\d+", tok.text):
                    self.error("integer comparison needs an integer constant", tok)
                return int(tok.text)
            return float(tok.text)
        if tok.kind == "string":
            self.next()
            return self.coerce_string_constant(cast, tok)
        if tok.kind in ("pname", "iriref"):
            wrapped = self.parse_cast_name()
            self.expect_punct("(")
            inner = self.next()
            if inner.kind != "string":
                self.error("expected a quoted value inside the cast", inner)
            self.expect_punct(")")
            if wrapped != cast:
                self.error("constant cast does not match the comparison cast", tok)
            return self.coerce_string_constant(cast, inner)
        self.error(f"expected a constant, found {tok.text!r}", tok)

    def coerce_string_constant(self, cast: str, tok: _Token):
        try:
            if cast == DT_DATETIME:
                return datetime.strptime(tok.text, "%Y-%m-%dT%H:%M:%S")
            if cast == DT_INTEGER:
                return int(tok.text)
            return float(tok.text)
        except ValueError:
            self.error(f"constant {tok.text!r} does not parse as the compared type", tok)

    def parse_modifiers(self):
        order_by = None
        limit = None
        offset = None
        if self.take_keyword("order"):
            if not self.take_keyword("by"):
                self.error("expected BY after ORDER")
            descending = False
            if self.take_keyword("desc"):
                descending = True
                self.expect_punct("(")
                var_tok = self.next()
                if var_tok.kind != "var":
                    self.error("expected a variable in DESC(...)", var_tok)
                self.expect_punct(")")
            elif self.take_keyword("asc"):
                self.expect_punct("(")
                var_tok = self.next()
                if var_tok.kind != "var":
                    self.error("expected a variable in ASC(...)", var_tok)
                self.expect_punct(")")
            else:
                var_tok = self.next()
                if var_tok.kind != "var":
                    self.error("expected a variable after ORDER BY", var_tok)
            order_by = (Var(var_tok.text), descending)
        for _ in range(2):
            if self.take_keyword("limit"):
                limit = self.parse_count("LIMIT")
            elif self.take_keyword("offset"):
                offset = self.parse_count("OFFSET")
        return order_by, limit, offset

    def parse_count(self, clause: str) -> int:
        tok = self.next()
        if tok.kind != "number" or not re.fullmatch(r"\d+", tok.text):
            self.error(f"{clause} needs a non-negative integer", tok)
        return int(tok.text)

    def check_variable_scope(self, query: Query):
        bound = set(query.pattern_variables())
        if query.select_vars is not None:
            for v in query.select_vars:
                if v not in bound:
                    self.error(f"select variable ?{v.name} not bound by any pattern",
                               self.tokens[0])
        for v in _filter_vars(query.filter):
            if v not in bound:
                self.error(f"filter variable ?{v.name} not bound by any pattern",
                           self.tokens[0])
        if query.order_by is not None and query.order_by[0] not in bound:
            self.error(f"ORDER BY variable ?{query.order_by[0].name} not bound by any pattern",
                       self.tokens[0])


def _filter_vars(expr) -> list[Var]:
    if expr is None:
        return []
    if isinstance(expr, Comparison):
        return [expr.var]
    out = []
    for part in expr.parts:
        out.extend(_filter_vars(part))
    return out


def parse_query(text: str) -> Query:
    """Parse query text into a Query AST; QueryParseError on unsupported syntax."""
    return _Parser(tokenize(text)).parse_query()
