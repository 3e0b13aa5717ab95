"""Triple model, indexed in-memory store, exchange format, synthetic stores.

Triples are (subject, predicate, object) with Iri subjects/predicates and
Iri-or-typed-Literal objects. The store keeps set semantics plus predicate
and subject indexes, and counts triples, distinct classes (objects of the
type predicate), and distinct entities (subjects).

Concurrency: single writer or many readers; a fully built store may be
handed to other threads for read-only use.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, fields as dc_fields
from datetime import datetime, timedelta

from .ingest import SensorRecord

XSD = "http://www.w3.org/2001/XMLSchema#"
DT_FLOAT = XSD + "float"
DT_INTEGER = XSD + "integer"
DT_DATETIME = XSD + "dateTime"
DT_STRING = XSD + "string"
RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
NS1 = "http://schema.org/"

DATETIME_LEXICAL = "%Y-%m-%dT%H:%M:%S"


class TripleParseError(Exception):
    """Malformed line in the exchange format."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class InfeasibleStoreError(ValueError):
    """Synthetic store counts that cannot be satisfied."""


@dataclass(frozen=True)
class Iri:
    """Absolute IRI, stored without angle brackets."""

    value: str

    def __post_init__(self):
        if not self.value or any(c.isspace() for c in self.value) or "<" in self.value or ">" in self.value:
            raise ValueError(f"bad IRI: {self.value!r}")


@dataclass(frozen=True)
class Literal:
    """Typed literal; the lexical form must parse under its datatype."""

    lexical: str
    datatype: str = DT_STRING

    def __post_init__(self):
        if self.datatype not in (DT_FLOAT, DT_INTEGER, DT_DATETIME, DT_STRING):
            raise ValueError(f"unknown datatype {self.datatype!r}")
        try:
            self.value()
        except (ValueError, OverflowError) as exc:
            raise ValueError(f"lexical {self.lexical!r} invalid for {self.datatype}: {exc}") from None

    def value(self):
        """The typed Python value (float, int, datetime, or str)."""
        if self.datatype == DT_FLOAT:
            return float(self.lexical)
        if self.datatype == DT_INTEGER:
            return int(self.lexical)
        if self.datatype == DT_DATETIME:
            return datetime.strptime(self.lexical, DATETIME_LEXICAL)
        return self.lexical


@dataclass(frozen=True)
class Triple:
    subject: Iri
    predicate: Iri
    object: Iri | Literal


@dataclass(frozen=True)
class PredicateMap:
    """Record field to predicate mapping used by to_triples."""

    predicates: dict[str, Iri] = field(
        default_factory=lambda: {
            "timestamp": Iri(NS1 + "date"),
            "temperature": Iri(NS1 + "Temperature"),
            "humidity": Iri(NS1 + "Humidity"),
            "light": Iri(NS1 + "Light"),
            "co2": Iri(NS1 + "CO2"),
            "humidity_ratio": Iri(NS1 + "HumidityRatio"),
            "occupancy": Iri(NS1 + "Occupancy"),
        }
    )

    def __post_init__(self):
        record_fields = {f.name for f in dc_fields(SensorRecord)}
        unknown = set(self.predicates) - record_fields
        if unknown:
            raise ValueError(f"mapped fields not on SensorRecord: {sorted(unknown)}")
        if len(set(self.predicates.values())) != len(self.predicates):
            raise ValueError("predicate map must be injective")


DEFAULT_PREDICATES = PredicateMap()
DEFAULT_BASE = Iri("http://example.org/building")


class TripleStore:
    """Set of triples with predicate and subject indexes.

    Insertion order is preserved for deterministic serialization and match
    output; duplicates are collapsed.
    """

    def __init__(self, type_predicate: Iri = Iri(RDF_TYPE)):
        self.type_predicate = type_predicate
        self._ordered: list[Triple] = []
        self._set: set[Triple] = set()
        self._by_predicate: dict[Iri, list[Triple]] = {}
        self._by_subject: dict[Iri, list[Triple]] = {}
        self._classes: set[Iri | Literal] = set()

    def __len__(self) -> int:
        return len(self._ordered)

    def __iter__(self):
        return iter(self._ordered)

    def __contains__(self, triple: Triple) -> bool:
        return triple in self._set

    @property
    def triple_count(self) -> int:
        return len(self._ordered)

    @property
    def class_count(self) -> int:
        return len(self._classes)

    @property
    def entity_count(self) -> int:
        return len(self._by_subject)

    def insert(self, triples) -> int:
        """Insert triples (duplicates collapsed); returns the new triple count."""
        if isinstance(triples, Triple):
            triples = [triples]
        for t in triples:
            if t in self._set:
                continue
            self._set.add(t)
            self._ordered.append(t)
            self._by_predicate.setdefault(t.predicate, []).append(t)
            self._by_subject.setdefault(t.subject, []).append(t)
            if t.predicate == self.type_predicate:
                self._classes.add(t.object)
        return len(self._ordered)

    def match(self, subject: Iri | None = None, predicate: Iri | None = None,
              object: Iri | Literal | None = None) -> list[Triple]:
        """All triples matching the given concrete positions (None = wildcard)."""
        if subject is not None:
            base = self._by_subject.get(subject, [])
        elif predicate is not None:
            base = self._by_predicate.get(predicate, [])
        else:
            base = self._ordered
        return [
            t for t in base
            if (subject is None or t.subject == subject)
            and (predicate is None or t.predicate == predicate)
            and (object is None or t.object == object)
        ]

    def recount(self) -> tuple[int, int, int]:
        """Brute-force (triples, classes, entities) for the counter invariant."""
        triples = len(set(self._ordered))
        classes = len({t.object for t in self._ordered if t.predicate == self.type_predicate})
        entities = len({t.subject for t in self._ordered})
        return triples, classes, entities


def to_triples(record: SensorRecord, predicate_map: PredicateMap = DEFAULT_PREDICATES,
               base: Iri = DEFAULT_BASE) -> list[Triple]:
    """Convert one valid record into one triple per mapped field.

    All triples share the subject <base>/observation/<row_id>. Numeric fields
    become float literals, occupancy an integer literal, the timestamp a
    dateTime literal in "T" form.
    """
    subject = Iri(f"{base.value}/observation/{record.row_id}")
    out = []
    for field_name, predicate in predicate_map.predicates.items():
        v = getattr(record, field_name)
        if field_name == "timestamp":
            lit = Literal(v.strftime(DATETIME_LEXICAL), DT_DATETIME)
        elif field_name == "occupancy":
            lit = Literal(str(int(v)), DT_INTEGER)
        else:
            lit = Literal(repr(float(v)), DT_FLOAT)
        out.append(Triple(subject, predicate, lit))
    return out


def record_from_triples(triples, predicate_map: PredicateMap = DEFAULT_PREDICATES) -> SensorRecord:
    """Rebuild a record from the triples of one observation subject."""
    by_predicate = {t.predicate: t for t in triples}
    subjects = {t.subject for t in triples}
    if len(subjects) != 1:
        raise ValueError(f"expected one subject, found {len(subjects)}")
    subject = subjects.pop()
    row_id = subject.value.rsplit("/observation/", 1)[-1]
    values: dict[str, object] = {"row_id": row_id}
    for field_name, predicate in predicate_map.predicates.items():
        t = by_predicate.get(predicate)
        if t is None:
            raise ValueError(f"missing predicate {predicate.value} for subject {subject.value}")
        values[field_name] = t.object.value()
    if "occupancy" in values:
        values["occupancy"] = int(values["occupancy"])
    return SensorRecord(**values)


def store_records(records, predicate_map: PredicateMap = DEFAULT_PREDICATES,
                  base: Iri = DEFAULT_BASE) -> TripleStore:
    """Convert and insert a record list into a fresh store."""
    store = TripleStore()
    for rec in records:
        store.insert(to_triples(rec, predicate_map, base))
    return store


_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}
_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t"}


def _escape(text: str) -> str:
    return "".join(_ESCAPES.get(c, c) for c in text)


def _term_text(term: Iri | Literal) -> str:
    if isinstance(term, Iri):
        return f"<{term.value}>"
    return f'"{_escape(term.lexical)}"^^<{term.datatype}>'


def serialize(store: TripleStore) -> str:
    """One triple per line: `<s> <p> <o> .` with typed literal objects."""
    lines = [
        f"<{t.subject.value}> <{t.predicate.value}> {_term_text(t.object)} ."
        for t in store
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def _parse_quoted(text: str, line_number: int) -> tuple[str, str]:
    """Parse a leading quoted string; returns (unescaped value, rest)."""
    out = []
    i = 1
    while i < len(text):
        c = text[i]
        if c == "\\":
            if i + 1 >= len(text) or text[i + 1] not in _UNESCAPES:
                raise TripleParseError(line_number, "bad escape in literal")
            out.append(_UNESCAPES[text[i + 1]])
            i += 2
        elif c == '"':
            return "".join(out), text[i + 1:]
        else:
            out.append(c)
            i += 1
    raise TripleParseError(line_number, "unterminated literal")


def _parse_iri(text: str, line_number: int) -> tuple[str, str]:
    if not text.startswith("<"):
        raise TripleParseError(line_number, f"expected '<', found {text[:20]!r}")
    end = text.find(">")
    if end < 0:
        raise TripleParseError(line_number, "unterminated IRI")
    return text[1:end], text[end + 1:]


def parse(text: str) -> TripleStore:
    """Parse exchange-format text back into a store (inverse of serialize)."""
    store = TripleStore()
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            s, rest = _parse_iri(line, line_number)
            rest = rest.lstrip()
            p, rest = _parse_iri(rest, line_number)
            rest = rest.lstrip()
            if rest.startswith("<"):
                o_text, rest = _parse_iri(rest, line_number)
                obj: Iri | Literal = Iri(o_text)
            elif rest.startswith('"'):
                lex, rest = _parse_quoted(rest, line_number)
                rest = rest.lstrip()
                if rest.startswith("^^"):
                    dt, rest = _parse_iri(rest[2:].lstrip(), line_number)
                else:
                    dt = DT_STRING
                obj = Literal(lex, dt)
            else:
                raise TripleParseError(line_number, f"bad object term: {rest[:20]!r}")
            if rest.strip() != ".":
                raise TripleParseError(line_number, "line must end with ' .'")
            store.insert(Triple(Iri(s), Iri(p), obj))
        except ValueError as exc:
            raise TripleParseError(line_number, str(exc)) from None
    return store


SYNTHETIC_BASE = "http://example.org/synthetic"

# Kit order matters for partial kits: early properties are the ones the
# stock query catalog joins on, so even tiny stores yield nonempty results.
_KIT_PROPS = ("date", "Temperature", "Humidity", "CO2", "Occupancy", "Light", "HumidityRatio")


def _synthetic_literal(prop: str, rng: random.Random) -> Literal:
    if prop == "date":
        start = datetime(2015, 2, 2)
        dt = start + timedelta(minutes=rng.randrange(0, 60 * 24 * 12))
        return Literal(dt.strftime(DATETIME_LEXICAL), DT_DATETIME)
    if prop == "Occupancy":
        return Literal(str(rng.randrange(0, 2)), DT_INTEGER)
    if prop == "Temperature":
        v = round(rng.uniform(15.0, 35.0), 2)
    elif prop == "Humidity":
        v = round(rng.uniform(16.0, 45.0), 2)
    elif prop == "CO2":
        v = round(rng.uniform(400.0, 1500.0), 2)
    elif prop == "Light":
        v = round(rng.uniform(0.0, 700.0), 2)
    else:
        v = round(rng.uniform(0.002, 0.006), 6)
    return Literal(repr(v), DT_FLOAT)


def generate_synthetic(n_triples: int, n_classes: int, n_entities: int, seed: int) -> TripleStore:
    """Build a deterministic store with exactly the requested counts.

    Every entity gets a type triple (classes cycle over entities); the
    remaining budget is spent on per-entity property kits whose literal
    ranges make threshold filters select a nonzero, non-total fraction.
    """
    if not (n_triples >= n_entities >= n_classes >= 1):
        raise InfeasibleStoreError(
            f"need n_triples >= n_entities >= n_classes >= 1, got {n_triples}/{n_entities}/{n_classes}"
        )
    rng = random.Random(seed)
    store = TripleStore()
    type_pred = store.type_predicate
    entities = [Iri(f"{SYNTHETIC_BASE}/entity/{k}") for k in range(n_entities)]
    for k, entity in enumerate(entities):
        store.insert(Triple(entity, type_pred, Iri(f"{SYNTHETIC_BASE}/class/{k % n_classes}")))
    # Fill entity 0's full kit before entity 1's, and so on; a second round
    # of kits (repeated predicates, fresh values) absorbs any surplus budget.
    predicates = [Iri(NS1 + p) for p in _KIT_PROPS]
    slot = 0
    while store.triple_count < n_triples:
        entity = entities[(slot // len(_KIT_PROPS)) % n_entities]
        prop_idx = slot % len(_KIT_PROPS)
        slot += 1
        before = store.triple_count
        for _ in range(200):
            lit = _synthetic_literal(_KIT_PROPS[prop_idx], rng)
            if store.insert(Triple(entity, predicates[prop_idx], lit)) > before:
                break
        else:
            raise InfeasibleStoreError(
                f"cannot place {n_triples} distinct triples over {n_entities} entities"
            )
    return store
