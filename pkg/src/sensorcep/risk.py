"""Risk estimation over complex events.

A banded event lands in one of three tiers (Normal, Moderate, Risk), then a
twelve-cell decision table combines the tier with two confirmation signals:
realtime support (the recent live window repeats the elevated reading) and
historical support (a query over the stored triples finds the pattern in a
trailing span of data time). Alerts are only raised from the Risk tier, and
only a realtime-confirmed Risk raises one; the historical signal upgrades
it from unconfirmed to confirmed.
"""

from __future__ import annotations

import json
import threading
from bisect import bisect_left, bisect_right
from collections import Counter, deque
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import IntEnum

from .cep import (
    AIR_QUALITY_POOR,
    HUMIDITY_HIGH,
    TEMPERATURE_HIGH,
    TEMPERATURE_MODERATE,
    ComplexEvent,
)
from .rdf import DATETIME_LEXICAL
from .sparql import evaluate, parse_query


class RiskLevel(IntEnum):
    NORMAL = 0
    MODERATE = 1
    RISK = 2


class Outcome(IntEnum):
    NO_ACTION = 0
    WATCH = 1
    TAKE_ACTION = 2
    ALERT = 3


class UnbandedTagError(Exception):
    """No band configured for the event tag."""

    def __init__(self, tag: str):
        super().__init__(f"no risk band configured for tag {tag!r}")
        self.tag = tag


@dataclass(frozen=True)
class Band:
    """Half-open tiers: value <= moderate_above is Normal, values in
    (moderate_above, risk_above] are Moderate, above risk_above is Risk.
    A value exactly at an edge takes the lower tier."""

    moderate_above: float
    risk_above: float

    def __post_init__(self):
        if not self.moderate_above < self.risk_above:
            raise ValueError("band edges must satisfy moderate_above < risk_above")

    def level(self, value: float) -> RiskLevel:
        if value > self.risk_above:
            return RiskLevel.RISK
        if value > self.moderate_above:
            return RiskLevel.MODERATE
        return RiskLevel.NORMAL


DEFAULT_BANDS: dict[str, Band] = {
    AIR_QUALITY_POOR: Band(1100.0, 1300.0),
    TEMPERATURE_HIGH: Band(23.0, 28.0),
    TEMPERATURE_MODERATE: Band(23.0, 28.0),
    HUMIDITY_HIGH: Band(30.0, 40.0),
}


def band_level(event: ComplexEvent, bands: dict[str, Band] = DEFAULT_BANDS) -> RiskLevel:
    """Tier for the event's carried measurement; strict about coverage."""
    if event.value is None:
        raise ValueError(f"event {event.tag!r} carries no banded measurement")
    band = bands.get(event.tag)
    if band is None:
        raise UnbandedTagError(event.tag)
    return band.level(event.value)


@dataclass(frozen=True)
class RiskInputs:
    event: ComplexEvent
    value: float
    level: RiskLevel
    realtime_supports: bool
    historical_supports: bool


@dataclass(frozen=True)
class RiskDecision:
    outcome: Outcome
    confirmed: bool
    rationale: str
    level: RiskLevel


# (level, realtime_supports, historical_supports) -> (outcome, confirmed, rationale)
DEFAULT_DECISION_TABLE: dict[tuple[RiskLevel, bool, bool], tuple[Outcome, bool, str]] = {
    (RiskLevel.NORMAL, False, False): (Outcome.NO_ACTION, False, "reading inside the normal band"),
    (RiskLevel.NORMAL, False, True): (Outcome.NO_ACTION, False, "reading inside the normal band"),
    (RiskLevel.NORMAL, True, False): (Outcome.NO_ACTION, False, "reading inside the normal band"),
    (RiskLevel.NORMAL, True, True): (Outcome.NO_ACTION, False, "reading inside the normal band"),
    (RiskLevel.MODERATE, False, False): (
        Outcome.WATCH, False,
        "moderate reading with no support from the live window or the store"),
    (RiskLevel.MODERATE, False, True): (
        Outcome.TAKE_ACTION, False,
        "moderate reading matches stored history; act before it recurs"),
    (RiskLevel.MODERATE, True, False): (
        Outcome.WATCH, False,
        "moderate reading in the live window only; keep watching"),
    (RiskLevel.MODERATE, True, True): (
        Outcome.TAKE_ACTION, False,
        "moderate reading backed by both the live window and the store"),
    (RiskLevel.RISK, False, False): (
        Outcome.WATCH, False,
        "isolated risk-band value with no support; watch for recurrence"),
    (RiskLevel.RISK, False, True): (
        Outcome.TAKE_ACTION, False,
        "risk-band value without live repetition; stored history says act"),
    (RiskLevel.RISK, True, False): (
        Outcome.ALERT, False,
        "risk-band value repeating in the live window; no stored history yet"),
    (RiskLevel.RISK, True, True): (
        Outcome.ALERT, True,
        "risk-band value confirmed by the live window and the store"),
}


def assess(inputs: RiskInputs,
           table: dict = DEFAULT_DECISION_TABLE) -> RiskDecision:
    """Total, deterministic lookup over the twelve-cell decision table."""
    key = (inputs.level, bool(inputs.realtime_supports), bool(inputs.historical_supports))
    outcome, confirmed, rationale = table[key]
    return RiskDecision(outcome, confirmed, rationale, inputs.level)


@dataclass(frozen=True)
class Alert:
    severity: str  # "confirmed" or "unconfirmed"
    message: str
    event: ComplexEvent
    timestamp: datetime


class AlertLog:
    """Append-only alert sink with a total order, safe for concurrent
    appenders. With a path, each alert is also written as one JSON line."""

    def __init__(self, path=None):
        self._lock = threading.Lock()
        self._alerts: list[Alert] = []
        self._fh = open(path, "w", encoding="utf-8") if path else None

    def append(self, alert: Alert) -> None:
        with self._lock:
            self._alerts.append(alert)
            if self._fh is not None:
                self._fh.write(alert_line(alert) + "\n")
                self._fh.flush()

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None

    def __len__(self) -> int:
        with self._lock:
            return len(self._alerts)

    def __iter__(self):
        with self._lock:
            return iter(list(self._alerts))

    def write_jsonl(self, path) -> None:
        with self._lock, open(path, "w", encoding="utf-8") as fh:
            for alert in self._alerts:
                fh.write(alert_line(alert) + "\n")


def alert_line(alert: Alert) -> str:
    return json.dumps({
        "time": alert.timestamp.isoformat(sep=" "),
        "severity": alert.severity,
        "tag": alert.event.tag,
        "value": alert.event.value,
        "rationale": alert.message,
    })


def emit_alert(decision: RiskDecision, event: ComplexEvent, log: AlertLog) -> Alert:
    """One alert per Alert decision, appended in call order."""
    if decision.outcome is not Outcome.ALERT:
        raise ValueError(f"cannot emit an alert for outcome {decision.outcome.name}")
    severity = "confirmed" if decision.confirmed else "unconfirmed"
    alert = Alert(severity, decision.rationale, event, event.source.record.timestamp)
    log.append(alert)
    return alert


# tag -> (store predicate local name, record field)
_TAG_FEATURES = {
    AIR_QUALITY_POOR: ("CO2", "co2"),
    HUMIDITY_HIGH: ("Humidity", "humidity"),
    TEMPERATURE_HIGH: ("Temperature", "temperature"),
    TEMPERATURE_MODERATE: ("Temperature", "temperature"),
}


def historical_query_text(tag: str, threshold: float) -> str:
    """Stored-history probe for a tag: timestamps of observations whose
    banded feature exceeds the tier edge."""
    predicate = _TAG_FEATURES[tag][0]
    return (
        "PREFIX ns1: <http://schema.org/>\n"
        "SELECT ?date\n"
        "WHERE {\n"
        "  ?observation ns1:date ?date .\n"
        f"  ?observation ns1:{predicate} ?reading .\n"
        f"  FILTER ( xsd:float(?reading) > {threshold!r} )\n"
        "}"
    )


class HistoricalIndex:
    """Answers 'does the store show this pattern within the trailing span'.

    Each configured tag's probe query runs once against the (immutable)
    store; the matching observation timestamps are kept sorted so a support
    check is two bisections. Default span is 24 hours of data time and one
    matching row is enough.
    """

    def __init__(self, store, bands: dict[str, Band] = DEFAULT_BANDS,
                 queries: dict[str, str] | None = None, min_rows: int = 1,
                 span: timedelta = timedelta(hours=24)):
        if min_rows < 1:
            raise ValueError("min_rows must be >= 1")
        self.min_rows = min_rows
        self.span = span
        self._times: dict[str, list[datetime]] = {}
        for tag, band in bands.items():
            if tag not in _TAG_FEATURES:
                continue
            text = (queries or {}).get(tag) or historical_query_text(tag, band.moderate_above)
            result = evaluate(parse_query(text), store)
            times = []
            for row in result.rows:
                term = row[0]
                times.append(datetime.strptime(term.lexical, DATETIME_LEXICAL))
            times.sort()
            self._times[tag] = times

    def supports(self, tag: str, at: datetime) -> bool:
        times = self._times.get(tag)
        if not times:
            return False
        lo = bisect_left(times, at - self.span)
        hi = bisect_right(times, at)
        return hi - lo >= self.min_rows


class RiskStage:
    """Pipeline sink: band each complex event, gather both support signals,
    assess, and emit alerts.

    The engine hands every elementary record to observe() before the
    event's derived tags arrive, so the live window includes the current
    reading. Realtime support for a tag means at least min_hits of the last
    window_size readings of its feature exceed the moderate edge. Tags with
    no configured band (the occupancy tags) pass through unassessed.
    """

    def __init__(self, bands: dict[str, Band] = DEFAULT_BANDS,
                 historical: HistoricalIndex | None = None,
                 alert_log: AlertLog | None = None,
                 table: dict = DEFAULT_DECISION_TABLE,
                 window_size: int = 5, min_hits: int = 2,
                 keep_decisions: bool = False):
        if min_hits < 1 or window_size < min_hits:
            raise ValueError("need 1 <= min_hits <= window_size")
        self.bands = bands
        self.historical = historical
        self.alerts = alert_log if alert_log is not None else AlertLog()
        self.table = table
        self.min_hits = min_hits
        self.outcome_counts: Counter = Counter()
        self.unbanded = 0
        self.decisions: list[RiskDecision] | None = [] if keep_decisions else None
        self._windows = {feat: deque(maxlen=window_size)
                         for feat in ("temperature", "humidity", "co2")}

    def observe(self, record) -> None:
        self._windows["temperature"].append(record.temperature)
        self._windows["humidity"].append(record.humidity)
        self._windows["co2"].append(record.co2)

    def _realtime_supports(self, tag: str, band: Band) -> bool:
        window = self._windows[_TAG_FEATURES[tag][1]]
        hits = sum(1 for v in window if v > band.moderate_above)
        return hits >= self.min_hits

    def __call__(self, event: ComplexEvent) -> RiskDecision | None:
        band = self.bands.get(event.tag)
        if band is None or event.value is None:
            self.unbanded += 1
            return None
        level = band.level(event.value)
        realtime = self._realtime_supports(event.tag, band)
        historical = (self.historical.supports(event.tag, event.source.record.timestamp)
                      if self.historical is not None else False)
        decision = assess(RiskInputs(event, event.value, level, realtime, historical),
                          self.table)
        self.outcome_counts[decision.outcome] += 1
        if self.decisions is not None:
            self.decisions.append(decision)
        if decision.outcome is Outcome.ALERT:
            emit_alert(decision, event, self.alerts)
        return decision
