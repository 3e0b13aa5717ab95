"""Event-processing runtime: broker consumption, rule evaluation, complex
event derivation, windowed aggregation, and hot rule deployment.

Rule deployment is copy-on-write: the engine holds a reference to one
immutable RuleSet and swaps the whole reference, so an event is evaluated
under exactly one version and never sees a partial rule set. On a running
engine the deployment command travels through the event topic itself, which
means the swap takes effect in stream order after the backlog ahead of it
drains; the reported latency is the time from the deploy request to the
first event evaluated under the new version. On an idle (not running)
engine the swap is applied directly and the latency is the swap time.

Payload encodings on the broker: commands are b"!cmd\\n" + JSON, flat
records are b"!rec\\n" + one CSV-ish line, and anything starting with b"<"
is a triple batch in the rdf exchange format.
"""

from __future__ import annotations

import itertools
import json
import threading
import time
from dataclasses import dataclass, field as dc_field
from datetime import datetime

from . import rdf
from .ingest import SensorRecord
from .rules import Condition, Rule, RuleSet, classify

OCCUPANCY_DETECTED = "OccupancyDetected"
OCCUPANCY_ABSENT = "OccupancyAbsent"
HUMIDITY_HIGH = "HumidityHigh"
TEMPERATURE_MODERATE = "TemperatureModerate"
TEMPERATURE_HIGH = "TemperatureHigh"
AIR_QUALITY_POOR = "AirQualityPoor"

COMMAND_PREFIX = b"!cmd\n"
RECORD_PREFIX = b"!rec\n"


class RuleDeployError(Exception):
    """A deployment change that cannot apply to the active rule set."""


class SinkError(Exception):
    """Sink raised while the pipeline ran; carries the partial stats."""

    def __init__(self, message: str, stats: "EngineStats"):
        super().__init__(message)
        self.stats = stats


@dataclass(frozen=True)
class ComplexEventThresholds:
    """Band edges for the derived feature tags."""

    humidity_high: float = 30.0
    temperature_moderate_low: float = 20.0
    temperature_high: float = 23.0
    co2_poor: float = 1100.0


DEFAULT_THRESHOLDS = ComplexEventThresholds()


@dataclass(frozen=True)
class ElementaryEvent:
    record: SensorRecord
    arrival_time: int
    offset: int
    partition: int = 0


@dataclass(frozen=True)
class ComplexEvent:
    """A tagged detection.

    rule_id is the id of the rule whose match produced the tag; it is None
    for threshold-derived tags and for default-label classifications, and
    when present it always exists in the recorded ruleset version. value
    carries the banded measurement for threshold tags.
    """

    tag: str
    rule_id: str | None
    source: ElementaryEvent
    detection_time: int
    ruleset_version: int
    value: float | None = None


@dataclass(frozen=True)
class Window:
    """Tumbling count window; aggregate is the per-feature mean."""

    length: int
    kind: str = "tumbling"

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("window length must be >= 1")
        if self.kind != "tumbling":
            raise ValueError(f"unsupported window kind {self.kind!r}")


@dataclass
class EngineStats:
    events_in: int = 0
    complex_events_out: int = 0
    wall_time: float = 0.0
    gate_hits: int = 0
    deploy_latencies: list = dc_field(default_factory=list)

    @property
    def throughput(self) -> float:
        return self.events_in / self.wall_time if self.wall_time > 0 else 0.0


def derive_complex(event: ElementaryEvent, ruleset: RuleSet,
                   thresholds: ComplexEventThresholds = DEFAULT_THRESHOLDS) -> list[ComplexEvent]:
    """Pure derivation: one occupancy tag from rule classification, plus one
    tag per banded feature that exceeds its edge."""
    record = event.record
    label, fired = classify(ruleset, record)
    rule_id = fired[0] if fired else None
    t = event.arrival_time
    version = ruleset.version
    if label == 1:
        occupancy_tag = OCCUPANCY_DETECTED
    elif label == 0:
        occupancy_tag = OCCUPANCY_ABSENT
    else:
        occupancy_tag = str(label)
    out = [ComplexEvent(occupancy_tag, rule_id, event, t, version)]
    if record.humidity > thresholds.humidity_high:
        out.append(ComplexEvent(HUMIDITY_HIGH, None, event, t, version, record.humidity))
    if record.temperature > thresholds.temperature_high:
        out.append(ComplexEvent(TEMPERATURE_HIGH, None, event, t, version, record.temperature))
    elif record.temperature > thresholds.temperature_moderate_low:
        out.append(ComplexEvent(TEMPERATURE_MODERATE, None, event, t, version, record.temperature))
    if record.co2 > thresholds.co2_poor:
        out.append(ComplexEvent(AIR_QUALITY_POOR, None, event, t, version, record.co2))
    return out


def aggregate_records(batch: list[SensorRecord]) -> SensorRecord:
    """Mean per numeric feature; occupancy by majority (ties to occupied);
    timestamp of the last record; row id spans first to last."""
    n = len(batch)
    if n == 1:
        return batch[0]
    mean = lambda name: sum(getattr(r, name) for r in batch) / n
    return SensorRecord(
        row_id=f"{batch[0].row_id}:{batch[-1].row_id}",
        timestamp=batch[-1].timestamp,
        temperature=mean("temperature"),
        humidity=mean("humidity"),
        light=mean("light"),
        co2=mean("co2"),
        humidity_ratio=mean("humidity_ratio"),
        occupancy=1 if mean("occupancy") >= 0.5 else 0,
    )


def window_aggregate(records, window: Window):
    """Tumbling aggregation over a record stream; remainder flushed at end."""
    if window.length == 1:
        yield from records
        return
    batch: list[SensorRecord] = []
    for record in records:
        batch.append(record)
        if len(batch) == window.length:
            yield aggregate_records(batch)
            batch = []
    if batch:
        yield aggregate_records(batch)


# payload encodings

def encode_record(record: SensorRecord) -> bytes:
    return RECORD_PREFIX + (
        f"{record.row_id},{record.timestamp.isoformat(sep=' ')},{record.temperature!r},"
        f"{record.humidity!r},{record.light!r},{record.co2!r},"
        f"{record.humidity_ratio!r},{record.occupancy}"
    ).encode()


def decode_record(payload: bytes) -> SensorRecord:
    parts = payload[len(RECORD_PREFIX):].decode().split(",")
    return SensorRecord(
        row_id=parts[0],
        timestamp=datetime.fromisoformat(parts[1]),
        temperature=float(parts[2]),
        humidity=float(parts[3]),
        light=float(parts[4]),
        co2=float(parts[5]),
        humidity_ratio=float(parts[6]),
        occupancy=int(parts[7]),
    )


def encode_record_triples(record: SensorRecord,
                          predicate_map: rdf.PredicateMap = rdf.DEFAULT_PREDICATES,
                          base: rdf.Iri = rdf.DEFAULT_BASE) -> bytes:
    lines = []
    for t in rdf.to_triples(record, predicate_map, base):
        lines.append(f"<{t.subject.value}> <{t.predicate.value}> "
                     f'"{t.object.lexical}"^^<{t.object.datatype}> .')
    return "\n".join(lines).encode()


def _decode_triple_batch(payload: bytes) -> SensorRecord:
    store = rdf.parse(payload.decode())
    return rdf.record_from_triples(list(store))


def encode_command(change: str, rule, request_id: str) -> bytes:
    body = {"change": change, "request_id": request_id}
    if isinstance(rule, Rule):
        body["rule"] = {
            "id": rule.id,
            "conditions": [[c.feature, c.op, c.threshold] for c in rule.conditions],
            "consequent": rule.consequent,
            "priority": rule.priority,
        }
    else:
        body["rule_id"] = rule
    return COMMAND_PREFIX + json.dumps(body).encode()


def _decode_command(payload: bytes) -> dict:
    return json.loads(payload[len(COMMAND_PREFIX):].decode())


def _rule_from_wire(body: dict) -> Rule:
    spec = body["rule"]
    return Rule(spec["id"],
                tuple(Condition(f, op, thr) for f, op, thr in spec["conditions"]),
                spec["consequent"], spec["priority"])


def apply_change(ruleset: RuleSet, change: str, rule) -> RuleSet:
    """New RuleSet with the change applied; RuleDeployError when it cannot be."""
    try:
        if change == "inject":
            return ruleset.with_added(rule)
        if change == "update":
            return ruleset.with_updated(rule)
        if change == "delete":
            rule_id = rule.id if isinstance(rule, Rule) else rule
            return ruleset.with_deleted(rule_id)
    except KeyError as exc:
        raise RuleDeployError(f"{change}: no rule with id {exc.args[0]!r}") from None
    except ValueError as exc:
        raise RuleDeployError(f"{change}: {exc}") from None
    raise RuleDeployError(f"unknown change kind {change!r}")


class EventEngine:
    """Consumes one topic, evaluates the active rule set, emits complex events.

    Two operating modes: the synchronous pump (process_available / drain)
    used by run_pipeline, and threaded workers (start / stop) with one
    worker per partition for concurrent-deployment scenarios. The sink is
    any callable taking a ComplexEvent; a sink with an ``observe`` method
    also receives every elementary record before its complex events (the
    risk stage uses this to maintain live windows).
    """

    def __init__(self, cluster, topic: str, ruleset: RuleSet,
                 thresholds: ComplexEventThresholds = DEFAULT_THRESHOLDS,
                 sink=None, group: str = "cep", window: Window | None = None,
                 gate=None):
        self.cluster = cluster
        self.topic = topic
        self.thresholds = thresholds
        self.sink = sink
        self.group = group
        self.window = window if window is None or window.length > 1 else None
        self.gate = gate
        self.stats = EngineStats()
        self._observe = getattr(sink, "observe", None)
        self._rules = ruleset
        self._swap_lock = threading.Lock()
        self._clock = itertools.count(1)
        self._pending: dict[str, dict] = {}
        self._awaiting: dict[int, str] = {}
        self._request_ids = itertools.count(1)
        self._threads: list[threading.Thread] = []
        self._stop = threading.Event()
        self._error: BaseException | None = None
        self._buffers: dict[int, list] = {}
        self._t_start: float | None = None
        # per-partition [events_in, complex_out, gate_hits]; each worker owns
        # its own slot, so no lock is needed on the hot path
        self._counts = {p: [0, 0, 0] for p in range(cluster.partitions(topic))}

    @property
    def ruleset(self) -> RuleSet:
        return self._rules

    @property
    def running(self) -> bool:
        return bool(self._threads)

    # message handling

    def _handle(self, message, partition: int) -> None:
        payload = message.payload
        if payload.startswith(COMMAND_PREFIX):
            self._apply_command(_decode_command(payload))
            return
        if payload.startswith(RECORD_PREFIX):
            record = decode_record(payload)
        elif payload[:1] == b"<":
            record = _decode_triple_batch(payload)
        else:
            raise ValueError(f"unrecognized payload prefix: {payload[:16]!r}")
        self._counts[partition][0] += 1
        if self.window is not None:
            buf = self._buffers.setdefault(partition, [])
            buf.append(record)
            if len(buf) < self.window.length:
                return
            record = aggregate_records(buf)
            buf.clear()
        self._evaluate(record, message.offset, partition)

    def _evaluate(self, record: SensorRecord, offset: int, partition: int) -> None:
        event = ElementaryEvent(record, next(self._clock), offset, partition)
        ruleset = self._rules
        counts = self._counts[partition]
        if self.gate is not None and self.gate(record):
            counts[2] += 1
        if self._observe is not None:
            self._observe(record)
        derived = derive_complex(event, ruleset, self.thresholds)
        if self._awaiting:
            self._resolve_first_eval(ruleset.version)
        sink = self.sink
        if sink is not None:
            for ce in derived:
                try:
                    sink(ce)
                except Exception as exc:
                    self._merge_counts()
                    raise SinkError(f"sink failed: {exc}", self.stats) from exc
        counts[1] += len(derived)

    def _merge_counts(self) -> None:
        self.stats.events_in = sum(c[0] for c in self._counts.values())
        self.stats.complex_events_out = sum(c[1] for c in self._counts.values())
        self.stats.gate_hits = sum(c[2] for c in self._counts.values())

    def _apply_command(self, body: dict) -> None:
        request_id = body.get("request_id")
        entry = self._pending.get(request_id)
        try:
            rule = _rule_from_wire(body) if "rule" in body else body.get("rule_id")
            with self._swap_lock:
                new_rules = apply_change(self._rules, body["change"], rule)
                self._rules = new_rules
                if entry is not None:
                    entry["applied_at"] = time.perf_counter()
                    self._awaiting[new_rules.version] = request_id
        except RuleDeployError as exc:
            if entry is not None:
                entry["error"] = exc
                entry["done"].set()

    def _resolve_first_eval(self, version: int) -> None:
        with self._swap_lock:
            for v in [v for v in self._awaiting if v <= version]:
                request_id = self._awaiting.pop(v)
                entry = self._pending.get(request_id)
                if entry is not None and entry.get("latency") is None:
                    entry["latency"] = time.perf_counter() - entry["t0"]
                    entry["done"].set()

    def _resolve_remaining(self) -> None:
        """Stream ended before a post-swap event arrived: fall back to swap time."""
        with self._swap_lock:
            for version, request_id in list(self._awaiting.items()):
                entry = self._pending.get(request_id)
                if entry is not None and entry.get("latency") is None:
                    applied = entry.get("applied_at", entry["t0"])
                    entry["latency"] = applied - entry["t0"]
                    entry["done"].set()
                del self._awaiting[version]

    def flush_windows(self) -> None:
        """Evaluate any partial window buffers (stream-end remainder)."""
        if self.window is None:
            return
        for partition, buf in self._buffers.items():
            if buf:
                record = aggregate_records(buf)
                buf.clear()
                self._evaluate(record, -1, partition)
        self._merge_counts()

    # synchronous mode

    def process_available(self, max_batch: int = 256) -> int:
        """One consume pass over all partitions; returns messages handled."""
        handled = 0
        for partition in range(self.cluster.partitions(self.topic)):
            while True:
                batch = self.cluster.consume_partition(self.topic, partition,
                                                       self.group, max_batch)
                if not batch:
                    break
                for message in batch:
                    self._handle(message, partition)
                handled += len(batch)
                if len(batch) < max_batch:
                    break
        self._merge_counts()
        return handled

    def drain(self, flush: bool = True) -> None:
        """Pump until the topic is exhausted; adds elapsed time to wall_time."""
        t0 = time.perf_counter()
        try:
            while self.process_available():
                pass
            if flush:
                self.flush_windows()
            self._resolve_remaining()
        finally:
            self.stats.wall_time += time.perf_counter() - t0

    # threaded mode

    def start(self) -> None:
        if self._threads:
            raise RuntimeError("engine already running")
        self._stop.clear()
        self._t_start = time.perf_counter()
        for partition in range(self.cluster.partitions(self.topic)):
            thread = threading.Thread(target=self._worker, args=(partition,),
                                      name=f"cep-{self.topic}-{partition}", daemon=True)
            self._threads.append(thread)
            thread.start()

    def _worker(self, partition: int) -> None:
        try:
            while True:
                batch = self.cluster.consume_partition(self.topic, partition,
                                                       self.group, 256)
                if batch:
                    for message in batch:
                        self._handle(message, partition)
                elif self._stop.is_set():
                    return
                else:
                    time.sleep(0.0002)
        except BaseException as exc:  # surfaced by stop()
            self._error = exc

    def stop(self) -> EngineStats:
        """Signal workers, wait for the drain to finish, return stats."""
        self._stop.set()
        for thread in self._threads:
            thread.join()
        self._threads.clear()
        self.flush_windows()
        self._resolve_remaining()
        self._merge_counts()
        if self._t_start is not None:
            self.stats.wall_time += time.perf_counter() - self._t_start
            self._t_start = None
        if self._error is not None:
            error = self._error
            self._error = None
            raise error
        return self.stats

    # deployment

    def deploy(self, change: str, rule, timeout: float | None = 30.0,
               wait: bool = True):
        """Apply a rule change; returns the deployment latency in seconds.

        On a running engine the change travels through the topic; with
        wait=False the request id is returned immediately (pass it to
        wait_deploy later, e.g. after publishing more events behind the
        command) instead of blocking here.
        """
        t0 = time.perf_counter()
        if not self.running:
            with self._swap_lock:
                self._rules = apply_change(self._rules, change, rule)
            latency = time.perf_counter() - t0
            self.stats.deploy_latencies.append(latency)
            return latency
        request_id = f"deploy-{next(self._request_ids)}"
        entry = {"t0": t0, "done": threading.Event(), "latency": None,
                 "error": None, "applied_at": None}
        self._pending[request_id] = entry
        self.cluster.publish(self.topic, encode_command(change, rule, request_id))
        if not wait:
            return request_id
        return self.wait_deploy(request_id, timeout)

    def wait_deploy(self, request_id: str, timeout: float | None = 30.0) -> float:
        entry = self._pending.get(request_id)
        if entry is None:
            raise RuleDeployError(f"unknown deployment request {request_id!r}")
        if not entry["done"].wait(timeout):
            self._pending.pop(request_id, None)
            raise RuleDeployError(f"deployment {request_id} timed out")
        self._pending.pop(request_id, None)
        if entry["error"] is not None:
            raise entry["error"]
        latency = entry["latency"]
        self.stats.deploy_latencies.append(latency)
        return latency


def deploy_rule(engine: EventEngine, change: str, rule) -> float:
    """Module-level alias for EventEngine.deploy."""
    return engine.deploy(change, rule)


def run_pipeline(cluster, topic: str, ruleset: RuleSet,
                 thresholds: ComplexEventThresholds = DEFAULT_THRESHOLDS,
                 sink=None, group: str = "cep", window: Window | None = None,
                 gate=None) -> EngineStats:
    """Drain the topic through a fresh engine; returns stats at stream end.

    Broker errors propagate; a sink exception aborts the run as SinkError
    with the partial stats attached.
    """
    engine = EventEngine(cluster, topic, ruleset, thresholds, sink,
                         group=group, window=window, gate=gate)
    engine.drain()
    return engine.stats
