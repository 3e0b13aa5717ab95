"""End-to-end acceptance gates for the whole pipeline.

Each test is one gate; the terminal summary prints a pass/fail line per
gate (see conftest). Tolerances are pinned here, not tuned to runs.
"""

import itertools
import json
import random
import time

import pytest

from sensorcep.bench import (
    SCALING_QUERIES,
    THROUGHPUT_GATES,
    BenchConfig,
    compute_metrics,
    run_deployment_bench,
    run_metrics,
    run_query_scaling,
    run_throughput,
)
from sensorcep import cli
from sensorcep.broker import Cluster, FaultEvent, parse_fault_schedule, run_schedule
from sensorcep.queries import CATALOG
from sensorcep.risk import (
    DEFAULT_DECISION_TABLE,
    AlertLog,
    Outcome,
    RiskInputs,
    RiskLevel,
    assess,
    emit_alert,
)
from sensorcep.sparql import evaluate, parse_query

from tests.conftest import DATASET
from tests.oracles import (
    exact_metrics,
    random_query_text,
    random_store,
    results_agree,
    scan_evaluate,
)
from tests.test_risk import make_event


def test_criterion_01():
    """Query evaluator agrees with a nested-linear-scan oracle on 1000
    randomized queries over randomized stores, in under a minute."""
    rng = random.Random(20260816)
    started = time.perf_counter()
    for case in range(1000):
        if case % 33 == 32:  # every 33rd case: a larger store, selective query
            store = random_store(rng, rng.randint(60, 140))
            text = random_query_text(rng, selective=True)
        else:
            store = random_store(rng)
            text = random_query_text(rng)
        query = parse_query(text)
        result = evaluate(query, store)
        _, oracle_rows = scan_evaluate(query, store)
        assert results_agree(result, oracle_rows, bool(query.order_by)), (
            f"case {case} diverged from oracle:\n{text}")
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0, f"oracle sweep took {elapsed:.1f}s"


def test_criterion_02(dataset_store, dataset_records):
    """The humidity-above-30 catalog query returns exactly 5454 rows over
    the converted dataset, in under a second."""
    query = parse_query(CATALOG["humidity_above_30"])
    result = evaluate(query, dataset_store)
    by_scan = sum(1 for r in dataset_records if r.humidity > 30.0)
    assert by_scan == 5454
    assert len(result) == 5454
    assert result.elapsed < 1.0, f"query took {result.elapsed:.3f}s"
    assert all(float(row[1].lexical) > 30.0 for row in result.rows)


def test_criterion_03(dataset_tree):
    """Induction on light/humidity/CO2 roots at light near 365.125 and
    places humidity and CO2 splits near 37.593 and 456.333."""
    splits = []
    stack = [dataset_tree.root]
    while stack:
        node = stack.pop()
        if hasattr(node, "threshold"):
            splits.append((node.feature, node.threshold))
            stack += [node.left, node.right]
    assert dataset_tree.root.feature == "light"
    assert abs(dataset_tree.root.threshold - 365.125) <= 2.0
    assert {f for f, _ in splits} <= {"light", "humidity", "co2"}
    assert any(f == "humidity" and abs(t - 37.593) <= 1.0 for f, t in splits), splits
    assert any(f == "co2" and abs(t - 456.333) <= 10.0 for f, t in splits), splits


def test_criterion_04(dataset_records):
    """Rules extracted from the induced tree score at least 93% accuracy
    on a seeded 75/25 held-out replay through the event pipeline."""
    config = BenchConfig(seed=0, metrics_sample=10000)  # covers the full test split
    report = run_metrics(config, records=dataset_records)
    cells = {c.row: c.mean for c in report.table("classification")}
    assert cells["accuracy"] >= 0.93, f"accuracy {cells['accuracy']:.4f}"
    precision, recall = cells["precision"], cells["recall"]
    assert 0.0 <= precision <= 1.0 and 0.0 <= recall <= 1.0
    if precision + recall:
        expected_f1 = 2 * precision * recall / (precision + recall)
        assert abs(cells["f1"] - expected_f1) <= 1e-12


def test_criterion_05():
    """compute_metrics matches exact rational confusion-matrix arithmetic
    on 1000 random prediction/label pairs to 1e-12."""
    rng = random.Random(5)
    for _ in range(1000):
        n = rng.randint(0, 60)
        predicted = [rng.randint(0, 1) for _ in range(n)]
        actual = [rng.randint(0, 1) for _ in range(n)]
        got = compute_metrics(predicted, actual)
        exact = exact_metrics(predicted, actual)
        for name in ("accuracy", "precision", "recall", "f1"):
            assert abs(getattr(got, name) - float(exact[name])) <= 1e-12
        assert (got.tp, got.fp, got.tn, got.fn) == (
            exact["tp"], exact["fp"], exact["tn"], exact["fn"])


def test_criterion_06(dataset_records):
    """Per-event processing cost orders Q1 >= Q2 >= Q3 >= Q4 at every
    event count from 10k to 50k; the suite finishes inside five minutes."""
    config = BenchConfig(trials=3)
    started = time.perf_counter()
    report = run_throughput(config, records=dataset_records)
    elapsed = time.perf_counter() - started
    assert not any(c.failed for c in report.cells)
    for count in config.event_counts:
        costs = [report.cell("throughput", qid, str(count)).seconds_mean / count
                 for qid in ("Q1", "Q2", "Q3", "Q4")]
        assert costs[0] >= costs[1] >= costs[2] >= costs[3], (
            f"at {count} events, per-event costs (us) "
            f"{[round(c * 1e6, 2) for c in costs]}")
    assert elapsed < 300.0, f"throughput suite took {elapsed:.0f}s"


def test_criterion_07(dataset_records):
    """Mean hot-deployment latency over 20 trials never decreases as the
    backlog grows from idle to 50k events."""
    config = BenchConfig(deploy_trials=20)
    report = run_deployment_bench(config, records=dataset_records)
    assert not any(c.failed for c in report.cells)
    labels = ["idle"] + [str(c) for c in config.event_counts]
    means = [report.cell("deployment", label, "latency").mean for label in labels]
    for a, b in itertools.pairwise(means):
        assert a <= b, f"latency means not monotone: {means}"


def test_criterion_08():
    """Every catalog query's elapsed time grows monotonically across the
    three synthetic store tiers."""
    config = BenchConfig(trials=3)
    report = run_query_scaling(config)
    assert not any(c.failed for c in report.cells)
    for qid, _, is_complex in SCALING_QUERIES:
        row = qid + ("*" if is_complex else "")
        means = [report.cell("query_scaling", row, spec.name).mean
                 for spec in config.store_specs]
        for a, b in itertools.pairwise(means):
            assert a <= b, f"{row} not monotone across stores: {means}"


def test_criterion_09():
    """100 randomized single-failure fault schedules lose nothing: every
    acknowledged message is consumed exactly once per group, in partition
    order, and recovered replicas converge."""
    rng = random.Random(99)
    for case in range(100):
        partitions = rng.choice((1, 2))
        count = rng.randint(50, 200)
        payloads = [f"c{case}:m{i}".encode() for i in range(count)]
        positions = sorted(rng.sample(range(1, count + 1), rng.randint(1, 4)))
        lines, down = [], None
        for at in positions:
            if down is None:
                down = rng.choice("ABC")
                lines.append(f"at {at} fail {down}")
            else:
                lines.append(f"at {at} recover {down}")
                down = None
        schedule = parse_fault_schedule("\n".join(lines))
        assert schedule == [FaultEvent(at, line.split()[2], line.split()[3])
                            for at, line in zip(positions, lines)]

        cluster = Cluster()
        cluster.create_topic("events", partitions=partitions)
        offsets = run_schedule(cluster, "events", payloads, schedule)
        assert offsets == [i // partitions for i in range(count)]

        for p in range(partitions):
            expected = [payloads[i] for i in range(count) if i % partitions == p]
            got = []
            while True:
                batch = cluster.consume_partition("events", p, "g", rng.randint(1, 37))
                if not batch:
                    break
                got.extend(m.payload for m in batch)
            assert got == expected, f"case {case} partition {p} delivery broke"
            assert cluster.committed("g", "events", p) == len(expected)
            assert cluster.consume_partition("events", p, "g", 10) == []

        if down is not None:
            cluster.recover_broker(down)
        for p in range(partitions):
            expected = [payloads[i] for i in range(count) if i % partitions == p]
            replicas = [[m.payload for m in node.logs[("events", p)]]
                        for node in cluster.brokers.values()
                        if ("events", p) in node.logs]
            current = [log for log in replicas if log == expected]
            assert len(current) >= cluster.replication_factor, f"case {case}"
            for log in replicas:  # a stand-in may lag, but never diverge
                assert log == expected[:len(log)], f"case {case} replica diverged"


def test_criterion_10():
    """All twelve decision cells match the table, outcomes are monotone in
    severity and in each support axis, and each Alert decision appends
    exactly one alert."""
    combos = list(itertools.product(list(RiskLevel), (False, True), (False, True)))
    assert len(combos) == 12
    assert set(DEFAULT_DECISION_TABLE) == set(combos)
    event = make_event()
    for level, realtime, historical in combos:
        decision = assess(RiskInputs(event, event.value, level, realtime, historical))
        outcome, confirmed, rationale = DEFAULT_DECISION_TABLE[(level, realtime, historical)]
        assert decision.outcome is outcome
        assert decision.confirmed is confirmed
        assert decision.rationale == rationale
        assert decision.level is level

        log = AlertLog()
        if decision.outcome is Outcome.ALERT:
            emit_alert(decision, event, log)
            assert len(log) == 1
        else:
            with pytest.raises(ValueError):
                emit_alert(decision, event, log)
            assert len(log) == 0

    def outcome_of(level, realtime, historical):
        return DEFAULT_DECISION_TABLE[(level, realtime, historical)][0]

    for realtime, historical in itertools.product((False, True), repeat=2):
        ladder = [outcome_of(level, realtime, historical) for level in sorted(RiskLevel)]
        assert ladder == sorted(ladder), f"not monotone in severity: {ladder}"
    for level in RiskLevel:
        for historical in (False, True):
            assert outcome_of(level, False, historical) <= outcome_of(level, True, historical)
        for realtime in (False, True):
            assert outcome_of(level, realtime, False) <= outcome_of(level, realtime, True)


EPISODES = (("2015-02-03 16:30:00", "2015-02-03 17:30:00"),
            ("2015-02-12 18:30:00", "2015-02-12 20:15:00"))


def test_criterion_11(tmp_path, capsys):
    """A full-dataset run raises confirmed CO2 alerts inside the two
    high-CO2 episodes, none anywhere else, and replays identically."""
    csv_path = str(DATASET)
    summaries, alert_bytes = [], []
    for name in ("first.jsonl", "second.jsonl"):
        alerts_path = tmp_path / name
        assert cli.main(["run", csv_path, "--alerts", str(alerts_path),
                         "--seed", "0"]) == 0
        summaries.append(json.loads(capsys.readouterr().out))
        alert_bytes.append(alerts_path.read_bytes())

    alerts = [json.loads(line) for line in alert_bytes[0].decode().splitlines()]
    assert alerts
    in_second_episode = [a for a in alerts
                         if a["severity"] == "confirmed"
                         and a["tag"] == "AirQualityPoor"
                         and EPISODES[1][0] <= a["time"] <= EPISODES[1][1]]
    assert in_second_episode, "no confirmed CO2 alert in the evening episode"
    for alert in alerts:
        assert any(lo <= alert["time"] <= hi for lo, hi in EPISODES), (
            f"alert outside the high-CO2 episodes: {alert}")

    assert alert_bytes[0] == alert_bytes[1]
    drop_walls = lambda s: {k: v for k, v in s.items()
                            if k not in ("wall_time_s", "events_per_s")}
    assert drop_walls(summaries[0]) == drop_walls(summaries[1])
