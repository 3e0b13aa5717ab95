"""Benchmark harness: metrics math, report plumbing, small-scale suite runs."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sensorcep import kernel
from sensorcep.bench import (
    DEFAULT_STORE_SPECS,
    SCALING_QUERIES,
    SUITES,
    THROUGHPUT_GATES,
    BenchCell,
    BenchConfig,
    BenchReport,
    EventGate,
    StoreSpec,
    compute_metrics,
    emit_report,
    render_report,
    run_deployment_bench,
    run_kernel_bench,
    run_metrics,
    run_query_scaling,
    run_suite,
    run_throughput,
    split_records,
)
from sensorcep.rdf import parse, serialize

from tests.oracles import exact_metrics


# ---------------------------------------------------------------- metrics

def test_metrics_perfect_prediction():
    m = compute_metrics([0, 1, 0, 1], [0, 1, 0, 1])
    assert m.accuracy == 1.0
    assert m.precision == 1.0
    assert m.recall == 1.0
    assert m.f1 == 1.0
    assert (m.tp, m.fp, m.tn, m.fn) == (2, 0, 2, 0)


def test_metrics_worked_example():
    # 3 true positives, 1 false positive, 2 false negatives, 4 true negatives
    predicted = [1, 1, 1, 1, 0, 0, 0, 0, 0, 0]
    actual = [1, 1, 1, 0, 1, 1, 0, 0, 0, 0]
    m = compute_metrics(predicted, actual)
    assert (m.tp, m.fp, m.fn, m.tn) == (3, 1, 2, 4)
    assert m.accuracy == pytest.approx(0.7)
    assert m.precision == pytest.approx(0.75)
    assert m.recall == pytest.approx(0.6)
    assert m.f1 == pytest.approx(2 / 3)


def test_metrics_empty_inputs_use_identity_conventions():
    m = compute_metrics([], [])
    assert (m.accuracy, m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0, 1.0)


def test_metrics_no_predicted_or_actual_positives():
    m = compute_metrics([0, 0, 0], [0, 0, 0])
    assert (m.precision, m.recall, m.f1, m.accuracy) == (1.0, 1.0, 1.0, 1.0)


def test_metrics_all_negative_predictions_against_positives():
    m = compute_metrics([0, 0], [1, 1])
    assert m.precision == 1.0  # no positive predictions to be wrong about
    assert m.recall == 0.0
    assert m.f1 == 0.0
    assert m.accuracy == 0.0


def test_metrics_length_mismatch_rejected():
    with pytest.raises(ValueError):
        compute_metrics([0, 1], [0])


@pytest.mark.parametrize("predicted,actual", [
    ([0, 2], [0, 1]),
    ([0, 1], [0, -1]),
    ([0.5, 1], [0, 1]),
])
def test_metrics_non_binary_labels_rejected(predicted, actual):
    with pytest.raises(ValueError):
        compute_metrics(predicted, actual)


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), max_size=60))
@settings(max_examples=80, deadline=None)
def test_metrics_match_exact_rational_oracle(pairs):
    predicted = [p for p, _ in pairs]
    actual = [a for _, a in pairs]
    m = compute_metrics(predicted, actual)
    exact = exact_metrics(predicted, actual)
    for name in ("accuracy", "precision", "recall", "f1"):
        assert abs(getattr(m, name) - float(exact[name])) <= 1e-12
    for name in ("tp", "fp", "tn", "fn"):
        assert getattr(m, name) == exact[name]


# ---------------------------------------------------------------- config

def test_bench_config_defaults():
    config = BenchConfig()
    assert config.event_counts == (10000, 20000, 30000, 40000, 50000)
    assert config.trials == 5
    assert config.deploy_trials == 20
    assert config.store_specs == DEFAULT_STORE_SPECS


@pytest.mark.parametrize("kwargs", [
    {"event_counts": (0,)},
    {"event_counts": (-5, 100)},
    {"trials": 0},
    {"deploy_trials": 0},
])
def test_bench_config_validation(kwargs):
    with pytest.raises(ValueError):
        BenchConfig(**kwargs)


def test_split_records_is_seeded_partition(dataset_records):
    train, test = split_records(dataset_records, seed=0)
    assert len(train) + len(test) == len(dataset_records)
    assert len(train) == int(len(dataset_records) * 0.75)
    ids = {r.row_id for r in train} | {r.row_id for r in test}
    assert len(ids) == len(dataset_records)
    train2, test2 = split_records(dataset_records, seed=0)
    assert [r.row_id for r in test2] == [r.row_id for r in test]
    _, test_other = split_records(dataset_records, seed=1)
    assert [r.row_id for r in test_other] != [r.row_id for r in test]


# ---------------------------------------------------------------- gates

def test_throughput_gates_hit_every_reading(dataset_records):
    # gate filters are sanity bands, so rates measure query cost not selectivity
    for name, gate in THROUGHPUT_GATES.items():
        assert all(gate(r) for r in dataset_records[:50]), name


def test_event_gate_can_miss(dataset_records):
    gate = EventGate("narrow", """
        PREFIX ns1: <http://schema.org/>
        SELECT ?co2 WHERE {
          ?obs ns1:CO2 ?co2 .
          FILTER ( xsd:float(?co2) > 100000.0 )
        }
    """)
    assert not gate(dataset_records[0])


# ---------------------------------------------------------------- suites

def tiny_config(**overrides) -> BenchConfig:
    base = dict(event_counts=(200,), trials=1, deploy_trials=2, seed=0,
                store_specs=(StoreSpec("S1", 400, 5, 60),
                             StoreSpec("S2", 1200, 7, 150)),
                metrics_sample=300)
    base.update(overrides)
    return BenchConfig(**base)


def test_throughput_cells_cover_gate_count_grid(dataset_records):
    report = run_throughput(tiny_config(event_counts=(50, 100)),
                            records=dataset_records)
    cells = report.table("throughput")
    assert len(cells) == len(THROUGHPUT_GATES) * 2
    rows = [c.row for c in cells]
    assert rows == [q for q in THROUGHPUT_GATES for _ in range(2)]
    for cell in cells:
        assert cell.column in ("50", "100")
        assert not cell.failed
        assert cell.unit == "events/s"
        assert cell.mean > 0
        assert cell.trials == 1
        assert cell.seconds_mean > 0


def test_throughput_empty_counts_gives_empty_report(dataset_records):
    config = BenchConfig(event_counts=(), trials=1)
    report = run_throughput(config, records=dataset_records)
    assert report.cells == []


def test_deployment_cells_cover_idle_and_loaded(dataset_records):
    report = run_deployment_bench(tiny_config(event_counts=(2000,)),
                                  records=dataset_records)
    cells = report.table("deployment")
    assert [c.row for c in cells] == ["idle", "2000"]
    for cell in cells:
        assert cell.column == "latency"
        assert cell.unit == "s"
        assert cell.trials == 2
        assert cell.mean >= 0
        assert not cell.failed


def test_query_scaling_grid_and_cell_lookup():
    config = tiny_config(trials=2)
    report = run_query_scaling(config)
    cells = report.table("query_scaling")
    expected_rows = [qid + ("*" if is_complex else "")
                     for qid, _, is_complex in SCALING_QUERIES]
    assert sorted({c.row for c in cells}) == sorted(expected_rows)
    assert {c.column for c in cells} == {"S1", "S2"}
    assert len(cells) == len(SCALING_QUERIES) * 2
    probe = report.cell("query_scaling", "Q4*", "S2")
    assert probe.unit == "s"
    assert probe.mean >= 0
    assert not probe.failed
    with pytest.raises(KeyError):
        report.cell("query_scaling", "Q99", "S1")


def test_metrics_suite_reports_classification_cells(dataset_records):
    report = run_metrics(tiny_config(), records=dataset_records)
    cells = {c.row: c for c in report.table("classification")}
    assert set(cells) == {"accuracy", "precision", "recall", "f1",
                          "tp", "fp", "tn", "fn"}
    assert all(c.column == "value" for c in cells.values())
    assert cells["accuracy"].mean >= 0.9
    p, r = cells["precision"].mean, cells["recall"].mean
    if p + r > 0:
        assert cells["f1"].mean == pytest.approx(2 * p * r / (p + r))
    counted = sum(cells[k].mean for k in ("tp", "fp", "tn", "fn"))
    assert counted == 300


def test_metrics_suite_is_reproducible(dataset_records):
    config = tiny_config(metrics_sample=200)
    first = run_metrics(config, records=dataset_records)
    second = run_metrics(config, records=dataset_records)
    key = lambda report: [(c.row, c.column, c.mean) for c in report.cells]
    assert key(first) == key(second)


def test_kernel_bench_reports_backends(dataset_records):
    report = run_kernel_bench(tiny_config(event_counts=(2000,), trials=2),
                              records=dataset_records)
    cells = {c.row: c for c in report.table("kernel")}
    assert set(kernel.available_backends()) <= set(cells)
    assert all(cells[name].column == "batch_match"
               for name in kernel.available_backends())
    if "compiled" in cells:
        speedup = cells["speedup"]
        assert not speedup.failed
        assert speedup.unit == "x"
        assert speedup.mean > 0
    else:
        assert cells["speedup"].failed


def test_run_suite_rejects_unknown_name():
    with pytest.raises(ValueError):
        run_suite("nope", tiny_config())
    assert set(SUITES) == {"throughput", "deploy", "scaling",
                           "metrics", "kernel"}


def test_run_suite_all_merges_every_table():
    config = tiny_config(event_counts=(100,), trials=1, deploy_trials=1,
                         metrics_sample=50,
                         store_specs=(StoreSpec("S1", 300, 4, 50),))
    report = run_suite("all", config)
    tables = {c.table for c in report.cells}
    assert tables == {"throughput", "deployment", "query_scaling",
                      "classification", "kernel"}
    assert report.seed == 0
    assert report.environment


# ---------------------------------------------------------------- reports

def sample_report() -> BenchReport:
    return BenchReport(seed=7, environment="test-env", cells=[
        BenchCell("throughput", "Q1", "100", 1234.5, 6.25, "events/s", 3,
                  0.081, 0.00041),
        BenchCell("deployment", "idle", "latency", 0.0005, 0.0001, "s", 2),
        BenchCell("query_scaling", "Q4*", "S1", 0.25, 0.0, "s", 1,
                  failed=True, error="boom"),
    ])


def test_render_csv_shape():
    text = render_report(sample_report(), "csv")
    lines = text.splitlines()
    assert lines[0] == ("table,row,column,mean,stddev,unit,trials,"
                        "seconds_mean,seconds_stddev,failed,error")
    assert len(lines) == 4
    assert lines[1].startswith("throughput,Q1,100,1234.5,6.25,events/s,3,")
    assert ",True,boom" in lines[3]
    # cells without timed totals leave those fields empty
    assert ",s,2,,,False," in lines[2]


def test_render_csv_roundtrips_float_values():
    import csv as _csv
    import io

    text = render_report(sample_report(), "csv")
    rows = list(_csv.DictReader(io.StringIO(text)))
    assert float(rows[0]["mean"]) == 1234.5
    assert float(rows[0]["seconds_stddev"]) == 0.00041
    assert rows[1]["seconds_mean"] == ""


def test_render_json_matches_csv_values():
    report = sample_report()
    body = json.loads(render_report(report, "json"))
    assert body["seed"] == 7
    assert body["environment"] == "test-env"
    assert len(body["cells"]) == 3
    assert body["cells"][0]["mean"] == 1234.5
    assert body["cells"][2]["failed"] is True
    assert body["cells"][2]["error"] == "boom"
    assert render_report(report, "json").endswith("\n")


def test_render_empty_report_is_header_only():
    empty = BenchReport(seed=0, environment="e", cells=[])
    assert render_report(empty, "csv").splitlines() == [
        "table,row,column,mean,stddev,unit,trials,"
        "seconds_mean,seconds_stddev,failed,error"]
    assert json.loads(render_report(empty, "json"))["cells"] == []


def test_render_unknown_format_rejected():
    with pytest.raises(ValueError):
        render_report(sample_report(), "yaml")


def test_emit_report_writes_file(tmp_path):
    path = emit_report(sample_report(), "json", tmp_path / "report.json")
    assert path.read_text(encoding="utf-8") == render_report(sample_report(),
                                                             "json")


def test_report_merge_concatenates_cells():
    a = sample_report()
    b = BenchReport(seed=7, environment="test-env", cells=[
        BenchCell("kernel", "compiled", "batch_match", 0.001, 0.0, "s", 2)])
    merged = a.merge(b)
    assert len(merged.cells) == 4
    assert merged.cells[-1].table == "kernel"
    assert len(a.cells) == 3


def test_bench_cell_defaults():
    cell = BenchCell("t", "r", "c", 1.0, 0.0, "s", 1)
    assert cell.seconds_mean is None
    assert cell.seconds_stddev is None
    assert cell.failed is False
    assert cell.error == ""


def test_store_specs_are_well_formed():
    for spec in DEFAULT_STORE_SPECS:
        assert spec.triples > 0
        assert spec.entities > 0
        assert spec.classes > 0
        # room for property triples beyond the per-entity type triple
        assert spec.triples >= spec.entities * 2


def test_scaling_store_specs_roundtrip_through_exchange_format():
    from sensorcep.rdf import generate_synthetic

    spec = StoreSpec("tiny", 120, 3, 20)
    store = generate_synthetic(spec.triples, spec.classes, spec.entities,
                               seed=5)
    assert len(store) == 120
    again = parse(serialize(store))
    assert len(again) == len(store)
