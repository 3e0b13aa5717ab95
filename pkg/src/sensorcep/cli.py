"""Command-line entry point wiring ingestion, the triple store, queries,
rule induction, the event pipeline, and the benchmark harness.

Data goes to standard output (or the file named by -o/--alerts); logs and
timings go to standard error. Exit codes: 0 success, 1 usage error, 2 bad
input data, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import timedelta
from pathlib import Path

from . import rdf
from .bench import (
    BenchConfig,
    DEFAULT_DATASET,
    DEFAULT_RULES,
    emit_report,
    render_report,
    run_suite,
)
from .broker import BrokerError, Cluster
from .cep import SinkError, RuleDeployError, Window, encode_record_triples, run_pipeline
from .config import ConfigError, load_config
from .ingest import EmptyDatasetError, IngestError, load_csv, preprocess
from .risk import AlertLog, HistoricalIndex, RiskStage, alert_line
from .rules import (
    InductionError,
    MissingFeatureError,
    RuleFormatError,
    extract_rules,
    format_rules,
    induce_tree,
    load_rules,
)
from .sparql import EvaluationError, QueryParseError, evaluate, parse_query

log = logging.getLogger("sensorcep")

_DATA_ERRORS = (
    IngestError,
    rdf.TripleParseError,
    QueryParseError,
    EvaluationError,
    InductionError,
    MissingFeatureError,
    RuleFormatError,
    ConfigError,
    FileNotFoundError,
    IsADirectoryError,
    UnicodeDecodeError,
    ValueError,
)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sensorcep",
                     description="rule-based event processing for building sensors")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="info-level diagnostics on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("convert", help="CSV readings to a triple file")
    p.add_argument("csv", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("query", help="evaluate a query file against a triple file")
    p.add_argument("store", type=Path)
    p.add_argument("query", type=Path)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("train-rules", help="induce a tree and print its rules")
    p.add_argument("csv", type=Path)
    p.add_argument("-o", "--output", type=Path)
    p.add_argument("--features", default="light,humidity,co2",
                   help="comma-separated feature list")
    p.set_defaults(func=_cmd_train_rules)

    p = sub.add_parser("run", help="full pipeline: broker, rules, risk, alerts")
    p.add_argument("csv", type=Path)
    p.add_argument("--rules", type=Path, help="rule file (default: built-in catalog)")
    p.add_argument("--bands", type=Path, help="config file with bands/thresholds")
    p.add_argument("--alerts", type=Path, help="write alerts here as JSON lines")
    p.add_argument("--seed", type=int, default=0,
                   help="recorded in the summary; the replay itself is deterministic")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("bench", help="benchmark suites")
    p.add_argument("--suite", required=True,
                   choices=("throughput", "deploy", "scaling", "metrics",
                            "kernel", "all"))
    p.add_argument("--counts", help="comma-separated event counts")
    p.add_argument("--trials", type=int)
    p.add_argument("--deploy-trials", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--include-large", action="store_true",
                   help="add the million-triple store tiers")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("-o", "--output", type=Path)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("gen-store", help="write a synthetic triple file")
    p.add_argument("--triples", type=int, required=True)
    p.add_argument("--classes", type=int, default=19)
    p.add_argument("--entities", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=_cmd_gen_store)

    return parser


def _cmd_convert(args) -> int:
    records = preprocess(load_csv(args.csv))
    store = rdf.store_records(records)
    args.output.write_text(rdf.serialize(store), encoding="utf-8")
    log.info("converted %d records to %d triples at %s",
             len(records), store.triple_count, args.output)
    return 0


def _cmd_query(args) -> int:
    store = rdf.parse(args.store.read_text(encoding="utf-8"))
    query = parse_query(args.query.read_text(encoding="utf-8"))
    result = evaluate(query, store)
    if args.format == "json":
        sys.stdout.write(result.to_json())
        sys.stdout.write("\n")
    else:
        sys.stdout.write(result.to_csv())
    print(f"{len(result)} rows, elapsed {result.elapsed:.4f}s", file=sys.stderr)
    return 0


def _cmd_train_rules(args) -> int:
    features = tuple(f.strip() for f in args.features.split(",") if f.strip())
    records = preprocess(load_csv(args.csv))
    tree = induce_tree(records, features=features)
    ruleset = extract_rules(tree)
    text = format_rules(ruleset)
    if args.output:
        args.output.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    correct = sum(1 for r in records if tree.predict(r) == r.occupancy)
    print(f"tree depth {tree.depth()}, {tree.leaf_count()} leaves, "
          f"{len(ruleset.rules)} rules, train accuracy "
          f"{correct / len(records):.4f}", file=sys.stderr)
    return 0


def _cmd_run(args) -> int:
    cfg = load_config(args.bands)
    records = preprocess(load_csv(args.csv))
    ruleset = load_rules(args.rules or DEFAULT_RULES)
    store = rdf.store_records(records)
    historical = HistoricalIndex(store, cfg.bands,
                                 min_rows=cfg.risk.historical_min_rows,
                                 span=timedelta(hours=cfg.risk.historical_span_hours))
    alerts = AlertLog(args.alerts) if args.alerts else AlertLog()
    stage = RiskStage(cfg.bands, historical, alerts, cfg.risk.table,
                      cfg.risk.window_size, cfg.risk.min_hits)
    cluster = Cluster(cfg.broker.broker_ids, cfg.broker.replication_factor)
    cluster.create_topic("events", cfg.broker.partitions)
    for record in records:
        cluster.publish("events", encode_record_triples(record))
    window = Window(cfg.pipeline.window_length) if cfg.pipeline.window_length > 1 else None
    stats = run_pipeline(cluster, "events", ruleset, cfg.thresholds, stage,
                         group=cfg.pipeline.group, window=window)
    alerts.close()
    confirmed = sum(1 for a in alerts if a.severity == "confirmed")
    summary = {
        "seed": args.seed,
        "events": stats.events_in,
        "complex_events": stats.complex_events_out,
        "alerts": len(alerts),
        "confirmed_alerts": confirmed,
        "outcomes": {o.name.lower(): n for o, n in sorted(stage.outcome_counts.items())},
        "wall_time_s": round(stats.wall_time, 4),
        "events_per_s": round(stats.throughput, 1),
    }
    if args.alerts:
        print(json.dumps(summary, indent=2))
    else:
        for alert in alerts:
            print(alert_line(alert))
        log.info("summary: %s", json.dumps(summary))
    return 0


def _cmd_bench(args) -> int:
    kwargs = {"seed": args.seed, "include_large": args.include_large}
    if args.counts:
        kwargs["event_counts"] = tuple(int(c) for c in args.counts.split(","))
    if args.trials:
        kwargs["trials"] = args.trials
    if args.deploy_trials:
        kwargs["deploy_trials"] = args.deploy_trials
    config = BenchConfig(**kwargs)
    report = run_suite(args.suite, config)
    if args.output:
        emit_report(report, args.format, args.output)
        log.info("wrote %d cells to %s", len(report.cells), args.output)
    else:
        sys.stdout.write(render_report(report, args.format))
    return 0


def _cmd_gen_store(args) -> int:
    entities = args.entities if args.entities is not None else max(1, args.triples // 4)
    store = rdf.generate_synthetic(args.triples, args.classes, entities,
                                   seed=args.seed)
    args.output.write_text(rdf.serialize(store), encoding="utf-8")
    log.info("wrote %d triples (%d classes, %d entities) to %s",
             store.triple_count, args.classes, entities, args.output)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(stream=sys.stderr,
                        level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BrokerError, RuleDeployError, SinkError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - unexpected failure path
        log.exception("unexpected failure")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
