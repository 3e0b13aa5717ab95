"""Flat key = value configuration with sections, read by configparser.

Recognized sections, all optional (anything omitted keeps its default):

    [bands]          tag = moderate_edge, risk_edge
    [thresholds]     complex-event edges (humidity_high, temperature_high, ...)
    [broker]         brokers = A, B, C / replication_factor / partitions
    [risk]           window_size, min_hits, historical_min_rows,
                     historical_span_hours, plus decision-table overrides of
                     the form decision.<Level>.<realtime>.<historical> = Outcome
    [pipeline]       window_length, group

A decision override names just the outcome; the confirmed flag becomes true
only for an Alert cell with both supports true, and the rationale records
that the cell was configured.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

from .cep import ComplexEventThresholds
from .risk import DEFAULT_BANDS, DEFAULT_DECISION_TABLE, Band, Outcome, RiskLevel


class ConfigError(ValueError):
    """Malformed or missing configuration input."""


@dataclass(frozen=True)
class BrokerSettings:
    broker_ids: tuple = ("A", "B", "C")
    replication_factor: int = 2
    partitions: int = 1


@dataclass(frozen=True)
class RiskSettings:
    window_size: int = 5
    min_hits: int = 2
    historical_min_rows: int = 1
    historical_span_hours: float = 24.0
    table: dict = field(default_factory=lambda: dict(DEFAULT_DECISION_TABLE))


@dataclass(frozen=True)
class PipelineSettings:
    window_length: int = 1
    group: str = "cep"


@dataclass(frozen=True)
class AppConfig:
    bands: dict
    thresholds: ComplexEventThresholds
    broker: BrokerSettings
    risk: RiskSettings
    pipeline: PipelineSettings


_LEVELS = {level.name.lower(): level for level in RiskLevel}
_OUTCOMES = {
    "noaction": Outcome.NO_ACTION,
    "no_action": Outcome.NO_ACTION,
    "watch": Outcome.WATCH,
    "takeaction": Outcome.TAKE_ACTION,
    "take_action": Outcome.TAKE_ACTION,
    "alert": Outcome.ALERT,
}
_BOOLS = {"true": True, "false": False}


def default_config() -> AppConfig:
    return AppConfig(dict(DEFAULT_BANDS), ComplexEventThresholds(),
                     BrokerSettings(), RiskSettings(), PipelineSettings())


def load_config(path=None) -> AppConfig:
    """Parse the file into settings; None gives pure defaults."""
    if path is None:
        return default_config()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return AppConfig(
        bands=_load_bands(parser),
        thresholds=_load_thresholds(parser),
        broker=_load_broker(parser),
        risk=_load_risk(parser),
        pipeline=_load_pipeline(parser),
    )


def _items(parser, section):
    return parser.items(section) if parser.has_section(section) else []


def _load_bands(parser) -> dict[str, Band]:
    bands = dict(DEFAULT_BANDS)
    tag_by_lower = {tag.lower(): tag for tag in bands}
    for key, value in _items(parser, "bands"):
        parts = [p.strip() for p in value.split(",")]
        if len(parts) != 2:
            raise ConfigError(f"[bands] {key}: expected 'moderate_edge, risk_edge'")
        try:
            band = Band(float(parts[0]), float(parts[1]))
        except ValueError as exc:
            raise ConfigError(f"[bands] {key}: {exc}") from None
        bands[tag_by_lower.get(key, key)] = band
    return bands


def _load_thresholds(parser) -> ComplexEventThresholds:
    known = {f.name for f in fields(ComplexEventThresholds)}
    overrides = {}
    for key, value in _items(parser, "thresholds"):
        if key not in known:
            raise ConfigError(f"[thresholds] unknown key {key!r}")
        try:
            overrides[key] = float(value)
        except ValueError:
            raise ConfigError(f"[thresholds] {key}: not a number: {value!r}") from None
    return ComplexEventThresholds(**overrides)


def _get_int(parser, section, key, default) -> int:
    if not parser.has_option(section, key):
        return default
    try:
        return int(parser.get(section, key))
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not an integer") from None


def _get_float(parser, section, key, default) -> float:
    if not parser.has_option(section, key):
        return default
    try:
        return float(parser.get(section, key))
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not a number") from None


def _load_broker(parser) -> BrokerSettings:
    defaults = BrokerSettings()
    ids = defaults.broker_ids
    if parser.has_option("broker", "brokers"):
        ids = tuple(p.strip() for p in parser.get("broker", "brokers").split(",")
                    if p.strip())
        if not ids:
            raise ConfigError("[broker] brokers: empty list")
    return BrokerSettings(
        broker_ids=ids,
        replication_factor=_get_int(parser, "broker", "replication_factor",
                                    defaults.replication_factor),
        partitions=_get_int(parser, "broker", "partitions", defaults.partitions),
    )


def _load_risk(parser) -> RiskSettings:
    defaults = RiskSettings()
    table = dict(DEFAULT_DECISION_TABLE)
    for key, value in _items(parser, "risk"):
        if not key.startswith("decision."):
            continue
        parts = key.split(".")
        if len(parts) != 4:
            raise ConfigError(f"[risk] {key}: expected decision.<level>.<realtime>.<historical>")
        level = _LEVELS.get(parts[1].lower())
        realtime = _BOOLS.get(parts[2].lower())
        historical = _BOOLS.get(parts[3].lower())
        outcome = _OUTCOMES.get(value.strip().lower())
        if level is None or realtime is None or historical is None:
            raise ConfigError(f"[risk] {key}: bad decision cell key")
        if outcome is None:
            raise ConfigError(f"[risk] {key}: unknown outcome {value!r}")
        confirmed = outcome is Outcome.ALERT and realtime and historical
        rationale = (f"configured cell: {level.name.lower()} with "
                     f"realtime={realtime}, historical={historical}")
        table[(level, realtime, historical)] = (outcome, confirmed, rationale)
    settings = RiskSettings(
        window_size=_get_int(parser, "risk", "window_size", defaults.window_size),
        min_hits=_get_int(parser, "risk", "min_hits", defaults.min_hits),
        historical_min_rows=_get_int(parser, "risk", "historical_min_rows",
                                     defaults.historical_min_rows),
        historical_span_hours=_get_float(parser, "risk", "historical_span_hours",
                                         defaults.historical_span_hours),
        table=table,
    )
    if settings.min_hits < 1 or settings.window_size < settings.min_hits:
        raise ConfigError("[risk] need 1 <= min_hits <= window_size")
    return settings


def _load_pipeline(parser) -> PipelineSettings:
    defaults = PipelineSettings()
    group = parser.get("pipeline", "group") if parser.has_option("pipeline", "group") \
        else defaults.group
    settings = PipelineSettings(
        window_length=_get_int(parser, "pipeline", "window_length",
                               defaults.window_length),
        group=group,
    )
    if settings.window_length < 1:
        raise ConfigError("[pipeline] window_length must be >= 1")
    return settings
