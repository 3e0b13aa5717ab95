"""CSV ingestion: load, validate, and preprocess sensor records.

Records come from occupancy-style CSV files: one header line, then one row
per observation with an id, a space-separated timestamp, five numeric
features, and a binary occupancy label. Everything here is a pure function
over immutable inputs; no shared mutable state.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace, field, fields as dc_fields
from datetime import datetime
from typing import Iterable

log = logging.getLogger(__name__)

DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

NUMERIC_FIELDS = ("temperature", "humidity", "light", "co2", "humidity_ratio")
FILLABLE_FIELDS = NUMERIC_FIELDS + ("occupancy",)


class IngestError(Exception):
    """Base class for dataset loading and preprocessing failures."""


class MalformedRowError(IngestError):
    """A CSV row that cannot be parsed under the active column mapping."""

    def __init__(self, row_number: int, message: str):
        super().__init__(f"row {row_number}: {message}")
        self.row_number = row_number


class EmptyDatasetError(IngestError):
    """Raised when preprocessing leaves no usable records."""


@dataclass(frozen=True)
class SensorRecord:
    """One observation. Numeric fields may be None before preprocessing."""

    row_id: str
    timestamp: datetime | None
    temperature: float | None
    humidity: float | None
    light: float | None
    co2: float | None
    humidity_ratio: float | None
    occupancy: int | None

    def violations(self) -> list[str]:
        """Return invariant violations; empty list means the record is valid."""
        out = []
        if not self.row_id:
            out.append("empty row_id")
        if self.timestamp is None:
            out.append("missing timestamp")
        for name in NUMERIC_FIELDS:
            if getattr(self, name) is None:
                out.append(f"missing {name}")
        if self.occupancy is None:
            out.append("missing occupancy")
        elif self.occupancy not in (0, 1):
            out.append(f"occupancy {self.occupancy} not in {{0, 1}}")
        for name in ("light", "co2", "humidity"):
            v = getattr(self, name)
            if v is not None and v < 0:
                out.append(f"{name} {v} < 0")
        hr = self.humidity_ratio
        if hr is not None and not (0 < hr < 0.1):
            out.append(f"humidity_ratio {hr} outside (0, 0.1)")
        return out

    def is_valid(self) -> bool:
        return not self.violations()


@dataclass(frozen=True)
class ColumnMapping:
    """Maps CSV column positions onto record fields.

    ``columns`` maps each record field name to a zero-based column index.
    ``extra_column_index`` tolerates files whose rows carry one unnamed extra
    column: when a row is exactly one field wider than the mapped width, the
    extra value is assumed to sit at that index and mapped indices at or past
    it shift right by one.
    """

    columns: dict[str, int] = field(
        default_factory=lambda: {
            "row_id": 0,
            "timestamp": 1,
            "temperature": 2,
            "humidity": 3,
            "light": 4,
            "co2": 5,
            "humidity_ratio": 6,
            "occupancy": 7,
        }
    )
    date_format: str = DATE_FORMAT
    extra_column_index: int | None = 6

    def __post_init__(self):
        expected = {f.name for f in dc_fields(SensorRecord)}
        got = set(self.columns)
        if got != expected:
            raise ValueError(f"mapping must cover every record field exactly once; got {sorted(got)}")
        if len(set(self.columns.values())) != len(self.columns):
            raise ValueError("mapping assigns two fields to one column index")

    @property
    def width(self) -> int:
        return max(self.columns.values()) + 1

    def indices_for(self, row_width: int) -> dict[str, int]:
        """Resolve per-field indices, absorbing one extra column if present."""
        if row_width == self.width + 1 and self.extra_column_index is not None:
            shift = self.extra_column_index
            return {k: (v + 1 if v >= shift else v) for k, v in self.columns.items()}
        return dict(self.columns)


DEFAULT_MAPPING = ColumnMapping()
DEFAULT_HEADER = ("id", "date", "Temperature", "Humidity", "Light", "CO2", "HumidityRatio", "Occupancy")


def _parse_cell(name: str, text: str, row_number: int, date_format: str):
    text = text.strip()
    if name == "row_id":
        return text
    if text == "":
        return None
    if name == "timestamp":
        try:
            return datetime.strptime(text, date_format)
        except ValueError as exc:
            raise MalformedRowError(row_number, f"bad date {text!r}: {exc}") from None
    if name == "occupancy":
        try:
            return int(float(text))
        except ValueError:
            raise MalformedRowError(row_number, f"bad occupancy {text!r}") from None
    try:
        return float(text)
    except ValueError:
        raise MalformedRowError(row_number, f"bad {name} value {text!r}") from None


def load_csv(path, mapping: ColumnMapping = DEFAULT_MAPPING) -> list[SensorRecord]:
    """Load records from a CSV file, one per data row, in file order.

    The first line is treated as a header and skipped. Raises
    MalformedRowError (with the 1-based row number) for rows that do not
    parse; missing cells become None fields for preprocess() to repair.
    """
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for row_number, row in enumerate(reader, start=1):
            if row_number == 1 or not row:
                continue
            width = len(row)
            indices = mapping.indices_for(width)
            if max(indices.values()) >= width:
                raise MalformedRowError(
                    row_number, f"expected at least {mapping.width} columns, found {width}"
                )
            values = {
                name: _parse_cell(name, row[idx], row_number, mapping.date_format)
                for name, idx in indices.items()
            }
            records.append(SensorRecord(**values))
    return records


def write_csv(records: Iterable[SensorRecord], path, mapping: ColumnMapping = DEFAULT_MAPPING) -> None:
    """Write records so that load_csv reads back an equal list."""
    inverse = sorted(mapping.columns.items(), key=lambda kv: kv[1])
    header_by_field = dict(zip(("row_id", "timestamp", "temperature", "humidity",
                                "light", "co2", "humidity_ratio", "occupancy"),
                               DEFAULT_HEADER))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([header_by_field.get(name, name) for name, _ in inverse])
        for rec in records:
            row = []
            for name, _ in inverse:
                v = getattr(rec, name)
                if v is None:
                    row.append("")
                elif name == "timestamp":
                    row.append(v.strftime(mapping.date_format))
                elif name == "row_id":
                    row.append(v)
                elif name == "occupancy":
                    row.append(str(v))
                else:
                    row.append(repr(v))
            writer.writerow(row)


@dataclass(frozen=True)
class PreprocessReport:
    kept: int
    dropped: int
    filled: int


def preprocess_report(records: list[SensorRecord]) -> tuple[list[SensorRecord], PreprocessReport]:
    """Repair or drop records so every survivor satisfies all invariants.

    Policy: missing numeric fields and labels are forward-filled from the
    previous record that had the field; records with no fillable source, a
    missing timestamp or id, or out-of-range values are dropped and counted.
    """
    out: list[SensorRecord] = []
    last_seen: dict[str, object] = {}
    filled = 0
    for rec in records:
        patch = {}
        for name in FILLABLE_FIELDS:
            if getattr(rec, name) is None and name in last_seen:
                patch[name] = last_seen[name]
        if patch:
            rec = replace(rec, **patch)
            filled += len(patch)
        if rec.is_valid():
            out.append(rec)
            for name in FILLABLE_FIELDS:
                last_seen[name] = getattr(rec, name)
    report = PreprocessReport(kept=len(out), dropped=len(records) - len(out), filled=filled)
    if records and not out:
        raise EmptyDatasetError("no records survived preprocessing")
    log.info("preprocess: kept=%d dropped=%d filled=%d", report.kept, report.dropped, report.filled)
    return out, report


def preprocess(records: list[SensorRecord]) -> list[SensorRecord]:
    """preprocess_report() without the report; see that function for policy."""
    out, _ = preprocess_report(records)
    return out
