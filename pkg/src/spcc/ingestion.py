"""Measurement collection: parsing CSV/JSON-lines payloads, plausibility
validation against the measurement plan, and duplicate detection.

All data problems become findings; nothing aborts a batch except non-UTF-8
input.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .data import DataEntry, MeasurementPoint, build_entries
from .errors import EncodingError
from .gqm import GqmPlan
from .steps import normalize_path
from .util import canonical_timestamp

CSV_HEADER = ["timestamp", "project", "process_step", "metric", "subject", "value", "unit"]

FORMAT_CSV = "csv"
FORMAT_JSONL = "json-lines"

SEVERITY_WARNING = "warning"
SEVERITY_REJECT = "reject"

# Finding codes; all parse-level malformations use BAD_TIMESTAMP with the
# real cause in the message.
OUT_OF_RANGE = "OUT_OF_RANGE"
UNKNOWN_METRIC = "UNKNOWN_METRIC"
UNKNOWN_STEP = "UNKNOWN_STEP"
BAD_TIMESTAMP = "BAD_TIMESTAMP"
UNIT_MISMATCH = "UNIT_MISMATCH"
DUPLICATE = "DUPLICATE"


@dataclass(frozen=True)
class RawRecord:
    """One collected row, verbatim; validation happens later."""

    timestamp: str
    project_id: str
    process_step_path: str
    metric_id: str
    subject_id: str
    value: str
    unit: str
    source_id: str = ""

    @classmethod
    def from_mapping(cls, d: Mapping, source_id: str = "") -> "RawRecord":
        return cls(
            timestamp=str(d.get("timestamp", "")),
            project_id=str(d.get("project", "")),
            process_step_path=str(d.get("process_step", "")),
            metric_id=str(d.get("metric", "")),
            subject_id=str(d.get("subject", "")),
            value=str(d.get("value", "")),
            unit=str(d.get("unit", "")),
            source_id=source_id,
        )


@dataclass(frozen=True)
class ValidationFinding:
    index: int  # data-row index within the batch, 0-based
    severity: str  # warning | reject
    code: str
    message: str

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "severity": self.severity,
            "code": self.code,
            "message": self.message,
        }


@dataclass(frozen=True)
class SourceAdapter:
    source_id: str
    kind: str  # csv-file | json-lines-file | api-push
    location: str | None = None

    def __post_init__(self):
        if self.kind not in ("csv-file", "json-lines-file", "api-push"):
            raise ValueError(f"unknown source adapter kind {self.kind!r}")

    def to_dict(self) -> dict:
        d = {"id": self.source_id, "kind": self.kind}
        if self.location:
            d["location"] = self.location
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "SourceAdapter":
        return cls(source_id=d["id"], kind=d["kind"], location=d.get("location"))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def parse_records(
    data: bytes, fmt: str, *, source_id: str = ""
) -> tuple[list[RawRecord], list[ValidationFinding]]:
    """Parse a CSV or JSON-lines payload into raw records, row order kept.

    Malformed rows produce reject findings at their index instead of
    aborting the batch; only non-UTF-8 input raises.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise EncodingError(f"payload is not UTF-8: {e}") from None
    if fmt == FORMAT_CSV:
        return _parse_csv(text, source_id)
    if fmt == FORMAT_JSONL:
        return _parse_jsonl(text, source_id)
    raise ValueError(f"unknown format {fmt!r}")


def _parse_row_finding(index: int, message: str) -> ValidationFinding:
    return ValidationFinding(index=index, severity=SEVERITY_REJECT, code=BAD_TIMESTAMP, message=message)


def _check_record(rec: RawRecord, index: int) -> ValidationFinding | None:
    try:
        canonical_timestamp(rec.timestamp)
    except (ValueError, TypeError):
        return _parse_row_finding(index, f"unparseable timestamp {rec.timestamp!r}")
    try:
        float(rec.value)
    except (TypeError, ValueError):
        return _parse_row_finding(index, f"value {rec.value!r} is not numeric")
    return None


def _parse_csv(text: str, source_id: str) -> tuple[list[RawRecord], list[ValidationFinding]]:
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        return [], []
    header = [h.strip().lower() for h in rows[0]]
    if header != CSV_HEADER:
        return [], [
            _parse_row_finding(0, f"bad CSV header {header!r}, expected {CSV_HEADER!r}")
        ]
    records: list[RawRecord] = []
    findings: list[ValidationFinding] = []
    for index, row in enumerate(rows[1:]):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(CSV_HEADER):
            findings.append(
                _parse_row_finding(index, f"expected {len(CSV_HEADER)} columns, got {len(row)}")
            )
            continue
        rec = RawRecord.from_mapping(dict(zip(CSV_HEADER, (c.strip() for c in row))), source_id)
        bad = _check_record(rec, index)
        if bad:
            findings.append(bad)
        else:
            records.append(rec)
    return records, findings


def _parse_jsonl(text: str, source_id: str) -> tuple[list[RawRecord], list[ValidationFinding]]:
    records: list[RawRecord] = []
    findings: list[ValidationFinding] = []
    index = -1
    for line in text.splitlines():
        if not line.strip():
            continue
        index += 1
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            findings.append(_parse_row_finding(index, f"bad JSON line: {e}"))
            continue
        if not isinstance(obj, dict):
            findings.append(_parse_row_finding(index, "JSON line is not an object"))
            continue
        missing = [k for k in CSV_HEADER if k not in obj]
        if missing:
            findings.append(_parse_row_finding(index, f"missing fields {missing}"))
            continue
        rec = RawRecord.from_mapping(obj, source_id)
        bad = _check_record(rec, index)
        if bad:
            findings.append(bad)
        else:
            records.append(rec)
    return records, findings


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_records(
    records: Sequence[RawRecord],
    plan: GqmPlan,
    *,
    existing_keys: Iterable[tuple] = (),
) -> tuple[list[DataEntry], list[ValidationFinding]]:
    """Plausibility-check raw records against the plan.

    Rejects: unknown metric, unknown step, unit mismatch. Warnings:
    out-of-range value (record kept), exact duplicate of an accepted record
    (record dropped, first occurrence wins). Accepted points are merged
    into per-metric data entries sorted by timestamp.
    """
    accepted: list[MeasurementPoint] = []
    findings: list[ValidationFinding] = []
    seen: set[tuple] = set(existing_keys)
    for index, rec in enumerate(records):
        metric = plan.metric(rec.metric_id)
        if metric is None:
            findings.append(
                ValidationFinding(
                    index, SEVERITY_REJECT, UNKNOWN_METRIC, f"metric {rec.metric_id!r} not in plan"
                )
            )
            continue
        if rec.process_step_path not in plan.steps:
            findings.append(
                ValidationFinding(
                    index,
                    SEVERITY_REJECT,
                    UNKNOWN_STEP,
                    f"step {rec.process_step_path!r} not in process tree",
                )
            )
            continue
        if rec.unit != metric.unit:
            findings.append(
                ValidationFinding(
                    index,
                    SEVERITY_REJECT,
                    UNIT_MISMATCH,
                    f"unit {rec.unit!r} does not match metric unit {metric.unit!r}",
                )
            )
            continue
        try:
            ts = canonical_timestamp(rec.timestamp)
            value = float(rec.value)
        except (TypeError, ValueError) as e:  # already caught at parse; defensive
            findings.append(ValidationFinding(index, SEVERITY_REJECT, BAD_TIMESTAMP, str(e)))
            continue
        point = MeasurementPoint(
            timestamp=ts,
            metric_id=rec.metric_id,
            step_path=normalize_path(rec.process_step_path),
            subject_id=rec.subject_id,
            value=value,
            unit=rec.unit,
            source_id=rec.source_id,
        )
        key = point.dedup_key()
        if key in seen:
            findings.append(
                ValidationFinding(
                    index,
                    SEVERITY_WARNING,
                    DUPLICATE,
                    "exact duplicate of an accepted record; dropped",
                )
            )
            continue
        if not metric.in_domain(value):
            findings.append(
                ValidationFinding(
                    index,
                    SEVERITY_WARNING,
                    OUT_OF_RANGE,
                    f"value {value} outside plausibility range {list(metric.value_domain)}",
                )
            )
        seen.add(key)
        accepted.append(point)
    return build_entries(accepted), findings


def accepted_points(entries: Iterable[DataEntry]) -> list[MeasurementPoint]:
    out: list[MeasurementPoint] = []
    for e in entries:
        out.extend(e.series)
    return out


def tally(findings: Iterable[ValidationFinding]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for f in findings:
        counts[f.code] = counts.get(f.code, 0) + 1
    return counts
