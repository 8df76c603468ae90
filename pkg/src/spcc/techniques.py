"""Control techniques: monitoring, baseline comparison, tolerance checking,
prediction, and hierarchical aggregation, plus the extensible registry that
makes them available to catena execution.

All techniques are pure functions over immutable inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import steps as step_paths
from .data import DataEntry, DataSnapshot, MeasurementPoint
from .errors import DuplicateTechnique, InsufficientData, UnitMismatch, UnknownStep

# Point statuses / flags
OK = "OK"
WARN = "WARN"
VIOLATION = "VIOLATION"
NO_BASELINE = "NO_BASELINE"
MISSING_ACTUAL = "MISSING_ACTUAL"
UNDEFINED_REL = "UNDEFINED_REL"

RELATIVE = "relative"
ABSOLUTE = "absolute"

LINEAR_LEAST_SQUARES = "linear-least-squares"
LAST_VALUE_HOLD = "last-value-hold"

# Output kinds produced by techniques
KIND_SUMMARY = "summary"
KIND_CLASSIFIED = "classified-series"
KIND_DEVIATION = "deviation-series"
KIND_FORECAST = "forecast-series"
KIND_ROLLED_UP = "rolled-up-series"

KIND_DATA_ENTRY = "data-entry"


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Baseline:
    """Planned cumulative values per process step for one metric."""

    baseline_id: str
    metric_id: str
    points: tuple[tuple[str, float], ...]  # (step_path, planned)
    unit: str
    source: str = "planned"

    def __post_init__(self):
        seen = set()
        for step, planned in self.points:
            if step in seen:
                raise ValueError(f"baseline {self.baseline_id!r}: duplicate step {step!r}")
            seen.add(step)
            if planned < 0:
                raise ValueError(
                    f"baseline {self.baseline_id!r}: planned value for {step!r} is negative"
                )

    @property
    def mapping(self) -> dict[str, float]:
        return dict(self.points)

    def step_list(self) -> list[str]:
        return [s for s, _ in self.points]

    def to_rows(self) -> list[dict]:
        return [
            {"metric": self.metric_id, "process_step": s, "planned": v, "unit": self.unit}
            for s, v in self.points
        ]


@dataclass(frozen=True)
class ToleranceSpec:
    """Symmetric deviation band: OK within warn, WARN within violation."""

    mode: str
    warn_threshold: float
    violation_threshold: float

    def __post_init__(self):
        if self.mode not in (RELATIVE, ABSOLUTE):
            raise ValueError(f"tolerance mode must be relative|absolute, got {self.mode!r}")
        if self.warn_threshold < 0 or self.violation_threshold < 0:
            raise ValueError("tolerance thresholds must be non-negative")
        if self.warn_threshold > self.violation_threshold:
            raise ValueError("warn_threshold must not exceed violation_threshold")

    @classmethod
    def from_dict(cls, d: Mapping) -> "ToleranceSpec":
        return cls(
            mode=d.get("mode", RELATIVE),
            warn_threshold=float(d["warn"]),
            violation_threshold=float(d["violation"]),
        )

    def to_dict(self) -> dict:
        return {"mode": self.mode, "warn": self.warn_threshold, "violation": self.violation_threshold}


@dataclass(frozen=True)
class Summary:
    count: int
    min: float | None = None
    max: float | None = None
    mean: float | None = None
    last: float | None = None
    cumulative: float | None = None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"count": self.count}
        for name in ("min", "max", "mean", "last", "cumulative"):
            v = getattr(self, name)
            if v is not None:
                d[name] = v
        return d


@dataclass(frozen=True)
class DeviationPoint:
    step_path: str
    actual: float | None
    planned: float | None
    deviation_abs: float | None
    deviation_rel: float | None
    flag: str | None = None  # UNDEFINED_REL | MISSING_ACTUAL | NO_BASELINE

    def to_dict(self) -> dict:
        return {
            "step": self.step_path,
            "actual": self.actual,
            "planned": self.planned,
            "deviation_abs": self.deviation_abs,
            "deviation_rel": self.deviation_rel,
            "flag": self.flag,
        }


@dataclass(frozen=True)
class DeviationSeries:
    points: tuple[DeviationPoint, ...]
    unit: str

    def to_dict(self) -> dict:
        return {"unit": self.unit, "points": [p.to_dict() for p in self.points]}


@dataclass(frozen=True)
class ClassifiedPoint:
    key: str  # step path (or timestamp for time-keyed checks)
    actual: float
    planned: float | None
    deviation: float | None  # signed, in the tolerance mode's units
    status: str

    def to_dict(self) -> dict:
        deviation = self.deviation
        if deviation is not None and not math.isfinite(deviation):
            deviation = None  # keep serialized form strict JSON
        return {
            "step": self.key,
            "actual": self.actual,
            "planned": self.planned,
            "deviation": deviation,
            "status": self.status,
        }


@dataclass(frozen=True)
class ClassifiedSeries:
    points: tuple[ClassifiedPoint, ...]
    tolerance: ToleranceSpec
    unit: str

    def status_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for p in self.points:
            counts[p.status] = counts.get(p.status, 0) + 1
        return counts

    def to_dict(self) -> dict:
        return {
            "unit": self.unit,
            "tolerance": self.tolerance.to_dict(),
            "points": [p.to_dict() for p in self.points],
        }


@dataclass(frozen=True)
class ForecastPoint:
    timestamp: float
    value: float

    def to_dict(self) -> dict:
        return {"t": self.timestamp, "value": self.value}


@dataclass(frozen=True)
class ForecastSeries:
    model: str
    points: tuple[ForecastPoint, ...]
    slope: float
    intercept: float
    rss: float

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "points": [p.to_dict() for p in self.points],
            "slope": self.slope,
            "intercept": self.intercept,
            "rss": self.rss,
        }


@dataclass(frozen=True)
class RolledUpSeries:
    points: tuple[tuple[str, float], ...]  # (prefix, reduced value), sorted by prefix
    reducer: str
    unit: str

    @property
    def mapping(self) -> dict[str, float]:
        return dict(self.points)

    def to_dict(self) -> dict:
        return {
            "reducer": self.reducer,
            "unit": self.unit,
            "points": [{"step": s, "value": v} for s, v in self.points],
        }


# ---------------------------------------------------------------------------
# Techniques
# ---------------------------------------------------------------------------

def monitor(values: Sequence[float]) -> Summary:
    """Arithmetic summary over a series; empty input yields count=0 only."""
    vals = list(values)
    if not vals:
        return Summary(count=0)
    total = math.fsum(vals)
    return Summary(
        count=len(vals),
        min=min(vals),
        max=max(vals),
        mean=total / len(vals),
        last=vals[-1],
        cumulative=total,
    )


def compare_to_baseline(
    actual: Mapping[str, float], baseline: Baseline, *, unit: str | None = None
) -> DeviationSeries:
    """Per-step deviation of cumulative actuals from the planned baseline.

    Baseline steps without actuals are flagged MISSING_ACTUAL; actual steps
    without a planned value are flagged NO_BASELINE.
    """
    if unit is not None and unit != baseline.unit:
        raise UnitMismatch(f"actual unit {unit!r} != baseline unit {baseline.unit!r}")
    planned = baseline.mapping
    points: list[DeviationPoint] = []
    for step in baseline.step_list():
        if step not in actual:
            points.append(DeviationPoint(step, None, planned[step], None, None, MISSING_ACTUAL))
            continue
        a, p = actual[step], planned[step]
        dev_abs = a - p
        if p != 0:
            points.append(DeviationPoint(step, a, p, dev_abs, dev_abs / p))
        else:
            points.append(DeviationPoint(step, a, p, dev_abs, None, UNDEFINED_REL))
    for step in sorted(set(actual) - set(planned)):
        points.append(DeviationPoint(step, actual[step], None, None, None, NO_BASELINE))
    return DeviationSeries(points=tuple(points), unit=baseline.unit)


def classify_deviation(actual: float, planned: float | None, tol: ToleranceSpec) -> tuple[float | None, str]:
    """Signed deviation in the tolerance mode's units, and its status.

    d = |deviation| is checked against closed intervals: OK at d <= warn,
    WARN at warn < d <= violation, VIOLATION beyond. Relative deviation from
    a zero plan is unbounded: any non-zero actual is a VIOLATION.
    """
    if planned is None:
        return None, NO_BASELINE
    if tol.mode == ABSOLUTE:
        deviation = actual - planned
    else:
        if planned == 0:
            if actual == 0:
                return 0.0, OK
            return math.copysign(math.inf, actual), VIOLATION
        deviation = (actual - planned) / planned
    d = abs(deviation)
    if d <= tol.warn_threshold:
        return deviation, OK
    if d <= tol.violation_threshold:
        return deviation, WARN
    return deviation, VIOLATION


def tolerance_range_check(
    actual: Mapping[str, float],
    baseline: Baseline,
    tol: ToleranceSpec,
    *,
    unit: str | None = None,
) -> ClassifiedSeries:
    """Classify each observed step's cumulative actual against the baseline."""
    if unit is not None and unit != baseline.unit:
        raise UnitMismatch(f"actual unit {unit!r} != baseline unit {baseline.unit!r}")
    planned = baseline.mapping
    points = []
    for step in sorted(actual):
        deviation, status = classify_deviation(actual[step], planned.get(step), tol)
        points.append(
            ClassifiedPoint(
                key=step,
                actual=actual[step],
                planned=planned.get(step),
                deviation=deviation,
                status=status,
            )
        )
    return ClassifiedSeries(points=tuple(points), tolerance=tol, unit=baseline.unit)


def predict_course(
    series: Sequence[tuple[float, float]],
    horizon: int,
    model: str = LINEAR_LEAST_SQUARES,
) -> ForecastSeries:
    """Forecast the next `horizon` points at the median observed spacing.

    linear-least-squares fits OLS on (t, v) and requires two distinct
    timestamps; last-value-hold repeats the final value.
    """
    if horizon < 1:
        raise ValueError("horizon must be positive")
    if model not in (LINEAR_LEAST_SQUARES, LAST_VALUE_HOLD):
        raise ValueError(f"unknown forecast model {model!r}")
    pts = sorted((float(t), float(v)) for t, v in series)
    ts = [t for t, _ in pts]
    vs = [v for _, v in pts]

    if model == LAST_VALUE_HOLD:
        if not pts:
            raise InsufficientData("last-value-hold requires at least one point")
        last = vs[-1]
        slope, intercept = 0.0, last
        rss = math.fsum((v - last) ** 2 for v in vs)
    else:
        if len(set(ts)) < 2:
            raise InsufficientData("linear-least-squares requires two distinct timestamps")
        t_arr = np.asarray(ts, dtype=float)
        v_arr = np.asarray(vs, dtype=float)
        t_mean = t_arr.mean()  # center for conditioning on large epochs
        slope_c, intercept_c = np.polyfit(t_arr - t_mean, v_arr, 1)
        slope = float(slope_c)
        intercept = float(intercept_c - slope_c * t_mean)
        fitted = slope_c * (t_arr - t_mean) + intercept_c
        rss = float(np.sum((v_arr - fitted) ** 2))

    spacing = _median_spacing(ts)
    last_t = ts[-1]
    out = []
    for i in range(1, horizon + 1):
        t = last_t + i * spacing
        if model == LAST_VALUE_HOLD:
            v = vs[-1]
        else:
            v = slope * t + intercept
        out.append(ForecastPoint(timestamp=t, value=v))
    return ForecastSeries(model=model, points=tuple(out), slope=slope, intercept=intercept, rss=rss)


def _median_spacing(ts: Sequence[float]) -> float:
    diffs = [b - a for a, b in zip(ts, ts[1:]) if b > a]
    if not diffs:
        return 1.0
    return float(np.median(diffs))


def aggregate(
    records: Sequence[tuple[str, float]],
    level: int | str,
    reducer: str = "sum",
    *,
    tree: "step_paths.ProcessStepTree | None" = None,
    unit: str = "",
) -> RolledUpSeries:
    """Roll raw (step_path, value) records up to a step-path prefix level.

    `level` is either a depth (int) or a step-path prefix; with a prefix,
    records under it are grouped one level finer than the prefix.
    """
    if reducer not in ("sum", "mean", "count"):
        raise ValueError(f"unknown reducer {reducer!r}")
    if isinstance(level, str):
        prefix = step_paths.normalize_path(level)
        if tree is not None and prefix not in tree:
            raise UnknownStep(f"step path not in process tree: {prefix!r}")
        target_depth = step_paths.depth(prefix) + 1
        selected = [(s, v) for s, v in records if step_paths.is_under(s, prefix)]
    else:
        if level < 0:
            raise ValueError("aggregation depth must be >= 0")
        target_depth = level
        selected = list(records)

    groups: dict[str, list[float]] = {}
    for step, value in selected:
        s = step_paths.normalize_path(step)
        if tree is not None and s not in tree:
            raise UnknownStep(f"step path not in process tree: {s!r}")
        key = step_paths.ancestor_at(s, min(target_depth, step_paths.depth(s)))
        groups.setdefault(key, []).append(value)

    points = []
    for key in sorted(groups):
        vals = groups[key]
        if reducer == "sum":
            reduced = math.fsum(vals)
        elif reducer == "mean":
            reduced = math.fsum(vals) / len(vals)
        else:
            reduced = float(len(vals))
        points.append((key, reduced))
    return RolledUpSeries(points=tuple(points), reducer=reducer, unit=unit)


def subtree_actuals(
    points: Sequence[MeasurementPoint], baseline: Baseline
) -> dict[str, float]:
    """Cumulative actual per baseline step: sum of points at or under it.

    Points under no baseline step are grouped by their own step so the
    check can report them NO_BASELINE.
    """
    actual: dict[str, float] = {}
    base_steps = baseline.step_list()
    for step in base_steps:
        vals = [p.value for p in points if step_paths.is_under(p.step_path, step)]
        if vals:
            actual[step] = math.fsum(vals)
    covered = lambda p: any(step_paths.is_under(p.step_path, s) for s in base_steps)
    leftovers: dict[str, list[float]] = {}
    for p in points:
        if not covered(p):
            leftovers.setdefault(p.step_path, []).append(p.value)
    for step in sorted(leftovers):
        actual[step] = math.fsum(leftovers[step])
    return actual


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParameterSpec:
    """Declared parameter of a technique: name, type, optional constraints."""

    name: str
    type: str  # number | integer | string | boolean | enum | tolerance | baseline | level
    required: bool = True
    default: Any = None
    choices: tuple[str, ...] | None = None
    minimum: float | None = None
    maximum: float | None = None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"name": self.name, "type": self.type, "required": self.required}
        if self.default is not None:
            d["default"] = self.default
        if self.choices is not None:
            d["choices"] = list(self.choices)
        if self.minimum is not None:
            d["minimum"] = self.minimum
        if self.maximum is not None:
            d["maximum"] = self.maximum
        return d


@dataclass(frozen=True)
class TechniqueDescriptor:
    """Registry entry describing a control technique's contract."""

    technique_id: str
    purpose: str  # monitor | compare | predict | aggregate | check
    params: tuple[ParameterSpec, ...]
    input_arity: tuple[int, int | None]  # (min, max); max None = unbounded
    input_kinds: tuple[str, ...]
    output_kind: str

    def __post_init__(self):
        names = [p.name for p in self.params]
        if len(names) != len(set(names)):
            raise ValueError(f"technique {self.technique_id!r}: duplicate parameter names")
        if self.input_arity[0] < 1:
            raise ValueError(f"technique {self.technique_id!r}: arity must be >= 1")

    def param_schema(self) -> list[dict]:
        return [p.to_dict() for p in self.params]


def validate_params(
    descriptor: TechniqueDescriptor, params: Mapping[str, Any]
) -> list[tuple[str, str]]:
    """Schema-check params against the descriptor; returns (param, reason) issues."""
    issues: list[tuple[str, str]] = []
    specs = {p.name: p for p in descriptor.params}
    for name in sorted(params):
        if name not in specs:
            issues.append((name, "unknown parameter"))
    for name, spec in ((p.name, p) for p in descriptor.params):
        if name not in params:
            if spec.required and spec.default is None:
                issues.append((name, "missing required parameter"))
            continue
        issues.extend((name, reason) for reason in _check_value(spec, params[name]))
    return issues


def _check_value(spec: ParameterSpec, value: Any) -> list[str]:
    t = spec.type
    if t == "number":
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            return [f"expected number, got {type(value).__name__}"]
    elif t == "integer":
        if not isinstance(value, int) or isinstance(value, bool):
            return [f"expected integer, got {type(value).__name__}"]
    elif t == "string" or t == "baseline":
        if not isinstance(value, str) or not value:
            return ["expected non-empty string"]
    elif t == "boolean":
        if not isinstance(value, bool):
            return [f"expected boolean, got {type(value).__name__}"]
    elif t == "enum":
        if value not in (spec.choices or ()):
            return [f"expected one of {list(spec.choices or ())}, got {value!r}"]
    elif t == "level":
        if isinstance(value, bool) or not isinstance(value, (int, str)):
            return ["expected depth (integer) or step-path prefix (string)"]
        if isinstance(value, int) and value < 0:
            return ["depth must be >= 0"]
    elif t == "tolerance":
        if not isinstance(value, Mapping):
            return ["expected object {mode, warn, violation}"]
        try:
            ToleranceSpec.from_dict(value)
        except (KeyError, TypeError, ValueError) as e:
            return [f"invalid tolerance: {e}"]
    if t in ("number", "integer") and isinstance(value, (int, float)) and not isinstance(value, bool):
        if spec.minimum is not None and value < spec.minimum:
            return [f"must be >= {spec.minimum}"]
        if spec.maximum is not None and value > spec.maximum:
            return [f"must be <= {spec.maximum}"]
    return []


class TechniqueRegistry:
    """Write-once registry of technique descriptors and their evaluators."""

    def __init__(self):
        self._entries: dict[str, tuple[TechniqueDescriptor, Callable]] = {}

    def register(self, descriptor: TechniqueDescriptor, evaluator: Callable) -> None:
        if descriptor.technique_id in self._entries:
            raise DuplicateTechnique(f"technique already registered: {descriptor.technique_id!r}")
        self._entries[descriptor.technique_id] = (descriptor, evaluator)

    def __contains__(self, technique_id: str) -> bool:
        return technique_id in self._entries

    def descriptor(self, technique_id: str) -> TechniqueDescriptor:
        return self._entries[technique_id][0]

    def evaluator(self, technique_id: str) -> Callable:
        return self._entries[technique_id][1]

    def ids(self) -> list[str]:
        return sorted(self._entries)


# ---------------------------------------------------------------------------
# Built-in evaluator adapters (catena-facing)
# ---------------------------------------------------------------------------
# An evaluator receives the resolved input values (DataEntry for data-entry
# inputs, prior outputs for function inputs), the instance params with
# defaults applied, and the snapshot, and returns one output value.

def _entry_points(value: Any) -> tuple[MeasurementPoint, ...]:
    if isinstance(value, DataEntry):
        return value.series
    raise TypeError(f"expected data entry input, got {type(value).__name__}")


def _series_values(value: Any) -> list[float]:
    if isinstance(value, DataEntry):
        return value.values()
    if isinstance(value, RolledUpSeries):
        return [v for _, v in value.points]
    if isinstance(value, ForecastSeries):
        return [p.value for p in value.points]
    raise TypeError(f"cannot read a value series from {type(value).__name__}")


def _actuals_and_unit(value: Any, snapshot: DataSnapshot, baseline: Baseline):
    if isinstance(value, DataEntry):
        return subtree_actuals(value.series, baseline), (value.unit or baseline.unit)
    if isinstance(value, RolledUpSeries):
        return dict(value.points), (value.unit or baseline.unit)
    raise TypeError(f"cannot key {type(value).__name__} by step path")


def _resolve_baseline(params: Mapping, snapshot: DataSnapshot) -> Baseline:
    ref = params["baseline"]
    try:
        return snapshot.baselines[ref]
    except KeyError:
        raise KeyError(f"baseline {ref!r} not present in snapshot")


def _eval_monitor(inputs, params, snapshot):
    return monitor(_series_values(inputs[0]))


def _eval_compare(inputs, params, snapshot):
    baseline = _resolve_baseline(params, snapshot)
    actual, unit = _actuals_and_unit(inputs[0], snapshot, baseline)
    return compare_to_baseline(actual, baseline, unit=unit)


def _eval_tolerance(inputs, params, snapshot):
    baseline = _resolve_baseline(params, snapshot)
    tol = ToleranceSpec.from_dict(params["tolerance"])
    actual, unit = _actuals_and_unit(inputs[0], snapshot, baseline)
    return tolerance_range_check(actual, baseline, tol, unit=unit)


def _timeseries(entry: DataEntry, cumulative: bool) -> list[tuple[float, float]]:
    from .util import parse_timestamp

    per_ts: dict[str, float] = {}
    for p in entry.series:
        per_ts[p.timestamp] = per_ts.get(p.timestamp, 0.0) + p.value
    out: list[tuple[float, float]] = []
    running = 0.0
    for ts in sorted(per_ts):
        running += per_ts[ts]
        out.append((parse_timestamp(ts).timestamp(), running if cumulative else per_ts[ts]))
    return out


def _eval_predict(inputs, params, snapshot):
    entry = inputs[0]
    if not isinstance(entry, DataEntry):
        raise TypeError("predict_course consumes a data entry")
    series = _timeseries(entry, bool(params.get("cumulative", True)))
    return predict_course(series, int(params["horizon"]), params.get("model", LINEAR_LEAST_SQUARES))


def _eval_aggregate(inputs, params, snapshot):
    points = _entry_points(inputs[0])
    records = [(p.step_path, p.value) for p in points]
    unit = points[0].unit if points else ""
    return aggregate(
        records,
        params.get("level", 1),
        params.get("reducer", "sum"),
        tree=snapshot.steps,
        unit=unit,
    )


_BUILTINS: tuple[tuple[TechniqueDescriptor, Callable], ...] = (
    (
        TechniqueDescriptor(
            technique_id="monitor",
            purpose="monitor",
            params=(),
            input_arity=(1, 1),
            input_kinds=(KIND_DATA_ENTRY, KIND_ROLLED_UP, KIND_FORECAST),
            output_kind=KIND_SUMMARY,
        ),
        _eval_monitor,
    ),
    (
        TechniqueDescriptor(
            technique_id="compare_to_baseline",
            purpose="compare",
            params=(ParameterSpec("baseline", "baseline"),),
            input_arity=(1, 1),
            input_kinds=(KIND_DATA_ENTRY, KIND_ROLLED_UP),
            output_kind=KIND_DEVIATION,
        ),
        _eval_compare,
    ),
    (
        TechniqueDescriptor(
            technique_id="tolerance_range_check",
            purpose="check",
            params=(
                ParameterSpec("baseline", "baseline"),
                ParameterSpec("tolerance", "tolerance"),
            ),
            input_arity=(1, 1),
            input_kinds=(KIND_DATA_ENTRY, KIND_ROLLED_UP),
            output_kind=KIND_CLASSIFIED,
        ),
        _eval_tolerance,
    ),
    (
        TechniqueDescriptor(
            technique_id="predict_course",
            purpose="predict",
            params=(
                ParameterSpec("horizon", "integer", minimum=1),
                ParameterSpec(
                    "model",
                    "enum",
                    required=False,
                    default=LINEAR_LEAST_SQUARES,
                    choices=(LINEAR_LEAST_SQUARES, LAST_VALUE_HOLD),
                ),
                ParameterSpec("cumulative", "boolean", required=False, default=True),
            ),
            input_arity=(1, 1),
            input_kinds=(KIND_DATA_ENTRY,),
            output_kind=KIND_FORECAST,
        ),
        _eval_predict,
    ),
    (
        TechniqueDescriptor(
            technique_id="aggregate",
            purpose="aggregate",
            params=(
                ParameterSpec("level", "level", required=False, default=1),
                ParameterSpec(
                    "reducer", "enum", required=False, default="sum", choices=("sum", "mean", "count")
                ),
            ),
            input_arity=(1, 1),
            input_kinds=(KIND_DATA_ENTRY,),
            output_kind=KIND_ROLLED_UP,
        ),
        _eval_aggregate,
    ),
)

BUILTIN_TECHNIQUE_IDS = tuple(sorted(d.technique_id for d, _ in _BUILTINS))


def builtin_registry() -> TechniqueRegistry:
    """Registry with the five built-in techniques pre-registered."""
    registry = TechniqueRegistry()
    for descriptor, evaluator in _BUILTINS:
        registry.register(descriptor, evaluator)
    return registry


def register_technique(
    registry: TechniqueRegistry, descriptor: TechniqueDescriptor, evaluator: Callable
) -> TechniqueDescriptor:
    """Add a technique to the registry; DuplicateTechnique if the id exists."""
    registry.register(descriptor, evaluator)
    return descriptor


def params_with_defaults(descriptor: TechniqueDescriptor, params: Mapping[str, Any]) -> dict:
    merged = {p.name: p.default for p in descriptor.params if p.default is not None}
    merged.update(params)
    return merged


# ---------------------------------------------------------------------------
# Baseline file I/O (CSV, header: metric,process_step,planned,unit)
# ---------------------------------------------------------------------------

BASELINE_CSV_HEADER = ["metric", "process_step", "planned", "unit"]


def baselines_from_csv(text: str) -> dict[str, Baseline]:
    """One baseline per metric, keyed (and id'd) by metric id."""
    import csv
    import io

    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        return {}
    fields = [f.strip().lower() for f in reader.fieldnames]
    if fields != BASELINE_CSV_HEADER:
        raise ValueError(f"bad baseline CSV header {fields!r}, expected {BASELINE_CSV_HEADER!r}")
    rows: dict[str, list[tuple[str, float]]] = {}
    units: dict[str, str] = {}
    for row in reader:
        metric = row["metric"].strip()
        step = row["process_step"].strip()
        planned = float(row["planned"])
        unit = row["unit"].strip()
        if metric in units and units[metric] != unit:
            raise ValueError(f"baseline for metric {metric!r} mixes units")
        units[metric] = unit
        rows.setdefault(metric, []).append((step, planned))
    return {
        metric: Baseline(
            baseline_id=metric, metric_id=metric, points=tuple(rows[metric]), unit=units[metric]
        )
        for metric in sorted(rows)
    }


def baselines_to_csv(baselines: Mapping[str, Baseline]) -> str:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BASELINE_CSV_HEADER)
    for key in sorted(baselines):
        b = baselines[key]
        for step, planned in b.points:
            writer.writerow([b.metric_id, step, planned, b.unit])
    return buf.getvalue()
