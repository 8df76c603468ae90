"""Measurement data values: points, per-metric data entries, snapshots.

Everything here is an immutable value; snapshots are versioned and never
mutated after commit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping

from .steps import ProcessStepTree

if TYPE_CHECKING:  # avoid a runtime cycle with techniques
    from .techniques import Baseline


@dataclass(frozen=True, order=True)
class MeasurementPoint:
    """One accepted measurement: metric value at a process step by a subject."""

    timestamp: str  # canonical UTC ISO-8601
    metric_id: str
    step_path: str
    subject_id: str
    value: float
    unit: str
    source_id: str = ""

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "metric": self.metric_id,
            "process_step": self.step_path,
            "subject": self.subject_id,
            "value": self.value,
            "unit": self.unit,
            "source": self.source_id,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "MeasurementPoint":
        return cls(
            timestamp=d["timestamp"],
            metric_id=d["metric"],
            step_path=d["process_step"],
            subject_id=d["subject"],
            value=float(d["value"]),
            unit=d["unit"],
            source_id=d.get("source", ""),
        )

    def dedup_key(self) -> tuple:
        return (self.timestamp, self.metric_id, self.step_path, self.subject_id, self.source_id)


@dataclass(frozen=True)
class DataEntry:
    """Time-ordered series of points for one metric.

    Invariants: series sorted non-decreasing by timestamp, single unit.
    """

    id: str
    metric_id: str
    series: tuple[MeasurementPoint, ...]

    def __post_init__(self):
        units = {p.unit for p in self.series}
        if len(units) > 1:
            raise ValueError(f"data entry {self.id!r} mixes units: {sorted(units)}")
        stamps = [p.timestamp for p in self.series]
        if stamps != sorted(stamps):
            raise ValueError(f"data entry {self.id!r} series not time-ordered")
        if any(p.metric_id != self.metric_id for p in self.series):
            raise ValueError(f"data entry {self.id!r} mixes metrics")

    @property
    def unit(self) -> str | None:
        return self.series[0].unit if self.series else None

    def values(self) -> list[float]:
        return [p.value for p in self.series]


def build_entries(points: Iterable[MeasurementPoint], entry_id_prefix: str = "de_") -> list[DataEntry]:
    """Group accepted points into per-metric entries, sorted by timestamp."""
    by_metric: dict[str, list[MeasurementPoint]] = {}
    for p in points:
        by_metric.setdefault(p.metric_id, []).append(p)
    entries = []
    for metric_id in sorted(by_metric):
        series = tuple(sorted(by_metric[metric_id]))
        entries.append(DataEntry(id=f"{entry_id_prefix}{metric_id}", metric_id=metric_id, series=series))
    return entries


@dataclass(frozen=True)
class DataSnapshot:
    """Immutable committed view of a project's data at one version.

    Carries everything an evaluation consumes: the accepted points plus the
    project's baselines and process-step tree.
    """

    version: int
    points: tuple[MeasurementPoint, ...]
    baselines: Mapping[str, "Baseline"] = field(default_factory=dict)
    steps: ProcessStepTree = field(default_factory=lambda: ProcessStepTree.from_paths([]))

    def points_for(self, metric_id: str) -> tuple[MeasurementPoint, ...]:
        return tuple(sorted(p for p in self.points if p.metric_id == metric_id))

    def entry_for(self, entry_id: str, metric_id: str) -> DataEntry:
        return DataEntry(id=entry_id, metric_id=metric_id, series=self.points_for(metric_id))

    def restrict_subjects(self, keep: Iterable[str]) -> "DataSnapshot":
        """Snapshot containing only points from the given subjects."""
        keep_set = frozenset(keep)
        return DataSnapshot(
            version=self.version,
            points=tuple(p for p in self.points if p.subject_id in keep_set),
            baselines=self.baselines,
            steps=self.steps,
        )
