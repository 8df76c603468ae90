"""Goal-oriented measurement plans: goals, metrics, collection sheets, and
the coverage check that keeps a catena goal-oriented.

Plans are immutable values after load; all operations here are pure.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Mapping

from .errors import EmptyField, UncoveredMetric
from .steps import ProcessStepTree

if TYPE_CHECKING:
    from .catena import VisualizationCatena

GOAL_TEMPLATE = (
    "Analyze {object} for the purpose of {purpose} "
    "from the viewpoint of the {viewpoint} in the context of {context}"
)

_GOAL_RE = re.compile(
    r"^Analyze (?P<object>.+?) for the purpose of (?P<purpose>.+?) "
    r"from the viewpoint of the (?P<viewpoint>.+?) in the context of (?P<context>.+)$"
)

FREQUENCIES = ("per-event", "daily", "per-phase")
SCALES = ("ratio", "interval", "ordinal-as-int")


def normalize_role(name: str) -> str:
    """Fold a role id or goal viewpoint to a comparable key."""
    return re.sub(r"[^a-z0-9]+", "_", name.strip().lower()).strip("_")


@dataclass(frozen=True)
class MeasurementGoal:
    goal_id: str
    object: str
    purpose: str
    viewpoint: str
    context: str
    quality_focus: str | None = None

    def sentence(self) -> str:
        return GOAL_TEMPLATE.format(
            object=self.object, purpose=self.purpose, viewpoint=self.viewpoint, context=self.context
        )

    def to_dict(self) -> dict:
        d = {
            "id": self.goal_id,
            "object": self.object,
            "purpose": self.purpose,
            "viewpoint": self.viewpoint,
            "context": self.context,
        }
        if self.quality_focus:
            d["quality_focus"] = self.quality_focus
        return d


def formulate_goal(
    object: str,
    purpose: str,
    viewpoint: str,
    context: str,
    *,
    goal_id: str | None = None,
    quality_focus: str | None = None,
) -> MeasurementGoal:
    """Build a goal; all four facets must be non-empty."""
    for name, value in (
        ("object", object),
        ("purpose", purpose),
        ("viewpoint", viewpoint),
        ("context", context),
    ):
        if not isinstance(value, str) or not value.strip():
            raise EmptyField(f"goal field {name!r} must be a non-empty string")
    return MeasurementGoal(
        goal_id=goal_id or f"g_{normalize_role(object)}",
        object=object,
        purpose=purpose,
        viewpoint=viewpoint,
        context=context,
        quality_focus=quality_focus,
    )


def parse_goal(sentence: str) -> dict[str, str]:
    """Invert the canonical goal sentence back into its four facets."""
    m = _GOAL_RE.match(sentence)
    if not m:
        raise ValueError(f"not a canonical goal sentence: {sentence!r}")
    return m.groupdict()


@dataclass(frozen=True)
class Metric:
    metric_id: str
    name: str
    unit: str
    value_domain: tuple[float, float]
    scale: str
    goal_ids: tuple[str, ...]
    question: str | None = None  # free-text GQM question annotation

    def __post_init__(self):
        lo, hi = self.value_domain
        if not lo < hi:
            raise ValueError(f"metric {self.metric_id!r}: value_domain min must be < max")
        if self.scale not in SCALES:
            raise ValueError(f"metric {self.metric_id!r}: unknown scale {self.scale!r}")
        if not self.goal_ids:
            raise ValueError(f"metric {self.metric_id!r} traces to no goal")

    def in_domain(self, value: float) -> bool:
        lo, hi = self.value_domain
        return lo <= value <= hi

    def to_dict(self) -> dict:
        d = {
            "id": self.metric_id,
            "name": self.name,
            "unit": self.unit,
            "value_domain": list(self.value_domain),
            "scale": self.scale,
            "goals": list(self.goal_ids),
        }
        if self.question:
            d["question"] = self.question
        return d


@dataclass(frozen=True)
class DataCollectionSheet:
    sheet_id: str
    process_step_path: str
    metric_ids: tuple[str, ...]
    collector_role: str
    frequency: str

    def __post_init__(self):
        if not self.metric_ids:
            raise ValueError(f"sheet {self.sheet_id!r} carries no metrics")
        if self.frequency not in FREQUENCIES:
            raise ValueError(f"sheet {self.sheet_id!r}: unknown frequency {self.frequency!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.sheet_id,
            "process_step": self.process_step_path,
            "metrics": list(self.metric_ids),
            "collector_role": self.collector_role,
            "frequency": self.frequency,
        }


@dataclass(frozen=True)
class CollectionRule:
    """Mapping-table row: where and how one metric is collected."""

    metric_id: str
    step_paths: tuple[str, ...]
    collector_role: str = "developer"
    frequency: str = "per-event"

    def to_dict(self) -> dict:
        return {
            "metric": self.metric_id,
            "steps": list(self.step_paths),
            "collector_role": self.collector_role,
            "frequency": self.frequency,
        }


@dataclass(frozen=True)
class GqmPlan:
    goals: tuple[MeasurementGoal, ...]
    metrics: tuple[Metric, ...]
    sheets: tuple[DataCollectionSheet, ...] = ()
    steps: ProcessStepTree = field(default_factory=lambda: ProcessStepTree.from_paths([]))
    collection_rules: tuple[CollectionRule, ...] = ()

    def __post_init__(self):
        goal_ids = {g.goal_id for g in self.goals}
        metric_ids = {m.metric_id for m in self.metrics}
        if len(goal_ids) != len(self.goals):
            raise ValueError("duplicate goal ids in plan")
        if len(metric_ids) != len(self.metrics):
            raise ValueError("duplicate metric ids in plan")
        for m in self.metrics:
            missing = set(m.goal_ids) - goal_ids
            if missing:
                raise ValueError(f"metric {m.metric_id!r} references unknown goals {sorted(missing)}")
        for s in self.sheets:
            if s.process_step_path not in self.steps:
                raise ValueError(f"sheet {s.sheet_id!r}: step {s.process_step_path!r} not in tree")
            unknown = set(s.metric_ids) - metric_ids
            if unknown:
                raise ValueError(f"sheet {s.sheet_id!r} references unknown metrics {sorted(unknown)}")
        for r in self.collection_rules:
            if r.metric_id not in metric_ids:
                raise ValueError(f"collection rule references unknown metric {r.metric_id!r}")
            for p in r.step_paths:
                if p not in self.steps:
                    raise ValueError(f"collection rule for {r.metric_id!r}: step {p!r} not in tree")

    def metric(self, metric_id: str) -> Metric | None:
        for m in self.metrics:
            if m.metric_id == metric_id:
                return m
        return None

    def goal(self, goal_id: str) -> MeasurementGoal | None:
        for g in self.goals:
            if g.goal_id == goal_id:
                return g
        return None

    def metric_ids(self) -> set[str]:
        return {m.metric_id for m in self.metrics}


def derive_collection_plan(plan: GqmPlan) -> list[DataCollectionSheet]:
    """Expand the plan's collection rules into per-step sheets.

    Sheets are grouped by (step, collector role, frequency) and ordered by
    step path then metric id; every metric must be mapped somewhere.
    """
    if not plan.goals or not plan.metrics:
        raise ValueError("plan needs at least one goal and one metric")
    mapped = {r.metric_id for r in plan.collection_rules if r.step_paths}
    uncovered = sorted(plan.metric_ids() - mapped)
    if uncovered:
        raise UncoveredMetric(uncovered)

    groups: dict[tuple[str, str, str], list[str]] = {}
    for rule in plan.collection_rules:
        for step in rule.step_paths:
            key = (step, rule.collector_role, rule.frequency)
            bucket = groups.setdefault(key, [])
            if rule.metric_id not in bucket:
                bucket.append(rule.metric_id)

    sheets = []
    for i, (step, role, freq) in enumerate(sorted(groups), start=1):
        metric_ids = tuple(sorted(groups[(step, role, freq)]))
        sheets.append(
            DataCollectionSheet(
                sheet_id=f"sheet-{i:03d}",
                process_step_path=step,
                metric_ids=metric_ids,
                collector_role=role,
                frequency=freq,
            )
        )
    return sheets


@dataclass(frozen=True)
class CoverageReport:
    """Goal-orientation findings: empty everywhere means fully goal-oriented."""

    unconsumed_metrics: tuple[str, ...]  # collected but consumed by no function instance
    untraceable_views: tuple[str, ...]  # views matching no goal viewpoint/annotation
    unsupported_goals: tuple[str, ...]  # goals with zero supporting views

    @property
    def is_goal_oriented(self) -> bool:
        return not (self.unconsumed_metrics or self.untraceable_views or self.unsupported_goals)

    def to_dict(self) -> dict:
        return {
            "unconsumed_metrics": list(self.unconsumed_metrics),
            "untraceable_views": list(self.untraceable_views),
            "unsupported_goals": list(self.unsupported_goals),
            "is_goal_oriented": self.is_goal_oriented,
        }


def check_goal_coverage(plan: GqmPlan, vc: "VisualizationCatena") -> CoverageReport:
    """Check that every collected metric feeds an instance and every view
    traces to a goal (viewpoint match or explicit goal annotation)."""
    collected = {e.metric_id for e in vc.data_entries}
    consumed_entry_ids = set()
    for fi in vc.function_instances:
        consumed_entry_ids.update(fi.inputs)
    consumed_metrics = {e.metric_id for e in vc.data_entries if e.id in consumed_entry_ids}
    unconsumed = tuple(sorted(collected - consumed_metrics))

    supported: set[str] = set()
    untraceable = []
    for view in sorted(vc.view_instances, key=lambda v: v.id):
        matches = set()
        if view.goal_id:
            if plan.goal(view.goal_id):
                matches.add(view.goal_id)
        for g in plan.goals:
            if normalize_role(g.viewpoint) == normalize_role(view.role_id):
                matches.add(g.goal_id)
        if matches:
            supported.update(matches)
        else:
            untraceable.append(view.id)

    unsupported = tuple(sorted(g.goal_id for g in plan.goals if g.goal_id not in supported))
    return CoverageReport(
        unconsumed_metrics=unconsumed,
        untraceable_views=tuple(untraceable),
        unsupported_goals=unsupported,
    )


# ---------------------------------------------------------------------------
# Plan file I/O (JSON: goals, metrics, sheets, process_steps)
# ---------------------------------------------------------------------------

def plan_from_dict(doc: Mapping) -> GqmPlan:
    goals = tuple(
        MeasurementGoal(
            goal_id=g["id"],
            object=g["object"],
            purpose=g["purpose"],
            viewpoint=g["viewpoint"],
            context=g["context"],
            quality_focus=g.get("quality_focus"),
        )
        for g in doc.get("goals", [])
    )
    metrics = tuple(
        Metric(
            metric_id=m["id"],
            name=m.get("name", m["id"]),
            unit=m["unit"],
            value_domain=(float(m["value_domain"][0]), float(m["value_domain"][1])),
            scale=m.get("scale", "ratio"),
            goal_ids=tuple(m["goals"]),
            question=m.get("question"),
        )
        for m in doc.get("metrics", [])
    )
    steps = ProcessStepTree.from_paths(doc.get("process_steps", []))
    sheets = tuple(
        DataCollectionSheet(
            sheet_id=s["id"],
            process_step_path=s["process_step"],
            metric_ids=tuple(s["metrics"]),
            collector_role=s.get("collector_role", "developer"),
            frequency=s.get("frequency", "per-event"),
        )
        for s in doc.get("sheets", [])
    )
    rules = tuple(
        CollectionRule(
            metric_id=r["metric"],
            step_paths=tuple(r["steps"]),
            collector_role=r.get("collector_role", "developer"),
            frequency=r.get("frequency", "per-event"),
        )
        for r in doc.get("collection_rules", [])
    )
    return GqmPlan(goals=goals, metrics=metrics, sheets=sheets, steps=steps, collection_rules=rules)


def load_plan(path: str | Path) -> GqmPlan:
    with open(path, encoding="utf-8") as f:
        return plan_from_dict(json.load(f))


def plan_to_dict(plan: GqmPlan) -> dict:
    return {
        "goals": [g.to_dict() for g in plan.goals],
        "metrics": [m.to_dict() for m in plan.metrics],
        "sheets": [s.to_dict() for s in plan.sheets],
        "process_steps": plan.steps.sorted_paths(),
        "collection_rules": [r.to_dict() for r in plan.collection_rules],
    }
