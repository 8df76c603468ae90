"""The visualization catena: a typed DAG wiring collected data through control
techniques into role-oriented views, with validation, deterministic execution,
on-the-fly re-parameterization, and drill-down.

Catenas are immutable values; every edit produces a new version.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

import jsonschema

from . import steps as step_paths
from .data import DataSnapshot
from .errors import CycleError, SchemaViolation, UnknownInstance, UnknownStep, UnknownView
from .gqm import GqmPlan
from .techniques import (
    KIND_CLASSIFIED,
    KIND_DATA_ENTRY,
    KIND_DEVIATION,
    KIND_ROLLED_UP,
    KIND_SUMMARY,
    TechniqueRegistry,
    ToleranceSpec,
    builtin_registry,
    classify_deviation,
    params_with_defaults,
    validate_params,
)
from .util import canonical_bytes, canonical_json, short_hash, utc_now_iso

MECHANISMS = ("table", "time-series-chart", "status-board", "drill-down-tree")

STATUS_OK = "ok"
STATUS_FAILED = "failed"
STATUS_SKIPPED = "skipped"

# Finding codes that make a catena invalid (dangling refs, cycles, schema).
INVALIDATING_CODES = frozenset(
    {
        "dangling-reference",
        "view-input-kind",
        "cycle",
        "unknown-technique",
        "param-schema",
        "arity",
        "input-kind",
        "unknown-metric",
    }
)


# ---------------------------------------------------------------------------
# Catena value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DataEntryBinding:
    """Config-level data entry: binds an id to a metric; the series comes
    from the snapshot at execution time."""

    id: str
    metric_id: str

    def to_dict(self) -> dict:
        return {"id": self.id, "metric": self.metric_id}


@dataclass(frozen=True)
class FunctionInstance:
    id: str
    technique_id: str
    params: Mapping[str, Any] = field(default_factory=dict)
    inputs: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "technique": self.technique_id,
            "params": dict(self.params),
            "inputs": list(self.inputs),
        }


@dataclass(frozen=True)
class ViewInstance:
    id: str
    mechanism_id: str
    role_id: str
    inputs: tuple[str, ...]
    title: str = ""
    layout: tuple[Mapping[str, Any], ...] = ()
    goal_id: str | None = None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "id": self.id,
            "mechanism": self.mechanism_id,
            "role": self.role_id,
            "title": self.title,
            "inputs": list(self.inputs),
        }
        if self.layout:
            d["layout"] = [dict(p) for p in self.layout]
        if self.goal_id:
            d["goal"] = self.goal_id
        return d


@dataclass(frozen=True)
class VisualizationCatena:
    id: str
    project_id: str
    data_entries: tuple[DataEntryBinding, ...]
    function_instances: tuple[FunctionInstance, ...]
    view_instances: tuple[ViewInstance, ...]
    version: int = 1

    def __post_init__(self):
        ids = (
            [e.id for e in self.data_entries]
            + [f.id for f in self.function_instances]
            + [v.id for v in self.view_instances]
        )
        dupes = {i for i in ids if ids.count(i) > 1}
        if dupes:
            raise ValueError(f"catena {self.id!r}: duplicate ids {sorted(dupes)}")

    def entry(self, entry_id: str) -> DataEntryBinding | None:
        for e in self.data_entries:
            if e.id == entry_id:
                return e
        return None

    def function(self, instance_id: str) -> FunctionInstance | None:
        for f in self.function_instances:
            if f.id == instance_id:
                return f
        return None

    def view(self, view_id: str) -> ViewInstance | None:
        for v in self.view_instances:
            if v.id == view_id:
                return v
        return None

    def entry_ids(self) -> set[str]:
        return {e.id for e in self.data_entries}

    def function_ids(self) -> set[str]:
        return {f.id for f in self.function_instances}

    def transitive_entry_ids(self, instance_id: str) -> set[str]:
        """Data entries feeding an instance, following function inputs."""
        seen: set[str] = set()
        out: set[str] = set()
        stack = [instance_id]
        entry_ids = self.entry_ids()
        while stack:
            nid = stack.pop()
            if nid in seen:
                continue
            seen.add(nid)
            if nid in entry_ids:
                out.add(nid)
                continue
            fi = self.function(nid)
            if fi is not None:
                stack.extend(fi.inputs)
        return out

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "project": self.project_id,
            "version": self.version,
            "data_entries": [e.to_dict() for e in self.data_entries],
            "function_instances": [f.to_dict() for f in self.function_instances],
            "view_instances": [v.to_dict() for v in self.view_instances],
        }


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Finding:
    code: str
    subject: str  # id of the offending element
    message: str

    @property
    def severity(self) -> str:
        return "error" if self.code in INVALIDATING_CODES else "warning"

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "subject": self.subject,
            "message": self.message,
            "severity": self.severity,
        }


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]

    @property
    def is_valid(self) -> bool:
        return not any(f.code in INVALIDATING_CODES for f in self.findings)

    def by_code(self, code: str) -> list[Finding]:
        return [f for f in self.findings if f.code == code]

    def to_dict(self) -> dict:
        return {"is_valid": self.is_valid, "findings": [f.to_dict() for f in self.findings]}


def _function_cycle_ids(vc: VisualizationCatena) -> set[str]:
    """Function instances on or downstream of a cycle (Kahn leftover)."""
    entry_ids = vc.entry_ids()
    indeg = {f.id: 0 for f in vc.function_instances}
    dependents: dict[str, list[str]] = {f.id: [] for f in vc.function_instances}
    for f in vc.function_instances:
        for ref in f.inputs:
            if ref in indeg:  # only function->function edges can cycle
                indeg[f.id] += 1
                dependents[ref].append(f.id)
            elif ref not in entry_ids:
                pass  # dangling; reported separately
    ready = sorted(i for i, d in indeg.items() if d == 0)
    done = 0
    while ready:
        nid = ready.pop(0)
        done += 1
        for dep in sorted(dependents[nid]):
            indeg[dep] -= 1
            if indeg[dep] == 0:
                ready.append(dep)
        ready.sort()
    return {i for i, d in indeg.items() if d > 0}


def toposort(vc: VisualizationCatena) -> list[str]:
    """Deterministic topological order of function instances (lexicographic
    Kahn). Raises CycleError if the reference graph has no such order."""
    leftover = _function_cycle_ids(vc)
    if leftover:
        raise CycleError(f"catena {vc.id!r} has a reference cycle through {sorted(leftover)}")
    entry_ids = vc.entry_ids()
    indeg = {f.id: 0 for f in vc.function_instances}
    dependents: dict[str, list[str]] = {f.id: [] for f in vc.function_instances}
    for f in vc.function_instances:
        for ref in f.inputs:
            if ref in indeg:
                indeg[f.id] += 1
                dependents[ref].append(f.id)
    order: list[str] = []
    ready = sorted(i for i, d in indeg.items() if d == 0)
    while ready:
        nid = ready.pop(0)
        order.append(nid)
        changed = False
        for dep in dependents[nid]:
            indeg[dep] -= 1
            if indeg[dep] == 0:
                ready.append(dep)
                changed = True
        if changed:
            ready.sort()
    return order


def validate_catena(
    vc: VisualizationCatena,
    registry: TechniqueRegistry,
    plan: GqmPlan,
    roles: Iterable[str] | None = None,
) -> ValidationReport:
    """Structural and schema validation; all outcomes are report findings.

    The report is invalid only on dangling references, cycles, or
    technique/parameter schema violations; unused elements and unresolved
    roles are warnings.
    """
    findings: list[Finding] = []
    entry_ids = vc.entry_ids()
    function_ids = vc.function_ids()
    known = entry_ids | function_ids

    for e in vc.data_entries:
        if plan.metric(e.metric_id) is None:
            findings.append(
                Finding("unknown-metric", e.id, f"data entry metric {e.metric_id!r} not in plan")
            )

    for f in vc.function_instances:
        for ref in f.inputs:
            if ref not in known:
                findings.append(
                    Finding("dangling-reference", f.id, f"input {ref!r} resolves to nothing")
                )
        if f.technique_id not in registry:
            findings.append(
                Finding("unknown-technique", f.id, f"technique {f.technique_id!r} not registered")
            )
            continue
        descriptor = registry.descriptor(f.technique_id)
        lo, hi = descriptor.input_arity
        if len(f.inputs) < lo or (hi is not None and len(f.inputs) > hi):
            findings.append(
                Finding(
                    "arity",
                    f.id,
                    f"technique {f.technique_id!r} takes "
                    f"{lo}{'..' + str(hi) if hi is not None else '+'} inputs, got {len(f.inputs)}",
                )
            )
        for ref in f.inputs:
            kind = None
            if ref in entry_ids:
                kind = KIND_DATA_ENTRY
            else:
                upstream = vc.function(ref)
                if upstream is not None and upstream.technique_id in registry:
                    kind = registry.descriptor(upstream.technique_id).output_kind
            if kind is not None and kind not in descriptor.input_kinds:
                findings.append(
                    Finding(
                        "input-kind",
                        f.id,
                        f"input {ref!r} has kind {kind!r}, expected one of "
                        f"{list(descriptor.input_kinds)}",
                    )
                )
        for param, reason in validate_params(descriptor, f.params):
            findings.append(Finding("param-schema", f.id, f"parameter {param!r}: {reason}"))

    for cyc in sorted(_function_cycle_ids(vc)):
        findings.append(Finding("cycle", cyc, "instance lies on or below a reference cycle"))

    role_set = set(roles) if roles is not None else None
    reachable: set[str] = set()
    for v in vc.view_instances:
        for ref in v.inputs:
            if ref not in function_ids:
                if ref in entry_ids:
                    findings.append(
                        Finding(
                            "view-input-kind", v.id, f"views consume function instances, not {ref!r}"
                        )
                    )
                else:
                    findings.append(
                        Finding("dangling-reference", v.id, f"input {ref!r} resolves to nothing")
                    )
            else:
                stack = [ref]
                while stack:
                    nid = stack.pop()
                    if nid in reachable or nid not in function_ids:
                        continue
                    reachable.add(nid)
                    stack.extend(vc.function(nid).inputs)
        if v.mechanism_id not in MECHANISMS:
            findings.append(
                Finding("param-schema", v.id, f"unknown view mechanism {v.mechanism_id!r}")
            )
        if role_set is not None and v.role_id not in role_set:
            findings.append(Finding("unresolved-role", v.id, f"role {v.role_id!r} not defined"))

    consumed: set[str] = set()
    for f in vc.function_instances:
        consumed.update(ref for ref in f.inputs if ref in entry_ids)
    for e in vc.data_entries:
        if e.id not in consumed:
            findings.append(
                Finding("unused-data-entry", e.id, "data entry consumed by no function instance")
            )
    for f in vc.function_instances:
        if f.id not in reachable:
            findings.append(
                Finding("unused-instance", f.id, "function instance reachable from no view")
            )

    return ValidationReport(findings=tuple(findings))


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InstanceOutput:
    instance_id: str
    status: str  # ok | failed | skipped
    kind: str
    value: Any = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "kind": self.kind,
            "value": self.value.to_dict() if self.value is not None else None,
            "error": self.error,
        }


@dataclass(frozen=True)
class CatenaResult:
    """Outputs of one deterministic evaluation of a catena over a snapshot.

    `evaluated_at` is wall-clock metadata and excluded from comparison and
    from the canonical serialization; determinism is defined over
    `canonical_dict()`.
    """

    catena_id: str
    catena_version: int
    snapshot_version: int
    outputs: Mapping[str, InstanceOutput]
    views: Mapping[str, dict]
    evaluated_at: str = field(compare=False, default="")
    catena: VisualizationCatena | None = field(compare=False, repr=False, default=None)
    snapshot: DataSnapshot | None = field(compare=False, repr=False, default=None)
    registry: TechniqueRegistry | None = field(compare=False, repr=False, default=None)

    def canonical_dict(self) -> dict:
        return {
            "catena": self.catena_id,
            "catena_version": self.catena_version,
            "snapshot_version": self.snapshot_version,
            "outputs": {iid: out.to_dict() for iid, out in sorted(self.outputs.items())},
            "views": {vid: vm for vid, vm in sorted(self.views.items())},
        }

    def canonical_bytes(self) -> bytes:
        return canonical_bytes(self.canonical_dict())

    def view_model(self, view_id: str) -> dict:
        if view_id not in self.views:
            raise UnknownView(f"view {view_id!r} not rendered in this result")
        return self.views[view_id]


def execute_catena(
    vc: VisualizationCatena,
    snapshot: DataSnapshot,
    registry: TechniqueRegistry,
    *,
    evaluation_order: list[str] | None = None,
) -> CatenaResult:
    """Evaluate every function instance once in topological order and render
    every view. A failing technique marks its dependents Skipped; independent
    branches still evaluate. Identical inputs produce identical results.
    """
    default_order = toposort(vc)  # raises CycleError on cyclic catenas
    if evaluation_order is None:
        order = default_order
    else:
        order = list(evaluation_order)
        if sorted(order) != sorted(default_order) or not _is_topological(vc, order):
            raise ValueError("evaluation_order is not a topological order of this catena")

    values: dict[str, Any] = {}
    for binding in vc.data_entries:
        values[binding.id] = snapshot.entry_for(binding.id, binding.metric_id)

    outputs: dict[str, InstanceOutput] = {}
    for iid in order:
        fi = vc.function(iid)
        descriptor = registry.descriptor(fi.technique_id)
        upstream_bad = [
            ref for ref in fi.inputs if ref in outputs and outputs[ref].status != STATUS_OK
        ]
        if upstream_bad:
            outputs[iid] = InstanceOutput(
                instance_id=iid,
                status=STATUS_SKIPPED,
                kind=descriptor.output_kind,
                error=f"skipped: upstream {sorted(upstream_bad)} did not produce output",
            )
            continue
        resolved = [values[ref] for ref in fi.inputs]
        params = params_with_defaults(descriptor, fi.params)
        try:
            value = registry.evaluator(fi.technique_id)(resolved, params, snapshot)
        except Exception as e:  # technique rejected its inputs
            outputs[iid] = InstanceOutput(
                instance_id=iid,
                status=STATUS_FAILED,
                kind=descriptor.output_kind,
                error=f"{type(e).__name__}: {e}",
            )
            continue
        values[iid] = value
        outputs[iid] = InstanceOutput(
            instance_id=iid, status=STATUS_OK, kind=descriptor.output_kind, value=value
        )

    views = {
        v.id: _render_view(v, vc, outputs, registry, snapshot.version)
        for v in sorted(vc.view_instances, key=lambda v: v.id)
    }
    return CatenaResult(
        catena_id=vc.id,
        catena_version=vc.version,
        snapshot_version=snapshot.version,
        outputs=outputs,
        views=views,
        evaluated_at=utc_now_iso(),
        catena=vc,
        snapshot=snapshot,
        registry=registry,
    )


def _is_topological(vc: VisualizationCatena, order: list[str]) -> bool:
    pos = {iid: i for i, iid in enumerate(order)}
    for f in vc.function_instances:
        for ref in f.inputs:
            if ref in pos and pos[ref] >= pos[f.id]:
                return False
    return True


def _render_view(
    view: ViewInstance,
    vc: VisualizationCatena,
    outputs: Mapping[str, InstanceOutput],
    registry: TechniqueRegistry,
    snapshot_version: int,
) -> dict:
    labels = {p.get("input"): p.get("label") for p in view.layout}
    panels = []
    status_counts: dict[str, int] = {}
    for ref in view.inputs:
        out = outputs[ref]
        fi = vc.function(ref)
        descriptor = registry.descriptor(fi.technique_id)
        panel = {
            "instance_id": ref,
            "label": labels.get(ref) or ref,
            "technique": fi.technique_id,
            "kind": out.kind,
            "status": out.status,
            "params": dict(fi.params),
            "param_schema": descriptor.param_schema(),
            "data": out.value.to_dict() if out.value is not None else None,
            "error": out.error,
        }
        panels.append(panel)
        if out.status == STATUS_OK and out.kind == KIND_CLASSIFIED:
            for p in out.value.points:
                status_counts[p.status] = status_counts.get(p.status, 0) + 1
    vm = {
        "view_id": view.id,
        "title": view.title,
        "mechanism": view.mechanism_id,
        "role": view.role_id,
        "snapshot_version": snapshot_version,
        "catena_version": vc.version,
        "panels": panels,
    }
    if status_counts:
        vm["status_counts"] = dict(sorted(status_counts.items()))
    return vm


# ---------------------------------------------------------------------------
# Re-parameterization
# ---------------------------------------------------------------------------

def reparameterize(
    vc: VisualizationCatena,
    instance_id: str,
    new_params: Mapping[str, Any],
    *,
    registry: TechniqueRegistry | None = None,
) -> VisualizationCatena:
    """New catena version with one instance's params replaced; the input
    value is left untouched. Params must satisfy the technique's schema."""
    fi = vc.function(instance_id)
    if fi is None:
        raise UnknownInstance(f"no function instance {instance_id!r} in catena {vc.id!r}")
    reg = registry if registry is not None else builtin_registry()
    if fi.technique_id in reg:
        issues = validate_params(reg.descriptor(fi.technique_id), new_params)
        if issues:
            param, reason = issues[0]
            raise SchemaViolation(param, reason)
    updated = tuple(
        replace(f, params=dict(new_params)) if f.id == instance_id else f
        for f in vc.function_instances
    )
    return replace(vc, function_instances=updated, version=vc.version + 1)


# ---------------------------------------------------------------------------
# Drill-down
# ---------------------------------------------------------------------------

_DRILLABLE_KINDS = (KIND_CLASSIFIED, KIND_DEVIATION, KIND_ROLLED_UP, KIND_SUMMARY)


def drill_down(result: CatenaResult, view_id: str, step_path: str) -> dict:
    """View restricted to descendants of `step_path`, one level finer.

    At the root the view is returned unchanged; at a leaf the raw records
    are shown, which is where repeated drill-down terminates.
    """
    vm = result.view_model(view_id)
    if result.catena is None or result.snapshot is None:
        raise UnknownView("result does not carry its execution context")
    step = step_paths.normalize_path(step_path)
    if step == step_paths.ROOT:
        return vm
    tree = result.snapshot.steps
    if step not in tree:
        raise UnknownStep(f"step path not in process tree: {step!r}")

    view = result.catena.view(view_id)
    level = step_paths.depth(step) + 1
    panels = []
    for ref in view.inputs:
        out = result.outputs[ref]
        if out.status != STATUS_OK or out.kind not in _DRILLABLE_KINDS:
            continue
        entry_ids = result.catena.transitive_entry_ids(ref)
        metrics = {e.metric_id for e in result.catena.data_entries if e.id in entry_ids}
        points = [
            p
            for p in result.snapshot.points
            if p.metric_id in metrics and step_paths.is_under(p.step_path, step)
        ]
        panel: dict[str, Any] = {
            "instance_id": ref,
            "kind": out.kind,
            "step": step,
            "parent_value": math.fsum(p.value for p in points),
        }
        if tree.is_leaf(step):
            panel["records"] = [
                {
                    "timestamp": p.timestamp,
                    "subject": p.subject_id,
                    "value": p.value,
                    "unit": p.unit,
                    "step": p.step_path,
                }
                for p in sorted(points)
            ]
        else:
            groups: dict[str, list[float]] = {}
            for p in points:
                key = step_paths.ancestor_at(
                    p.step_path, min(level, step_paths.depth(p.step_path))
                )
                groups.setdefault(key, []).append(p.value)
            baseline_map, tol = _panel_baseline(result, ref)
            rows = []
            for key in sorted(groups):
                row: dict[str, Any] = {
                    "step": key,
                    "value": math.fsum(groups[key]),
                    "leaf": key not in tree or tree.is_leaf(key),
                }
                if baseline_map is not None:
                    planned = baseline_map.get(key)
                    row["planned"] = planned
                    if tol is not None:
                        deviation, status = classify_deviation(row["value"], planned, tol)
                        row["deviation"] = _finite_or_none(deviation)
                        row["status"] = status
                rows.append(row)
            panel["rows"] = rows
        panels.append(panel)

    return {
        "view_id": view_id,
        "title": vm["title"],
        "mechanism": "drill-down",
        "role": vm["role"],
        "step": step,
        "level": level,
        "snapshot_version": result.snapshot_version,
        "catena_version": result.catena_version,
        "panels": panels,
    }


def _finite_or_none(value: float | None) -> float | None:
    if value is None or not math.isfinite(value):
        return None
    return value


def _panel_baseline(result: CatenaResult, instance_id: str):
    """Baseline mapping and tolerance of a check/compare instance, if any."""
    fi = result.catena.function(instance_id)
    baseline_ref = fi.params.get("baseline")
    if not isinstance(baseline_ref, str) or baseline_ref not in result.snapshot.baselines:
        return None, None
    baseline = result.snapshot.baselines[baseline_ref]
    tol = None
    if isinstance(fi.params.get("tolerance"), Mapping):
        try:
            tol = ToleranceSpec.from_dict(fi.params["tolerance"])
        except (KeyError, TypeError, ValueError):
            tol = None
    return baseline.mapping, tol


# ---------------------------------------------------------------------------
# Config document I/O
# ---------------------------------------------------------------------------

def _config_schema() -> dict:
    with resources.files("spcc.schemas").joinpath("vc_config.schema.json").open(
        "r", encoding="utf-8"
    ) as f:
        return json.load(f)


def catena_from_dict(doc: Mapping, *, project_id: str | None = None) -> VisualizationCatena:
    """Build a catena from its configuration document, validating the schema."""
    jsonschema.validate(dict(doc), _config_schema())
    entries = tuple(
        DataEntryBinding(id=e["id"], metric_id=e["metric"]) for e in doc["data_entries"]
    )
    functions = tuple(
        FunctionInstance(
            id=f["id"],
            technique_id=f["technique"],
            params=dict(f.get("params", {})),
            inputs=tuple(f["inputs"]),
        )
        for f in doc["function_instances"]
    )
    views = tuple(
        ViewInstance(
            id=v["id"],
            mechanism_id=v["mechanism"],
            role_id=v["role"],
            inputs=tuple(v["inputs"]),
            title=v.get("title", ""),
            layout=tuple(v.get("layout", ())),
            goal_id=v.get("goal"),
        )
        for v in doc["view_instances"]
    )
    return VisualizationCatena(
        id=doc.get("id", "catena"),
        project_id=project_id or doc.get("project", ""),
        data_entries=entries,
        function_instances=functions,
        view_instances=views,
        version=int(doc.get("version", 1)),
    )


def load_catena(path: str | Path, *, project_id: str | None = None) -> VisualizationCatena:
    with open(path, encoding="utf-8") as f:
        return catena_from_dict(json.load(f), project_id=project_id)


def catena_fingerprint(vc: VisualizationCatena) -> str:
    return short_hash(canonical_json(vc.to_dict()))
