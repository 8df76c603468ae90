"""Experience base: packaging finished control configurations with their
context and outcomes, similarity-ranked retrieval, and template reuse.

Packages are append-only directories; nothing is ever rewritten.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from .catena import CatenaResult, VisualizationCatena, catena_from_dict
from .errors import CorruptPackage, NoResults, StorageError
from .gqm import GqmPlan, plan_from_dict, plan_to_dict
from .techniques import (
    KIND_CLASSIFIED,
    Baseline,
    TechniqueRegistry,
    baselines_from_csv,
    baselines_to_csv,
    builtin_registry,
)
from .util import canonical_json, short_hash, utc_now_iso


@dataclass(frozen=True)
class ContextProfile:
    """Facet map characterizing a project (domain, team_size, ...)."""

    project_id: str
    facets: Mapping[str, Any] = field(default_factory=dict)
    notes: str = ""

    def __post_init__(self):
        for name, value in self.facets.items():
            if not isinstance(name, str) or not name:
                raise ValueError("facet names must be non-empty strings")
            if not isinstance(value, (str, int, float)) or isinstance(value, bool):
                raise ValueError(f"facet {name!r}: values must be strings or numbers")

    def to_dict(self) -> dict:
        return {"project": self.project_id, "facets": dict(self.facets), "notes": self.notes}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ContextProfile":
        return cls(project_id=d.get("project", ""), facets=dict(d.get("facets", {})), notes=d.get("notes", ""))


@dataclass(frozen=True)
class ExperiencePackage:
    package_id: str
    context: ContextProfile
    catena_doc: dict
    plan_doc: dict
    baselines: Mapping[str, Baseline]
    outcome: dict  # per-metric status tallies of the final evaluation
    created_at: str

    def catena(self) -> VisualizationCatena:
        try:
            return catena_from_dict(self.catena_doc)
        except Exception as e:
            raise CorruptPackage(f"package {self.package_id!r}: bad catena document: {e}") from e

    def plan(self) -> GqmPlan:
        try:
            return plan_from_dict(self.plan_doc)
        except Exception as e:
            raise CorruptPackage(f"package {self.package_id!r}: bad plan document: {e}") from e


@dataclass(frozen=True)
class ReuseCandidate:
    package_id: str
    similarity: float
    matched_facets: tuple[str, ...]
    open_parameters: tuple["OpenParameter", ...]

    def to_dict(self) -> dict:
        return {
            "package_id": self.package_id,
            "similarity": self.similarity,
            "matched_facets": list(self.matched_facets),
            "open_parameters": [p.to_dict() for p in self.open_parameters],
        }


@dataclass(frozen=True)
class OpenParameter:
    """A re-parameterization point that must be bound before reuse."""

    instance_id: str
    name: str
    type: str

    def to_dict(self) -> dict:
        return {"instance": self.instance_id, "param": self.name, "type": self.type}


# ---------------------------------------------------------------------------
# Store
# ---------------------------------------------------------------------------

class ExperienceStore:
    """Append-only package directories under <root>/packages/<package_id>/."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.packages_dir = self.root / "packages"

    def list_ids(self) -> list[str]:
        if not self.packages_dir.is_dir():
            return []
        return sorted(p.name for p in self.packages_dir.iterdir() if p.is_dir())

    def next_sequence(self) -> int:
        return len(self.list_ids()) + 1

    def append(self, package: ExperiencePackage) -> None:
        target = self.packages_dir / package.package_id
        if target.exists():
            raise StorageError(f"package {package.package_id!r} already exists (store is append-only)")
        tmp = target.with_name(target.name + ".tmp")
        try:
            tmp.mkdir(parents=True)
            (tmp / "context.json").write_text(
                canonical_json(package.context.to_dict()), encoding="utf-8"
            )
            (tmp / "catena.json").write_text(canonical_json(package.catena_doc), encoding="utf-8")
            (tmp / "plan.json").write_text(canonical_json(package.plan_doc), encoding="utf-8")
            (tmp / "baselines.csv").write_text(
                baselines_to_csv(package.baselines), encoding="utf-8"
            )
            (tmp / "outcome.json").write_text(
                canonical_json({"created_at": package.created_at, "summary": package.outcome}),
                encoding="utf-8",
            )
            os.rename(tmp, target)
        except OSError as e:
            raise StorageError(f"cannot write package {package.package_id!r}: {e}") from e

    def load(self, package_id: str) -> ExperiencePackage:
        target = self.packages_dir / package_id
        if not target.is_dir():
            raise CorruptPackage(f"no package {package_id!r} in store")
        try:
            context = ContextProfile.from_dict(
                json.loads((target / "context.json").read_text(encoding="utf-8"))
            )
            catena_doc = json.loads((target / "catena.json").read_text(encoding="utf-8"))
            plan_doc = json.loads((target / "plan.json").read_text(encoding="utf-8"))
            baselines = baselines_from_csv((target / "baselines.csv").read_text(encoding="utf-8"))
            outcome_doc = json.loads((target / "outcome.json").read_text(encoding="utf-8"))
        except (OSError, ValueError, KeyError) as e:
            raise CorruptPackage(f"package {package_id!r} is unreadable: {e}") from e
        if not isinstance(catena_doc, dict) or not isinstance(plan_doc, dict):
            raise CorruptPackage(f"package {package_id!r} holds malformed documents")
        pkg = ExperiencePackage(
            package_id=package_id,
            context=context,
            catena_doc=catena_doc,
            plan_doc=plan_doc,
            baselines=baselines,
            outcome=outcome_doc.get("summary", {}),
            created_at=outcome_doc.get("created_at", ""),
        )
        pkg.catena()  # structural check; raises CorruptPackage on truncation
        return pkg


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def summarize_outcome(result: CatenaResult) -> dict:
    """Per-metric tallies of classified statuses in the final evaluation."""
    if result.catena is None:
        return {}
    summary: dict[str, dict[str, int]] = {}
    for iid, out in sorted(result.outputs.items()):
        if out.status != "ok" or out.kind != KIND_CLASSIFIED or out.value is None:
            continue
        entry_ids = result.catena.transitive_entry_ids(iid)
        metrics = sorted(
            {e.metric_id for e in result.catena.data_entries if e.id in entry_ids}
        )
        label = ",".join(metrics) if metrics else iid
        bucket = summary.setdefault(label, {})
        for p in out.value.points:
            bucket[p.status] = bucket.get(p.status, 0) + 1
    return summary


def package_results(
    project_id: str,
    vc: VisualizationCatena,
    result: CatenaResult | None,
    context: ContextProfile,
    *,
    plan: GqmPlan,
    baselines: Mapping[str, Baseline],
    store: ExperienceStore,
) -> ExperiencePackage:
    """Archive the final catena, plan, baselines, context, and outcome."""
    if result is None:
        raise NoResults(f"project {project_id!r} has no executed catena result")
    catena_doc = vc.to_dict()
    plan_doc = plan_to_dict(plan)
    seq = store.next_sequence()
    digest = short_hash(canonical_json({"catena": catena_doc, "context": context.to_dict()}))
    package = ExperiencePackage(
        package_id=f"{seq:04d}-{digest}",
        context=context,
        catena_doc=catena_doc,
        plan_doc=plan_doc,
        baselines=dict(baselines),
        outcome=summarize_outcome(result),
        created_at=utc_now_iso(),
    )
    store.append(package)
    return package


def similarity(query: ContextProfile, stored: ContextProfile) -> tuple[float, tuple[str, ...]]:
    """Share of query facets that match the stored context exactly."""
    if not query.facets:
        raise ValueError("query context must have at least one facet")
    matched = tuple(
        sorted(k for k, v in query.facets.items() if k in stored.facets and stored.facets[k] == v)
    )
    return len(matched) / len(query.facets), matched


def retrieve_candidates(
    query: ContextProfile, store: ExperienceStore, *, registry: TechniqueRegistry | None = None
) -> list[ReuseCandidate]:
    """Packages ranked by facet similarity, newest first among ties."""
    if not query.facets:
        raise ValueError("query context must have at least one facet")
    ranked: list[tuple[float, str, str, ReuseCandidate]] = []
    for package_id in store.list_ids():
        try:
            pkg = store.load(package_id)
        except CorruptPackage:
            continue
        score, matched = similarity(query, pkg.context)
        _, open_params = reuse_catena(pkg, query.project_id or "template", registry=registry)
        candidate = ReuseCandidate(
            package_id=package_id,
            similarity=score,
            matched_facets=matched,
            open_parameters=tuple(open_params),
        )
        ranked.append((score, pkg.created_at, package_id, candidate))
    # similarity descending, ties broken by newer creation timestamp
    ranked.sort(key=lambda r: r[2])
    ranked.sort(key=lambda r: r[1], reverse=True)
    ranked.sort(key=lambda r: r[0], reverse=True)
    return [c for _, _, _, c in ranked]


def reuse_catena(
    package: ExperiencePackage,
    new_project_id: str,
    *,
    registry: TechniqueRegistry | None = None,
) -> tuple[VisualizationCatena, list[OpenParameter]]:
    """Template from an archived catena: metric wiring kept, baseline refs
    and tolerance params cleared and listed as open parameters."""
    vc = package.catena()
    reg = registry if registry is not None else builtin_registry()
    open_params: list[OpenParameter] = []
    rebuilt = []
    for fi in vc.function_instances:
        params = dict(fi.params)
        if fi.technique_id in reg:
            for spec in reg.descriptor(fi.technique_id).params:
                if spec.type in ("baseline", "tolerance") and spec.name in params:
                    del params[spec.name]
                    open_params.append(OpenParameter(fi.id, spec.name, spec.type))
        rebuilt.append(replace(fi, params=params))
    template = replace(
        vc, project_id=new_project_id, function_instances=tuple(rebuilt), version=1
    )
    open_params.sort(key=lambda p: (p.instance_id, p.name))
    return template, open_params


def bind_parameters(
    template: VisualizationCatena, values: Mapping[tuple[str, str], Any]
) -> VisualizationCatena:
    """Supply open-parameter values on a reuse template.

    Binding instantiates the template rather than editing a live catena, so
    the version is left untouched; validation passes once every open
    parameter has a value.
    """
    rebuilt = []
    for fi in template.function_instances:
        params = dict(fi.params)
        for (instance_id, name), value in values.items():
            if instance_id == fi.id:
                params[name] = value
        rebuilt.append(replace(fi, params=params))
    return replace(template, function_instances=tuple(rebuilt))
