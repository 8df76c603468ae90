"""The control center: project registration, ingestion, view retrieval,
on-the-fly catena adaptation, alerts, and packaging — one engine behind both
the HTTP API and the CLI.

Reads are lazy: evaluation happens on first access after a new snapshot or
catena version and is cached by that version pair, which the deterministic
engine makes safe.
"""

from __future__ import annotations

import json
import threading
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .access import AccessPolicy, Principal, SCOPE_ALL, authenticate, authorize_view, filtered_result
from .catena import (
    CatenaResult,
    VisualizationCatena,
    catena_from_dict,
    catena_fingerprint,
    drill_down,
    execute_catena,
    reparameterize,
    validate_catena,
)
from .errors import (
    AccessDenied,
    DuplicateBatch,
    NoResults,
    UnknownSource,
    UnknownView,
    ValidationFailed,
)
from .experience import ExperienceStore, package_results
from .gqm import check_goal_coverage, normalize_role, plan_from_dict, plan_to_dict
from .ingestion import (
    FORMAT_CSV,
    FORMAT_JSONL,
    SEVERITY_REJECT,
    SEVERITY_WARNING,
    accepted_points,
    parse_records,
    validate_records,
)
from .steps import is_under
from .store import ProjectStore
from .techniques import (
    KIND_CLASSIFIED,
    VIOLATION,
    WARN,
    baselines_from_csv,
    builtin_registry,
)
from .util import content_hash


@dataclass(frozen=True)
class IngestReceipt:
    accepted: int
    warnings: int
    rejected: int
    snapshot_version: int
    findings: tuple[dict, ...] = ()

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "warnings": self.warnings,
            "rejected": self.rejected,
            "snapshot_version": self.snapshot_version,
            "findings": list(self.findings),
        }


def load_bundle_dir(path: str | Path) -> dict:
    """Assemble a registration bundle from a directory of documents.

    Expects plan.json and catena.json; baselines.csv, context.json,
    tokens.json, and project.json (id, sources, roles, subject_groups) are
    optional.
    """
    d = Path(path)
    bundle: dict = {}
    meta = {}
    if (d / "project.json").is_file():
        meta = json.loads((d / "project.json").read_text(encoding="utf-8"))
    bundle["project"] = meta.get("project", d.name)
    bundle["plan"] = json.loads((d / "plan.json").read_text(encoding="utf-8"))
    bundle["catena"] = json.loads((d / "catena.json").read_text(encoding="utf-8"))
    if (d / "baselines.csv").is_file():
        bundle["baselines"] = (d / "baselines.csv").read_text(encoding="utf-8")
    if (d / "context.json").is_file():
        bundle["context"] = json.loads((d / "context.json").read_text(encoding="utf-8"))
    if (d / "tokens.json").is_file():
        bundle["tokens"] = json.loads((d / "tokens.json").read_text(encoding="utf-8"))
    for key in ("sources", "roles", "subject_groups"):
        if key in meta:
            bundle[key] = meta[key]
    return bundle


class ControlCenter:
    """Single point of control for registered projects."""

    def __init__(self, store_root: str | Path):
        self.store = ProjectStore(store_root)
        self.experience = ExperienceStore(store_root)
        self.registry = builtin_registry()
        self._locks: defaultdict[str, threading.RLock] = defaultdict(threading.RLock)
        self._result_cache: dict[tuple, CatenaResult] = {}

    # -- registration -------------------------------------------------------

    def register_project(self, bundle: Mapping) -> dict:
        """Validate a registration bundle end to end and persist it.

        The plan and catena must cross-validate; an invalid catena (or one
        referencing metrics missing from the plan) fails registration with
        the validation report and goal-coverage findings attached.
        """
        project_id = bundle.get("project")
        if not project_id or not isinstance(project_id, str):
            raise ValidationFailed("bundle is missing a project id")
        try:
            plan = plan_from_dict(bundle["plan"])
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationFailed(f"plan document invalid: {e}") from e
        try:
            vc = catena_from_dict(bundle["catena"], project_id=project_id)
        except Exception as e:
            raise ValidationFailed(f"catena document invalid: {e}") from e
        baselines_raw = bundle.get("baselines", "")
        if isinstance(baselines_raw, list):
            baselines_csv = _rows_to_csv(baselines_raw)
        else:
            baselines_csv = str(baselines_raw)
        try:
            baselines = baselines_from_csv(baselines_csv) if baselines_csv.strip() else {}
        except ValueError as e:
            raise ValidationFailed(f"baseline file invalid: {e}") from e

        policy = AccessPolicy.build(
            extra_roles=bundle.get("roles", ()),
            subject_groups=bundle.get("subject_groups", {}),
        )
        report = validate_catena(vc, self.registry, plan, roles=policy.role_ids())
        coverage = check_goal_coverage(plan, vc)
        if not report.is_valid:
            raise ValidationFailed(
                "catena does not validate against the plan", report=report, coverage=coverage
            )
        missing_baselines = _unresolved_baseline_refs(vc, baselines)
        if missing_baselines:
            raise ValidationFailed(
                f"catena references baselines not in the baseline file: {missing_baselines}",
                report=report,
                coverage=coverage,
            )

        registration = {
            "project": project_id,
            "sources": list(bundle.get("sources", [])),
            "roles": list(bundle.get("roles", [])),
            "subject_groups": dict(bundle.get("subject_groups", {})),
        }
        context_doc = bundle.get("context", {"project": project_id, "facets": {}, "notes": ""})
        self.store.create_project(
            project_id,
            plan_doc=plan_to_dict(plan),
            catena_doc=vc.to_dict(),
            baselines_csv=baselines_csv,
            context_doc=context_doc,
            tokens_doc=list(bundle.get("tokens", [])),
            registration_doc=registration,
        )
        return self.project_meta(project_id)

    def project_meta(self, project_id: str) -> dict:
        vc = self.store.load_catena(project_id)
        return {
            "project": project_id,
            "snapshot_version": self.store.snapshot_version(project_id),
            "catena_version": vc.version,
            "catena_id": vc.id,
            "views": sorted(v.id for v in vc.view_instances),
            "roles": sorted({v.role_id for v in vc.view_instances}),
        }

    # -- auth -----------------------------------------------------------------

    def authenticate(self, project_id: str, token: str) -> Principal:
        return authenticate(token, self.store.load_principals(project_id))

    def policy(self, project_id: str) -> AccessPolicy:
        reg = self.store.load_registration(project_id)
        return AccessPolicy.build(
            extra_roles=reg.get("roles", ()), subject_groups=reg.get("subject_groups", {})
        )

    def _require_manager(self, project_id: str, principal: Principal) -> None:
        role = self.policy(project_id).role_of(principal)
        if role.scope != SCOPE_ALL:
            raise AccessDenied(f"role {principal.role_id!r} may not perform this operation")

    # -- ingestion ---------------------------------------------------------------

    def ingest(
        self,
        project_id: str,
        source_id: str,
        payload: bytes,
        *,
        fmt: str | None = None,
        content_type: str | None = None,
    ) -> IngestReceipt:
        """Parse, validate, and atomically commit one measurement batch."""
        with self._locks[project_id]:
            sources = self.store.load_sources(project_id)
            if source_id not in sources:
                raise UnknownSource(f"source {source_id!r} not registered for {project_id!r}")
            resolved_fmt = fmt or _format_for(sources[source_id].kind, content_type)
            batch_hash = content_hash(payload)
            if batch_hash in self.store.batch_hashes(project_id):
                raise DuplicateBatch(f"batch {batch_hash[:12]} already ingested")

            records, parse_findings = parse_records(payload, resolved_fmt, source_id=source_id)
            plan = self.store.load_plan(project_id)
            entries, findings = validate_records(
                records, plan, existing_keys=self.store.point_keys(project_id)
            )
            all_findings = list(parse_findings) + list(findings)
            points = accepted_points(entries)
            version = self.store.snapshot_version(project_id)
            if points:
                version = self.store.append_batch(project_id, points, batch_hash)
            return IngestReceipt(
                accepted=len(points),
                warnings=sum(1 for f in all_findings if f.severity == SEVERITY_WARNING),
                rejected=sum(1 for f in all_findings if f.severity == SEVERITY_REJECT),
                snapshot_version=version,
                findings=tuple(f.to_dict() for f in all_findings),
            )

    # -- evaluation -----------------------------------------------------------

    def evaluate(self, project_id: str) -> CatenaResult:
        """Result for the latest (snapshot, catena) pair; cached, and alert
        bookkeeping advances exactly once per new pair."""
        with self._locks[project_id]:
            vc = self.store.load_catena(project_id)
            snapshot = self.store.snapshot(project_id)
            key = (project_id, snapshot.version, vc.version, None)
            result = self._result_cache.get(key)
            if result is None:
                result = execute_catena(vc, snapshot, self.registry)
                self._result_cache[key] = result
            self._update_alerts(project_id, result)
            return result

    def _filtered(self, project_id: str, result: CatenaResult, group_id: str) -> CatenaResult:
        key = (project_id, result.snapshot_version, result.catena_version, group_id)
        cached = self._result_cache.get(key)
        if cached is None:
            cached = filtered_result(result, self.policy(project_id), group_id)
            self._result_cache[key] = cached
        return cached

    # -- views ---------------------------------------------------------------

    def get_views(
        self, project_id: str, principal: Principal, role: str | None = None
    ) -> dict:
        """Rendered views for the latest snapshot, filtered per the principal.

        An own-group principal may only retrieve views for their own role;
        the role filter narrows the view list for all-groups principals.
        """
        result = self.evaluate(project_id)
        policy = self.policy(project_id)
        scope_all = policy.role_of(principal).scope == SCOPE_ALL
        if role is not None and not scope_all:
            if normalize_role(role) != normalize_role(principal.role_id):
                raise AccessDenied(
                    f"role {principal.role_id!r} may not request views for role {role!r}"
                )
        vc = result.catena
        selected = []
        for view in sorted(vc.view_instances, key=lambda v: v.id):
            if role is not None and normalize_role(view.role_id) != normalize_role(role):
                continue
            if not scope_all and normalize_role(view.role_id) != normalize_role(principal.role_id):
                continue
            selected.append(view)
        views = [authorize_view(principal, view, result, policy) for view in selected]
        return {
            "project": project_id,
            "snapshot_version": result.snapshot_version,
            "catena_version": result.catena_version,
            "views": views,
        }

    def drill(
        self, project_id: str, view_id: str, step: str, principal: Principal
    ) -> dict:
        result = self.evaluate(project_id)
        policy = self.policy(project_id)
        view = result.catena.view(view_id)
        if view is None:
            raise UnknownView(f"no view {view_id!r} in catena")
        if policy.role_of(principal).scope != SCOPE_ALL:
            if normalize_role(view.role_id) != normalize_role(principal.role_id):
                raise AccessDenied(
                    f"role {principal.role_id!r} may not open views for role {view.role_id!r}"
                )
            result = self._filtered(project_id, result, principal.group_id)
        return drill_down(result, view_id, step)

    # -- adaptation -----------------------------------------------------------

    def update_parameters(
        self, project_id: str, instance_id: str, params: Mapping, principal: Principal
    ) -> dict:
        """Re-parameterize on the fly: managers only, new catena version."""
        self._require_manager(project_id, principal)
        with self._locks[project_id]:
            vc = self.store.load_catena(project_id)
            updated = reparameterize(vc, instance_id, params, registry=self.registry)
            self.store.save_catena(project_id, updated)
            return {"project": project_id, "catena_version": updated.version}

    def history(self, project_id: str) -> dict:
        versions = []
        for v in self.store.catena_versions(project_id):
            vc = self.store.load_catena(project_id, version=v)
            versions.append(
                {"version": v, "catena_id": vc.id, "fingerprint": catena_fingerprint(vc)}
            )
        return {"project": project_id, "versions": versions}

    # -- alerts ----------------------------------------------------------------

    def _update_alerts(self, project_id: str, result: CatenaResult) -> None:
        state = self.store.load_alert_state(project_id)
        pair = [result.snapshot_version, result.catena_version]
        if state.get("last_pair") == pair:
            return
        current = _alert_keys(result, self.policy(project_id))
        alerts = state.get("alerts", [])
        open_by_key = {
            (a["instance"], a["step"], a["status"]): a for a in alerts if a["cleared_at"] is None
        }
        for key, alert in open_by_key.items():
            if key not in current:
                alert["cleared_at"] = result.snapshot_version
        for key, groups in sorted(current.items()):
            instance, step, status = key
            if key in open_by_key:
                open_by_key[key]["groups"] = groups
                continue
            alerts.append(
                {
                    "alert_id": f"{instance}@{step}:{status}@v{result.snapshot_version}",
                    "project": project_id,
                    "instance": instance,
                    "step": step,
                    "status": status,
                    "first_seen": result.snapshot_version,
                    "cleared_at": None,
                    "groups": groups,
                }
            )
        self.store.save_alert_state(project_id, {"last_pair": pair, "alerts": alerts})

    def list_alerts(self, project_id: str, principal: Principal, since: int = 0) -> dict:
        """Open alerts plus those cleared after `since`, derived from the
        latest evaluation; own-group principals see only alerts their group
        contributed to."""
        result = self.evaluate(project_id)
        policy = self.policy(project_id)
        own_group = None
        if policy.role_of(principal).scope != SCOPE_ALL:
            own_group = principal.group_id
        state = self.store.load_alert_state(project_id)
        out = []
        for a in state.get("alerts", []):
            if a["cleared_at"] is not None and a["cleared_at"] <= since:
                continue
            if own_group is not None and own_group not in a.get("groups", []):
                continue
            out.append(dict(a))
        out.sort(key=lambda a: (a["instance"], a["step"], a["status"], a["first_seen"]))
        return {
            "project": project_id,
            "snapshot_version": result.snapshot_version,
            "catena_version": result.catena_version,
            "alerts": out,
        }

    # -- packaging ---------------------------------------------------------------

    def package_project(self, project_id: str, principal: Principal) -> dict:
        """Archive the current catena, baselines, context, and outcome."""
        self._require_manager(project_id, principal)
        with self._locks[project_id]:
            state = self.store.load_alert_state(project_id)
            if state.get("last_pair") is None and self.store.snapshot_version(project_id) == 0:
                raise NoResults(f"project {project_id!r} has no executed catena result")
            result = self.evaluate(project_id)
            package = package_results(
                project_id,
                result.catena,
                result,
                self.store.load_context(project_id),
                plan=self.store.load_plan(project_id),
                baselines=self.store.load_baselines(project_id),
                store=self.experience,
            )
            return {"project": project_id, "package_id": package.package_id}


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _format_for(adapter_kind: str, content_type: str | None) -> str:
    if adapter_kind == "csv-file":
        return FORMAT_CSV
    if adapter_kind == "json-lines-file":
        return FORMAT_JSONL
    ct = (content_type or "").split(";")[0].strip().lower()
    if ct in ("application/x-ndjson", "application/jsonlines", "application/json-lines"):
        return FORMAT_JSONL
    return FORMAT_CSV


def _rows_to_csv(rows: list) -> str:
    lines = ["metric,process_step,planned,unit"]
    for r in rows:
        lines.append(f"{r['metric']},{r['process_step']},{r['planned']},{r['unit']}")
    return "\n".join(lines) + "\n"


def _unresolved_baseline_refs(vc: VisualizationCatena, baselines: Mapping) -> list[str]:
    missing = []
    for fi in vc.function_instances:
        ref = fi.params.get("baseline")
        if isinstance(ref, str) and ref not in baselines:
            missing.append(ref)
    return sorted(set(missing))


def _alert_keys(result: CatenaResult, policy: AccessPolicy) -> dict[tuple, list[str]]:
    """(instance, step, status) -> contributing groups, from classified outputs."""
    keys: dict[tuple, list[str]] = {}
    if result.catena is None or result.snapshot is None:
        return keys
    for iid, out in sorted(result.outputs.items()):
        if out.status != "ok" or out.kind != KIND_CLASSIFIED or out.value is None:
            continue
        entry_ids = result.catena.transitive_entry_ids(iid)
        metrics = {e.metric_id for e in result.catena.data_entries if e.id in entry_ids}
        for p in out.value.points:
            if p.status not in (WARN, VIOLATION):
                continue
            groups = sorted(
                {
                    policy.group_of(pt.subject_id)
                    for pt in result.snapshot.points
                    if pt.metric_id in metrics and is_under(pt.step_path, p.key)
                }
            )
            keys[(iid, p.key, p.status)] = groups
    return keys
