"""Filesystem project store: registration documents, catena versions, and
append-only measurement batches that form immutable snapshots.

Layout under the store root (env SPCC_STORE for the CLI):

    projects/<id>/registration.json      sources, roles, subject groups
    projects/<id>/plan.json              measurement plan
    projects/<id>/context.json           context profile
    projects/<id>/tokens.json            bearer-token principals
    projects/<id>/baselines.csv          planned series
    projects/<id>/catena/00001.json ...  catena versions
    projects/<id>/batches/00001.jsonl    committed points (one batch each)
    projects/<id>/alerts.json            alert bookkeeping
    packages/<package_id>/               experience packages
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Mapping

from .access import Principal, load_tokens
from .catena import VisualizationCatena, catena_from_dict
from .data import DataSnapshot, MeasurementPoint
from .errors import DuplicateProject, StorageError, UnknownProject
from .gqm import GqmPlan, plan_from_dict
from .ingestion import SourceAdapter
from .experience import ContextProfile
from .techniques import Baseline, baselines_from_csv
from .util import canonical_json


class ProjectStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    # -- paths ------------------------------------------------------------

    def _project_dir(self, project_id: str, must_exist: bool = True) -> Path:
        d = self.root / "projects" / project_id
        if must_exist and not d.is_dir():
            raise UnknownProject(f"no project {project_id!r} in store")
        return d

    def list_projects(self) -> list[str]:
        base = self.root / "projects"
        if not base.is_dir():
            return []
        return sorted(p.name for p in base.iterdir() if p.is_dir())

    def exists(self, project_id: str) -> bool:
        return (self.root / "projects" / project_id).is_dir()

    # -- registration -----------------------------------------------------

    def create_project(
        self,
        project_id: str,
        *,
        plan_doc: dict,
        catena_doc: dict,
        baselines_csv: str,
        context_doc: dict,
        tokens_doc: list,
        registration_doc: dict,
    ) -> None:
        target = self.root / "projects" / project_id
        if target.exists():
            raise DuplicateProject(f"project {project_id!r} already registered")
        tmp = target.with_name(target.name + ".tmp")
        try:
            (tmp / "catena").mkdir(parents=True)
            (tmp / "batches").mkdir()
            _write(tmp / "plan.json", canonical_json(plan_doc))
            _write(tmp / "context.json", canonical_json(context_doc))
            _write(tmp / "tokens.json", canonical_json(tokens_doc))
            _write(tmp / "baselines.csv", baselines_csv)
            _write(tmp / "registration.json", canonical_json(registration_doc))
            _write(tmp / "catena" / "00001.json", canonical_json(catena_doc))
            _write(tmp / "alerts.json", canonical_json({"last_pair": None, "alerts": []}))
            os.rename(tmp, target)
        except OSError as e:
            raise StorageError(f"cannot create project {project_id!r}: {e}") from e

    def load_plan(self, project_id: str) -> GqmPlan:
        return plan_from_dict(self._read_json(project_id, "plan.json"))

    def load_context(self, project_id: str) -> ContextProfile:
        return ContextProfile.from_dict(self._read_json(project_id, "context.json"))

    def load_principals(self, project_id: str) -> list[Principal]:
        return load_tokens(self._read_json(project_id, "tokens.json"))

    def load_baselines(self, project_id: str) -> dict[str, Baseline]:
        text = (self._project_dir(project_id) / "baselines.csv").read_text(encoding="utf-8")
        return baselines_from_csv(text) if text.strip() else {}

    def load_baselines_csv(self, project_id: str) -> str:
        return (self._project_dir(project_id) / "baselines.csv").read_text(encoding="utf-8")

    def load_registration(self, project_id: str) -> dict:
        return self._read_json(project_id, "registration.json")

    def load_sources(self, project_id: str) -> dict[str, SourceAdapter]:
        reg = self.load_registration(project_id)
        adapters = [SourceAdapter.from_dict(s) for s in reg.get("sources", [])]
        return {a.source_id: a for a in adapters}

    def _read_json(self, project_id: str, name: str):
        path = self._project_dir(project_id) / name
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise StorageError(f"cannot read {name} for {project_id!r}: {e}") from e

    # -- catena versions ----------------------------------------------------

    def catena_versions(self, project_id: str) -> list[int]:
        d = self._project_dir(project_id) / "catena"
        return sorted(int(p.stem) for p in d.glob("*.json"))

    def load_catena(self, project_id: str, version: int | None = None) -> VisualizationCatena:
        versions = self.catena_versions(project_id)
        if not versions:
            raise StorageError(f"project {project_id!r} has no catena versions")
        v = version if version is not None else versions[-1]
        path = self._project_dir(project_id) / "catena" / f"{v:05d}.json"
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise StorageError(f"no catena version {v} for {project_id!r}: {e}") from e
        return catena_from_dict(doc, project_id=project_id)

    def save_catena(self, project_id: str, vc: VisualizationCatena) -> None:
        path = self._project_dir(project_id) / "catena" / f"{vc.version:05d}.json"
        if path.exists():
            raise StorageError(f"catena version {vc.version} already exists for {project_id!r}")
        _write_atomic(path, canonical_json(vc.to_dict()))

    # -- measurement batches -------------------------------------------------

    def snapshot_version(self, project_id: str) -> int:
        d = self._project_dir(project_id) / "batches"
        return len(list(d.glob("*.jsonl")))

    def load_points(self, project_id: str) -> list[MeasurementPoint]:
        d = self._project_dir(project_id) / "batches"
        points: list[MeasurementPoint] = []
        for path in sorted(d.glob("*.jsonl")):
            for line in path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    points.append(MeasurementPoint.from_dict(json.loads(line)))
        return points

    def point_keys(self, project_id: str) -> set[tuple]:
        return {p.dedup_key() for p in self.load_points(project_id)}

    def batch_hashes(self, project_id: str) -> set[str]:
        d = self._project_dir(project_id) / "batches"
        hashes = set()
        for path in sorted(d.glob("*.meta.json")):
            meta = json.loads(path.read_text(encoding="utf-8"))
            hashes.add(meta.get("hash", ""))
        return hashes

    def append_batch(
        self, project_id: str, points: list[MeasurementPoint], batch_hash: str
    ) -> int:
        """Commit one accepted batch; returns the new snapshot version.

        The batch file is written before its meta marker; a crash in between
        leaves a higher version with no hash record, never a torn snapshot.
        """
        version = self.snapshot_version(project_id) + 1
        d = self._project_dir(project_id) / "batches"
        body = "".join(canonical_json(p.to_dict()) + "\n" for p in points)
        try:
            _write_atomic(d / f"{version:05d}.jsonl", body)
            _write_atomic(
                d / f"{version:05d}.meta.json",
                canonical_json({"hash": batch_hash, "count": len(points)}),
            )
        except OSError as e:
            raise StorageError(f"cannot commit batch for {project_id!r}: {e}") from e
        return version

    def snapshot(self, project_id: str) -> DataSnapshot:
        plan = self.load_plan(project_id)
        return DataSnapshot(
            version=self.snapshot_version(project_id),
            points=tuple(sorted(self.load_points(project_id))),
            baselines=self.load_baselines(project_id),
            steps=plan.steps,
        )

    # -- alert bookkeeping ---------------------------------------------------

    def load_alert_state(self, project_id: str) -> dict:
        return self._read_json(project_id, "alerts.json")

    def save_alert_state(self, project_id: str, state: dict) -> None:
        _write_atomic(self._project_dir(project_id) / "alerts.json", canonical_json(state))


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)
