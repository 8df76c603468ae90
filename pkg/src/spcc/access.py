"""Role- and group-scoped visibility: peer groups cannot see each other's
data, all-groups roles see everything.

Filtering re-executes the catena on a group-restricted snapshot, so every
aggregate in a filtered view is computed from filtered raw data.
"""

from __future__ import annotations

import hmac
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .catena import CatenaResult, ViewInstance, execute_catena
from .errors import AccessDenied, InvalidToken, UnknownView
from .gqm import normalize_role

SCOPE_ALL = "all-groups"
SCOPE_OWN = "own-group"


@dataclass(frozen=True)
class Role:
    role_id: str
    title: str
    scope: str

    def __post_init__(self):
        if self.scope not in (SCOPE_ALL, SCOPE_OWN):
            raise ValueError(f"role {self.role_id!r}: unknown scope {self.scope!r}")

    def to_dict(self) -> dict:
        return {"id": self.role_id, "title": self.title, "scope": self.scope}


DEFAULT_ROLES: tuple[Role, ...] = (
    Role("project_manager", "project manager", SCOPE_ALL),
    Role("qa_manager", "QA manager", SCOPE_ALL),
    Role("supervisor", "supervisor", SCOPE_ALL),
    Role("developer", "developer", SCOPE_OWN),
)


@dataclass(frozen=True)
class Principal:
    principal_id: str
    role_id: str
    group_id: str
    token: str = field(repr=False, default="")

    def to_dict(self) -> dict:
        return {"principal_id": self.principal_id, "role": self.role_id, "group": self.group_id}


def load_tokens(source: str | Path | Sequence[Mapping]) -> list[Principal]:
    """tokens.json: list of {token, principal_id, role_id, group_id}."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as f:
            entries = json.load(f)
    else:
        entries = list(source)
    principals = []
    for e in entries:
        principals.append(
            Principal(
                principal_id=e["principal_id"],
                role_id=e["role_id"],
                group_id=e["group_id"],
                token=e["token"],
            )
        )
    return principals


def authenticate(token: str, principals: Sequence[Principal]) -> Principal:
    """Resolve a bearer token; comparison is constant-time per entry and
    scans the whole table to avoid early-exit timing."""
    if not isinstance(token, str) or not token:
        raise InvalidToken("empty token")
    found: Principal | None = None
    for p in principals:
        if hmac.compare_digest(p.token.encode("utf-8"), token.encode("utf-8")):
            found = p
    if found is None:
        raise InvalidToken("unknown token")
    return found


@dataclass(frozen=True)
class AccessPolicy:
    """Role catalog plus the subject->group directory for a project."""

    roles: tuple[Role, ...] = DEFAULT_ROLES
    subject_groups: Mapping[str, str] = field(default_factory=dict)

    def role_of(self, principal: Principal) -> Role:
        for r in self.roles:
            if r.role_id == principal.role_id:
                return r
        raise AccessDenied(f"principal role {principal.role_id!r} is not defined")

    def group_of(self, subject_id: str) -> str:
        # subjects default to being their own group (per-group collection)
        return self.subject_groups.get(subject_id, subject_id)

    def role_ids(self) -> list[str]:
        return [r.role_id for r in self.roles]

    @classmethod
    def build(cls, extra_roles: Sequence[Mapping] = (), subject_groups: Mapping[str, str] | None = None):
        roles = list(DEFAULT_ROLES)
        known = {r.role_id for r in roles}
        for e in extra_roles:
            role = Role(role_id=e["id"], title=e.get("title", e["id"]), scope=e["scope"])
            if role.role_id in known:
                roles = [role if r.role_id == role.role_id else r for r in roles]
            else:
                roles.append(role)
                known.add(role.role_id)
        return cls(roles=tuple(roles), subject_groups=dict(subject_groups or {}))


def visible_subjects(policy: AccessPolicy, result: CatenaResult, group_id: str) -> set[str]:
    return {
        p.subject_id
        for p in result.snapshot.points
        if policy.group_of(p.subject_id) == group_id
    }


def authorize_view(
    principal: Principal,
    view: ViewInstance,
    result: CatenaResult,
    policy: AccessPolicy,
) -> dict:
    """Filtered view model for a principal.

    all-groups scope returns the rendered view unchanged. own-group scope
    requires a role match, drops every point from foreign groups, and
    recomputes all aggregates by re-executing the catena on the filtered
    snapshot.
    """
    if view.id not in result.views:
        raise UnknownView(f"view {view.id!r} not rendered in this result")
    role = policy.role_of(principal)
    if role.scope == SCOPE_ALL:
        return result.views[view.id]
    if normalize_role(view.role_id) != normalize_role(principal.role_id):
        raise AccessDenied(
            f"role {principal.role_id!r} may not open views for role {view.role_id!r}"
        )
    filtered = filtered_result(result, policy, principal.group_id)
    return filtered.views[view.id]


def filtered_result(result: CatenaResult, policy: AccessPolicy, group_id: str) -> CatenaResult:
    """Re-execute the result's catena on the snapshot restricted to one group."""
    if result.catena is None or result.snapshot is None or result.registry is None:
        raise UnknownView("result does not carry its execution context")
    subjects = visible_subjects(policy, result, group_id)
    snapshot = result.snapshot.restrict_subjects(subjects)
    return execute_catena(result.catena, snapshot, result.registry)
