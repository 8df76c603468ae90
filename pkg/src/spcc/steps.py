"""Process-step paths and the project step tree.

Steps are slash paths ("/design/review"); the tree has a single root "/".
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import UnknownStep

ROOT = "/"


def normalize_path(path: str) -> str:
    if not isinstance(path, str) or not path.startswith("/"):
        raise ValueError(f"step path must start with '/': {path!r}")
    parts = [p for p in path.split("/") if p]
    if any(p in (".", "..") for p in parts):
        raise ValueError(f"step path may not contain relative segments: {path!r}")
    return "/" + "/".join(parts) if parts else ROOT


def segments(path: str) -> tuple[str, ...]:
    return tuple(p for p in normalize_path(path).split("/") if p)


def depth(path: str) -> int:
    return len(segments(path))


def parent(path: str) -> str | None:
    segs = segments(path)
    if not segs:
        return None
    return "/" + "/".join(segs[:-1]) if len(segs) > 1 else ROOT


def ancestor_at(path: str, level: int) -> str:
    """Prefix of `path` at depth `level` (level 0 is the root)."""
    segs = segments(path)
    if level < 0 or level > len(segs):
        raise ValueError(f"depth {level} out of range for {path!r}")
    return "/" + "/".join(segs[:level]) if level else ROOT


def is_under(path: str, prefix: str) -> bool:
    """True when `path` equals `prefix` or is a descendant of it."""
    p, q = normalize_path(path), normalize_path(prefix)
    if q == ROOT:
        return True
    return p == q or p.startswith(q + "/")


@dataclass(frozen=True)
class ProcessStepTree:
    """Rooted tree of step paths; construction adds all missing ancestors."""

    paths: frozenset[str]

    @classmethod
    def from_paths(cls, paths) -> "ProcessStepTree":
        full: set[str] = {ROOT}
        for raw in paths:
            p = normalize_path(raw)
            full.add(p)
            for level in range(1, depth(p)):
                full.add(ancestor_at(p, level))
        return cls(paths=frozenset(full))

    def __contains__(self, path: str) -> bool:
        try:
            return normalize_path(path) in self.paths
        except ValueError:
            return False

    def require(self, path: str) -> str:
        p = normalize_path(path)
        if p not in self.paths:
            raise UnknownStep(f"step path not in process tree: {p!r}")
        return p

    def children(self, path: str) -> list[str]:
        p = normalize_path(path)
        d = depth(p)
        return sorted(
            q for q in self.paths if q != ROOT and depth(q) == d + 1 and is_under(q, p)
        )

    def is_leaf(self, path: str) -> bool:
        return not self.children(path)

    def leaves(self) -> list[str]:
        return sorted(p for p in self.paths if p != ROOT and self.is_leaf(p))

    def max_depth(self) -> int:
        return max((depth(p) for p in self.paths), default=0)

    def sorted_paths(self) -> list[str]:
        return sorted(self.paths)
