from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

REPO_ROOT = Path(__file__).parent.parent
UKL_BUNDLE = REPO_ROOT / "examples" / "ukl_course"


@pytest.fixture(scope="session")
def ukl_bundle_dir() -> Path:
    return UKL_BUNDLE


@pytest.fixture()
def center(tmp_path):
    from spcc.service import ControlCenter

    return ControlCenter(tmp_path / "store")


@pytest.fixture()
def ukl_center(tmp_path):
    """Control center with the course bundle registered and data ingested."""
    from spcc.service import ControlCenter, load_bundle_dir

    center = ControlCenter(tmp_path / "store")
    center.register_project(load_bundle_dir(UKL_BUNDLE))
    data = UKL_BUNDLE / "data"
    center.ingest("ukl_course", "course_files", (data / "effort.csv").read_bytes())
    center.ingest("ukl_course", "course_files", (data / "defects.csv").read_bytes())
    return center


@pytest.fixture(scope="session")
def ukl_snapshot():
    """The course fixture's committed data as an engine-level snapshot."""
    from spcc.data import DataSnapshot
    from spcc.gqm import load_plan
    from spcc.ingestion import accepted_points, parse_records, validate_records
    from spcc.techniques import baselines_from_csv

    plan = load_plan(UKL_BUNDLE / "plan.json")
    records = []
    for name in ("effort.csv", "defects.csv"):
        parsed, findings = parse_records((UKL_BUNDLE / "data" / name).read_bytes(), "csv")
        assert not findings
        records.extend(parsed)
    entries, findings = validate_records(records, plan)
    assert not findings
    baselines = baselines_from_csv((UKL_BUNDLE / "baselines.csv").read_text(encoding="utf-8"))
    return DataSnapshot(
        version=1,
        points=tuple(sorted(accepted_points(entries))),
        baselines=baselines,
        steps=plan.steps,
    )


@pytest.fixture(scope="session")
def ukl_catena():
    from spcc.catena import load_catena

    return load_catena(UKL_BUNDLE / "catena.json", project_id="ukl_course")


@pytest.fixture(scope="session")
def ukl_plan():
    from spcc.gqm import load_plan

    return load_plan(UKL_BUNDLE / "plan.json")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion after the run."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            name = nodeid.split("::")[-1]
            verdict = "PASS" if outcome == "passed" else "FAIL"
            lines.append((name, verdict))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, verdict in sorted(set(lines)):
            terminalreporter.write_line(f"{verdict}  {name}")
