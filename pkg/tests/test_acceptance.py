"""Acceptance suite: one test per acceptance criterion, at stated tolerances.

Independent oracles live in oracles.py; nothing here reuses the code path it
checks. The conftest summary hook prints one PASS/FAIL line per criterion.
"""

import itertools
import json
import math
import random
import time

import pytest
from fastapi.testclient import TestClient

from oracles import (
    all_topological_orders,
    classify_oracle,
    group_sums,
    ukl_effort_statuses,
)
from spcc.access import AccessPolicy, Principal, authorize_view
from spcc.api import create_app
from spcc.catena import catena_from_dict, execute_catena, reparameterize, toposort, validate_catena
from spcc.data import DataEntry, DataSnapshot, MeasurementPoint
from spcc.errors import CycleError, DuplicateBatch
from spcc.experience import ContextProfile, bind_parameters, retrieve_candidates, reuse_catena
from spcc.gqm import GqmPlan, Metric, formulate_goal
from spcc.service import ControlCenter, load_bundle_dir
from spcc.steps import ProcessStepTree
from spcc.techniques import (
    Baseline,
    ClassifiedSeries,
    DeviationSeries,
    ForecastSeries,
    ParameterSpec,
    RolledUpSeries,
    Summary,
    TechniqueDescriptor,
    ToleranceSpec,
    aggregate,
    builtin_registry,
    monitor,
    predict_course,
    tolerance_range_check,
)
from spcc.util import canonical_json

PROJECT = "ukl_course"


# ---------------------------------------------------------------------------
# Criterion 1: case-study replication
# ---------------------------------------------------------------------------

def test_c1_case_study_replication(tmp_path, ukl_bundle_dir):
    """End-to-end run flags exactly the 4 injected steps, matching the
    independent pointwise oracle, in under 5 seconds."""
    started = time.perf_counter()
    center = ControlCenter(tmp_path / "store")
    center.register_project(load_bundle_dir(ukl_bundle_dir))
    for name in ("effort.csv", "defects.csv"):
        center.ingest(PROJECT, "course_files", (ukl_bundle_dir / "data" / name).read_bytes())
    pm = center.authenticate(PROJECT, "tok-pm-0001")
    views = center.get_views(PROJECT, pm, role="project_manager")
    board = next(v for v in views["views"] if v["view_id"] == "v_pm_effort_board")
    engine_status = {p["step"]: p["status"] for p in board["panels"][0]["data"]["points"]}
    elapsed = time.perf_counter() - started

    oracle_status = ukl_effort_statuses(ukl_bundle_dir)
    assert engine_status == oracle_status
    flagged = {s for s, status in engine_status.items() if status != "OK"}
    assert flagged == {
        "/requirements/specification",
        "/design/ui",
        "/implementation/coding",
        "/test/unit",
    }
    assert sorted(engine_status[s] for s in flagged) == ["VIOLATION", "VIOLATION", "WARN", "WARN"]
    # context metadata carries the three course group sizes
    context = center.store.load_context(PROJECT)
    assert {context.facets["team_size_a"], context.facets["team_size_b"], context.facets["team_size_c"]} == {11, 14, 43}
    assert elapsed < 5.0


# ---------------------------------------------------------------------------
# Criterion 2: tolerance classification oracle equivalence (1,000 triples)
# ---------------------------------------------------------------------------

def test_c2_tolerance_oracle_equivalence():
    rng = random.Random(20051114)
    checked = 0
    for i in range(1000):
        mode = rng.choice(["relative", "absolute"])
        if i % 5 == 0:
            # exact boundary construction with dyadic values
            planned = float(2 ** rng.randint(3, 9))
            warn = rng.choice([0.25, 0.5, 0.125, 1.0])
            violation = warn + rng.choice([0.0, 0.25, 0.5])
            boundary = warn if rng.random() < 0.5 else violation
            if mode == "relative":
                actual = planned * (1 + boundary) if rng.random() < 0.5 else planned * (1 - boundary)
            else:
                actual = planned + boundary if rng.random() < 0.5 else planned - boundary
        else:
            planned = rng.choice([0.0, rng.uniform(0.0, 500.0)])
            warn = rng.uniform(0, 0.5)
            violation = warn + rng.uniform(0, 0.5)
            actual = rng.uniform(0.0, 1000.0)
        tol = ToleranceSpec(mode, warn, violation)
        baseline = Baseline("b", "m", (("/s", planned),), "u")
        got = tolerance_range_check({"/s": actual}, baseline, tol).points[0].status
        expected = classify_oracle(actual, planned, mode, warn, violation)
        assert got == expected, (actual, planned, mode, warn, violation)
        checked += 1
    assert checked == 1000


# ---------------------------------------------------------------------------
# Criterion 3: catena engine properties
# ---------------------------------------------------------------------------

def _combine_registry():
    """Built-ins plus an n-ary combiner so tests can build dense DAGs."""
    registry = builtin_registry()

    def _values(item):
        if isinstance(item, DataEntry):
            return [p.value for p in item.series]
        if isinstance(item, Summary):
            return [item.cumulative or 0.0, float(item.count)]
        if isinstance(item, RolledUpSeries):
            return [v for _, v in item.points]
        if isinstance(item, ForecastSeries):
            return [p.value for p in item.points]
        if isinstance(item, ClassifiedSeries):
            return [p.actual for p in item.points]
        if isinstance(item, DeviationSeries):
            return [p.actual for p in item.points if p.actual is not None]
        raise TypeError(type(item).__name__)

    descriptor = TechniqueDescriptor(
        technique_id="combine",
        purpose="aggregate",
        params=(ParameterSpec("bias", "number", required=False, default=0.0),),
        input_arity=(1, None),
        input_kinds=(
            "data-entry",
            "summary",
            "rolled-up-series",
            "forecast-series",
            "classified-series",
            "deviation-series",
        ),
        output_kind="summary",
    )
    registry.register(
        descriptor,
        lambda inputs, params, snap: monitor(
            [v + params.get("bias", 0.0) for item in inputs for v in _values(item)]
        ),
    )
    return registry


def _dag_snapshot():
    points = [
        MeasurementPoint("2024-01-01T00:00:00Z", "effort", "/a/x", "s1", 1.0, "h"),
        MeasurementPoint("2024-01-02T00:00:00Z", "effort", "/a/y", "s2", 2.0, "h"),
        MeasurementPoint("2024-01-03T00:00:00Z", "effort", "/b/z", "s3", 4.0, "h"),
    ]
    return DataSnapshot(
        version=1,
        points=tuple(sorted(points)),
        baselines={"effort": Baseline("effort", "effort", (("/a", 3.0), ("/b", 4.0)), "h")},
        steps=ProcessStepTree.from_paths(["/a/x", "/a/y", "/b/z"]),
    )


def _dag_catena(function_instances):
    return catena_from_dict(
        {
            "data_entries": [{"id": "de", "metric": "effort"}],
            "function_instances": function_instances,
            "view_instances": [
                {
                    "id": "v",
                    "mechanism": "table",
                    "role": "project_manager",
                    "title": "t",
                    "inputs": [function_instances[-1]["id"]],
                }
            ],
        },
        project_id="p",
    )


def test_c3a_determinism_bit_identical(ukl_catena, ukl_snapshot):
    registry = builtin_registry()
    runs = [execute_catena(ukl_catena, ukl_snapshot, registry) for _ in range(2)]
    assert runs[0].canonical_bytes() == runs[1].canonical_bytes()


def test_c3b_topological_order_independence():
    registry = _combine_registry()
    snapshot = _dag_snapshot()

    eight_node = [
        {"id": "n1", "technique": "aggregate", "params": {"level": 1}, "inputs": ["de"]},
        {"id": "n2", "technique": "aggregate", "params": {"level": 2}, "inputs": ["de"]},
        {"id": "n3", "technique": "combine", "inputs": ["n1"]},
        {"id": "n4", "technique": "combine", "inputs": ["n2"]},
        {"id": "n5", "technique": "combine", "inputs": ["n3", "n4"]},
        {"id": "n6", "technique": "combine", "inputs": ["n3"]},
        {"id": "n7", "technique": "combine", "inputs": ["n5", "n6"]},
        {"id": "n8", "technique": "combine", "inputs": ["n7", "n1"]},
    ]
    diamond = [
        {"id": "d1", "technique": "aggregate", "params": {"level": 1}, "inputs": ["de"]},
        {"id": "d2", "technique": "combine", "inputs": ["d1"]},
        {"id": "d3", "technique": "combine", "inputs": ["d1"], "params": {"bias": 1.0}},
        {"id": "d4", "technique": "combine", "inputs": ["d2", "d3"]},
    ]
    for functions in (diamond, eight_node):
        vc = _dag_catena(functions)
        nodes = [f["id"] for f in functions]
        function_ids = set(nodes)
        edges = {
            (ref, f["id"])
            for f in functions
            for ref in f["inputs"]
            if ref in function_ids
        }
        orders = all_topological_orders(nodes, edges)
        assert len(orders) > 1
        baseline_bytes = execute_catena(vc, snapshot, registry).canonical_bytes()
        for order in orders:  # every topological order, enumerated
            result = execute_catena(vc, snapshot, registry, evaluation_order=order)
            assert result.canonical_bytes() == baseline_bytes
        assert toposort(vc) in orders


def test_c3c_locality_after_reparameterize():
    registry = _combine_registry()
    snapshot = _dag_snapshot()
    functions = [
        {"id": "agg", "technique": "aggregate", "params": {"level": 1}, "inputs": ["de"]},
        {"id": "mid", "technique": "combine", "inputs": ["agg"]},
        {"id": "top", "technique": "combine", "inputs": ["mid", "agg"]},
        {"id": "solo", "technique": "monitor", "inputs": ["de"]},
    ]
    vc = _dag_catena(functions)
    before = execute_catena(vc, snapshot, registry)
    edited = reparameterize(vc, "agg", {"level": 2}, registry=registry)
    after = execute_catena(edited, snapshot, registry)
    dependents = {"agg", "mid", "top"}
    for iid in before.outputs:
        if iid in dependents:
            assert after.outputs[iid] != before.outputs[iid], iid
        else:
            assert after.outputs[iid] == before.outputs[iid], iid


def test_c3d_cycle_rejection_100_random_graphs():
    registry = _combine_registry()
    snapshot = _dag_snapshot()
    plan = GqmPlan(
        goals=(formulate_goal("the effort", "monitoring", "project manager", "x", goal_id="g"),),
        metrics=(Metric("effort", "effort", "h", (0, 100), "ratio", ("g",)),),
        steps=ProcessStepTree.from_paths(["/a/x", "/a/y", "/b/z"]),
    )
    rng = random.Random(501)
    for _ in range(100):
        n = rng.randint(2, 8)
        nodes = [f"n{i}" for i in range(n)]
        functions = []
        forward_edges = []
        for i, nid in enumerate(nodes):
            inputs = ["de"]
            for j in range(i):
                if rng.random() < 0.4:
                    inputs.append(nodes[j])
                    forward_edges.append((nodes[j], nid))
            functions.append({"id": nid, "technique": "combine", "inputs": inputs})
        # inject one back-edge along an existing forward edge (or self-loop)
        if forward_edges and rng.random() < 0.9:
            a, b = rng.choice(forward_edges)
            functions[nodes.index(a)]["inputs"].append(b)
        else:
            victim = rng.choice(functions)
            victim["inputs"].append(victim["id"])
        vc = _dag_catena(functions)
        report = validate_catena(vc, registry, plan)
        assert not report.is_valid
        assert report.by_code("cycle")
        with pytest.raises(CycleError):
            execute_catena(vc, snapshot, registry)


# ---------------------------------------------------------------------------
# Criterion 4: forecast exactness on affine series
# ---------------------------------------------------------------------------

def test_c4_forecast_exactness_affine():
    rng = random.Random(42)
    for _ in range(50):
        a = rng.uniform(-10.0, 10.0)
        b = rng.uniform(-100.0, 100.0)
        n = rng.randint(3, 12)
        spacing = float(rng.randint(1, 7))
        ts = [i * spacing for i in range(n)]
        series = [(t, a * t + b) for t in ts]
        fc = predict_course(series, horizon=4, model="linear-least-squares")
        for p in fc.points:
            assert abs(p.value - (a * p.timestamp + b)) <= 1e-9
        assert fc.rss <= 1e-9

    # constant series is a fixed point of both models
    constant = [(float(i), 7.25) for i in range(6)]
    for model in ("linear-least-squares", "last-value-hold"):
        fc = predict_course(constant, horizon=5, model=model)
        assert all(abs(p.value - 7.25) <= 1e-9 for p in fc.points)


# ---------------------------------------------------------------------------
# Criterion 5: aggregation conservation and drill-down sums
# ---------------------------------------------------------------------------

def _random_tree(rng) -> list[str]:
    paths = []

    def grow(prefix, level):
        for i in range(rng.randint(1, 3)):
            path = f"{prefix}/{level}{chr(97 + i)}"
            paths.append(path)
            if level < 3 and rng.random() < 0.6:
                grow(path, level + 1)

    grow("", 0)
    return paths


def test_c5_aggregation_conservation():
    from spcc.catena import drill_down

    rng = random.Random(7)
    for _ in range(25):
        tree_paths = _random_tree(rng)
        tree = ProcessStepTree.from_paths(tree_paths)
        all_steps = [p for p in tree.sorted_paths() if p != "/"]
        records = [
            (rng.choice(all_steps), rng.uniform(0.0, 50.0))
            for _ in range(rng.randint(1, 60))
        ]
        raw_total = math.fsum(v for _, v in records)
        for depth_level in range(0, tree.max_depth() + 1):
            rolled = aggregate(records, depth_level, "sum", tree=tree)
            level_total = math.fsum(v for _, v in rolled.points)
            assert abs(level_total - raw_total) <= 1e-9 * max(1.0, abs(raw_total))
            # engine grouping equals the hash-group oracle
            assert rolled.mapping == pytest.approx(group_sums(records, depth_level))

        # drill-down conservation on an executed catena
        points = tuple(
            sorted(
                MeasurementPoint(
                    f"2024-01-{i % 28 + 1:02d}T00:00:00Z", "effort", step, f"s{i}", value, "h"
                )
                for i, (step, value) in enumerate(records)
            )
        )
        snapshot = DataSnapshot(version=1, points=points, baselines={}, steps=tree)
        vc = catena_from_dict(
            {
                "data_entries": [{"id": "de", "metric": "effort"}],
                "function_instances": [
                    {"id": "agg", "technique": "aggregate", "params": {"level": 1}, "inputs": ["de"]}
                ],
                "view_instances": [
                    {
                        "id": "v",
                        "mechanism": "drill-down-tree",
                        "role": "project_manager",
                        "title": "t",
                        "inputs": ["agg"],
                    }
                ],
            },
            project_id="p",
        )
        result = execute_catena(vc, snapshot, builtin_registry())
        for step in tree.sorted_paths():
            if step == "/" or tree.is_leaf(step):
                continue
            vm = drill_down(result, "v", step)
            panel = vm["panels"][0]
            child_sum = math.fsum(row["value"] for row in panel["rows"])
            assert abs(child_sum - panel["parent_value"]) <= 1e-9 * max(
                1.0, abs(panel["parent_value"])
            )


# ---------------------------------------------------------------------------
# Criterion 6: privacy isolation on randomized two-group datasets
# ---------------------------------------------------------------------------

def test_c6_privacy_isolation_100_datasets():
    registry = builtin_registry()
    doc = {
        "data_entries": [{"id": "de", "metric": "effort"}],
        "function_instances": [
            {"id": "f_sum", "technique": "aggregate", "params": {"level": 1}, "inputs": ["de"]},
            {"id": "f_mon", "technique": "monitor", "inputs": ["de"]},
        ],
        "view_instances": [
            {
                "id": "v_dev",
                "mechanism": "table",
                "role": "developer",
                "title": "group effort",
                "inputs": ["f_sum", "f_mon"],
            }
        ],
    }
    vc = catena_from_dict(doc, project_id="p")
    tree = ProcessStepTree.from_paths(["/a/x", "/a/y", "/b/z"])
    steps = ["/a/x", "/a/y", "/b/z"]
    rng = random.Random(1914)
    for case in range(100):
        subjects = {
            f"alpha_{case}_{i}": "own_group" for i in range(rng.randint(1, 4))
        } | {
            f"beta_{case}_{i}": "other_group" for i in range(rng.randint(1, 4))
        }
        policy = AccessPolicy.build(subject_groups=subjects)
        points = tuple(
            sorted(
                MeasurementPoint(
                    f"2024-02-{rng.randint(1, 28):02d}T00:00:00Z",
                    "effort",
                    rng.choice(steps),
                    subject,
                    rng.uniform(0.5, 9.5),
                    "h",
                )
                for subject in subjects
                for _ in range(rng.randint(1, 5))
            )
        )
        snapshot = DataSnapshot(version=1, points=points, baselines={}, steps=tree)
        result = execute_catena(vc, snapshot, registry)
        principal = Principal(principal_id="dev", role_id="developer", group_id="own_group")
        vm = authorize_view(principal, vc.view("v_dev"), result, policy)
        blob = canonical_json(vm)
        foreign = [s for s, g in subjects.items() if g == "other_group"]
        assert all(subject not in blob for subject in foreign)
        # filtered aggregates equal filter-then-aggregate oracle values exactly
        own_points = [p for p in points if subjects[p.subject_id] == "own_group"]
        expected = {}
        for p in own_points:
            prefix = "/" + p.step_path.split("/")[1]
            expected.setdefault(prefix, []).append(p.value)
        engine_rolled = {r["step"]: r["value"] for r in vm["panels"][0]["data"]["points"]}
        assert engine_rolled == {k: math.fsum(v) for k, v in expected.items()}
        assert vm["panels"][1]["data"]["cumulative"] == math.fsum(
            p.value for p in sorted(own_points)
        )


# ---------------------------------------------------------------------------
# Criterion 7: reuse round trip is bit-for-bit
# ---------------------------------------------------------------------------

def test_c7_reuse_round_trip(ukl_center):
    pm = ukl_center.authenticate(PROJECT, "tok-pm-0001")
    original = ukl_center.evaluate(PROJECT)
    packaged = ukl_center.package_project(PROJECT, pm)

    query = ukl_center.store.load_context(PROJECT)
    candidates = retrieve_candidates(query, ukl_center.experience)
    assert candidates[0].package_id == packaged["package_id"]
    assert candidates[0].similarity == 1.0

    package = ukl_center.experience.load(packaged["package_id"])
    template, open_params = reuse_catena(package, PROJECT)
    assert open_params  # tolerance params and baseline ref must be re-bound
    original_catena = ukl_center.store.load_catena(PROJECT)
    bound = bind_parameters(
        template,
        {
            (p.instance_id, p.name): original_catena.function(p.instance_id).params[p.name]
            for p in open_params
        },
    )
    snapshot = ukl_center.store.snapshot(PROJECT)
    replayed = execute_catena(bound, snapshot, ukl_center.registry)
    assert replayed.canonical_bytes() == original.canonical_bytes()


# ---------------------------------------------------------------------------
# Criterion 8: ingestion validation receipt on the mixed fixture
# ---------------------------------------------------------------------------

_INGEST_HEADER = "timestamp,project,process_step,metric,subject,value,unit"


def _mixed_rows():
    valid = [
        f"2005-11-{day:02d}T09:00:00Z,p,/design,effort,g1,{day},hours" for day in range(1, 8)
    ]  # 7 valid
    duplicates = [valid[0], valid[3]]  # 2 exact duplicates
    unknown_step = ["2005-11-09T09:00:00Z,p,/qa,effort,g1,3,hours"]  # 1 reject
    out_of_range = ["2005-11-10T09:00:00Z,p,/design,effort,g1,30,hours"]  # warn, kept
    return valid + duplicates + unknown_step + out_of_range


def _mini_bundle():
    return {
        "project": "mini",
        "plan": {
            "goals": [
                {
                    "id": "g1",
                    "object": "the project effort",
                    "purpose": "monitoring",
                    "viewpoint": "project manager",
                    "context": "a fixture",
                }
            ],
            "metrics": [
                {
                    "id": "effort",
                    "name": "Effort",
                    "unit": "hours",
                    "value_domain": [0, 24],
                    "scale": "ratio",
                    "goals": ["g1"],
                }
            ],
            "process_steps": ["/design", "/implementation"],
            "collection_rules": [
                {"metric": "effort", "steps": ["/design", "/implementation"]}
            ],
        },
        "catena": {
            "data_entries": [{"id": "de", "metric": "effort"}],
            "function_instances": [{"id": "f", "technique": "monitor", "inputs": ["de"]}],
            "view_instances": [
                {
                    "id": "v",
                    "mechanism": "table",
                    "role": "project_manager",
                    "title": "effort",
                    "inputs": ["f"],
                }
            ],
        },
        "tokens": [
            {"token": "t-pm", "principal_id": "pm", "role_id": "project_manager", "group_id": "*"}
        ],
        "sources": [{"id": "src", "kind": "csv-file"}],
    }


def test_c8_ingestion_validation_receipt(tmp_path):
    rows = _mixed_rows()
    rng = random.Random(11)
    baseline_keys = None
    for attempt in range(6):  # identity plus five permutations
        ordering = list(rows)
        if attempt:
            rng.shuffle(ordering)
        center = ControlCenter(tmp_path / f"store{attempt}")
        center.register_project(_mini_bundle())
        payload = (_INGEST_HEADER + "\n" + "\n".join(ordering) + "\n").encode()
        receipt = center.ingest("mini", "src", payload)
        assert (receipt.accepted, receipt.warnings, receipt.rejected) == (8, 3, 1)
        assert receipt.snapshot_version == 1
        codes = sorted(f["code"] for f in receipt.findings)
        assert codes == ["DUPLICATE", "DUPLICATE", "OUT_OF_RANGE", "UNKNOWN_STEP"]
        keys = {p.dedup_key() for p in center.store.load_points("mini")}
        if baseline_keys is None:
            baseline_keys = keys
        assert keys == baseline_keys  # accepted set is order-insensitive


# ---------------------------------------------------------------------------
# Criterion 9: API consistency
# ---------------------------------------------------------------------------

def test_c9_api_consistency(tmp_path, ukl_bundle_dir):
    center = ControlCenter(tmp_path / "store")
    client = TestClient(create_app(center), raise_server_exceptions=False)
    bundle = load_bundle_dir(ukl_bundle_dir)
    assert client.put(f"/projects/{PROJECT}", json=bundle).status_code == 201

    pm = {"Authorization": "Bearer tok-pm-0001"}
    payload = (ukl_bundle_dir / "data" / "effort.csv").read_bytes()
    first = client.post(
        f"/projects/{PROJECT}/measurements?source=push",
        content=payload,
        headers={**pm, "Content-Type": "text/csv"},
    )
    assert first.status_code == 200
    assert first.json()["snapshot_version"] == 1

    # repeating the same batch is rejected and changes no state
    repeat = client.post(
        f"/projects/{PROJECT}/measurements?source=push",
        content=payload,
        headers={**pm, "Content-Type": "text/csv"},
    )
    assert repeat.status_code == 409
    with pytest.raises(DuplicateBatch):
        center.ingest(PROJECT, "push", payload)
    assert center.store.snapshot_version(PROJECT) == 1

    # every view/alert response cites the version pair; identical pairs are
    # byte-identical bodies
    views_a = client.get(f"/projects/{PROJECT}/views?role=project_manager", headers=pm)
    views_b = client.get(f"/projects/{PROJECT}/views?role=project_manager", headers=pm)
    assert views_a.content == views_b.content
    body = views_a.json()
    assert body["snapshot_version"] == 1 and body["catena_version"] == 1
    alerts_a = client.get(f"/projects/{PROJECT}/alerts", headers=pm)
    alerts_b = client.get(f"/projects/{PROJECT}/alerts", headers=pm)
    assert alerts_a.content == alerts_b.content
    assert alerts_a.json()["snapshot_version"] == 1
    assert alerts_a.json()["catena_version"] == 1
