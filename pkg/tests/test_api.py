import json

import pytest
from fastapi.testclient import TestClient

from spcc.api import create_app
from spcc.service import ControlCenter, load_bundle_dir

PROJECT = "ukl_course"
PM = {"Authorization": "Bearer tok-pm-0001"}
QA = {"Authorization": "Bearer tok-qa-0001"}
DEV = {"Authorization": "Bearer tok-dev-a-0001"}


@pytest.fixture()
def client(tmp_path, ukl_bundle_dir):
    center = ControlCenter(tmp_path / "store")
    app = create_app(center)
    client = TestClient(app, raise_server_exceptions=False)
    bundle = load_bundle_dir(ukl_bundle_dir)
    bundle.pop("project")
    response = client.put(f"/projects/{PROJECT}", json=bundle)
    assert response.status_code == 201, response.text
    return client


def _ingest(client, ukl_bundle_dir, name, expect=200):
    payload = (ukl_bundle_dir / "data" / name).read_bytes()
    response = client.post(
        f"/projects/{PROJECT}/measurements?source=push",
        content=payload,
        headers={**PM, "Content-Type": "text/csv"},
    )
    assert response.status_code == expect, response.text
    return response


def test_registration_validates_and_conflicts(client, ukl_bundle_dir):
    bundle = load_bundle_dir(ukl_bundle_dir)
    response = client.put(f"/projects/{PROJECT}", json=bundle)
    assert response.status_code == 409  # already registered by fixture

    broken = load_bundle_dir(ukl_bundle_dir)
    broken["catena"] = {"data_entries": []}
    response = client.put("/projects/other", json=broken)
    assert response.status_code == 422
    assert response.json()["error"] == "ValidationFailed"


def test_auth_required_and_rejected(client):
    assert client.get(f"/projects/{PROJECT}/views").status_code == 401
    bad = client.get(
        f"/projects/{PROJECT}/views", headers={"Authorization": "Bearer nope"}
    )
    assert bad.status_code == 401
    assert client.get(f"/projects/{PROJECT}", headers=PM).status_code == 200


def test_ingest_and_duplicate_batch(client, ukl_bundle_dir):
    receipt = _ingest(client, ukl_bundle_dir, "effort.csv").json()
    assert receipt["accepted"] == 84
    assert receipt["snapshot_version"] == 1
    duplicate = _ingest(client, ukl_bundle_dir, "effort.csv", expect=409)
    assert duplicate.json()["error"] == "DuplicateBatch"
    # state unchanged: next read still cites snapshot 1
    views = client.get(f"/projects/{PROJECT}/views", headers=PM).json()
    assert views["snapshot_version"] == 1


def test_views_identical_pairs_byte_identical(client, ukl_bundle_dir):
    _ingest(client, ukl_bundle_dir, "effort.csv")
    first = client.get(f"/projects/{PROJECT}/views?role=project_manager", headers=PM)
    second = client.get(f"/projects/{PROJECT}/views?role=project_manager", headers=PM)
    assert first.content == second.content
    body = first.json()
    assert body["snapshot_version"] == 1 and body["catena_version"] == 1
    assert all(
        vm["snapshot_version"] == 1 and vm["catena_version"] == 1 for vm in body["views"]
    )


def test_developer_role_filter_denied(client, ukl_bundle_dir):
    _ingest(client, ukl_bundle_dir, "effort.csv")
    denied = client.get(f"/projects/{PROJECT}/views?role=project_manager", headers=DEV)
    assert denied.status_code == 403
    own = client.get(f"/projects/{PROJECT}/views", headers=DEV)
    assert own.status_code == 200
    assert own.json()["views"] == []


def test_drill_endpoint(client, ukl_bundle_dir):
    _ingest(client, ukl_bundle_dir, "effort.csv")
    response = client.get(
        f"/projects/{PROJECT}/views/v_pm_effort_board/drill?step=/design", headers=QA
    )
    assert response.status_code == 200
    rows = response.json()["panels"][0]["rows"]
    assert {r["step"] for r in rows} == {"/design/architecture", "/design/ui"}
    missing = client.get(
        f"/projects/{PROJECT}/views/v_pm_effort_board/drill?step=/nowhere", headers=QA
    )
    assert missing.status_code == 404
    ghost = client.get(f"/projects/{PROJECT}/views/v_ghost/drill?step=/design", headers=QA)
    assert ghost.status_code == 404


def test_patch_parameters_flow(client, ukl_bundle_dir):
    _ingest(client, ukl_bundle_dir, "effort.csv")
    body = {
        "baseline": "effort",
        "tolerance": {"mode": "relative", "warn": 0.1, "violation": 0.27},
    }
    denied = client.patch(
        f"/projects/{PROJECT}/catena/functions/fi_effort_tolerance", json=body, headers=DEV
    )
    assert denied.status_code == 403
    ok = client.patch(
        f"/projects/{PROJECT}/catena/functions/fi_effort_tolerance", json=body, headers=PM
    )
    assert ok.status_code == 200
    assert ok.json()["catena_version"] == 2
    bad = client.patch(
        f"/projects/{PROJECT}/catena/functions/fi_effort_forecast",
        json={"horizon": 0},
        headers=PM,
    )
    assert bad.status_code == 422
    assert bad.json()["param"] == "horizon"
    ghost = client.patch(
        f"/projects/{PROJECT}/catena/functions/ghost", json={}, headers=PM
    )
    assert ghost.status_code == 404
    history = client.get(f"/projects/{PROJECT}/history", headers=PM).json()
    assert [v["version"] for v in history["versions"]] == [1, 2]


def test_alerts_endpoint_with_since(client, ukl_bundle_dir):
    _ingest(client, ukl_bundle_dir, "effort.csv")
    alerts = client.get(f"/projects/{PROJECT}/alerts", headers=PM).json()
    assert len(alerts["alerts"]) == 4
    body = {
        "baseline": "effort",
        "tolerance": {"mode": "relative", "warn": 0.4, "violation": 0.5},
    }
    client.patch(
        f"/projects/{PROJECT}/catena/functions/fi_effort_tolerance", json=body, headers=PM
    )
    after = client.get(f"/projects/{PROJECT}/alerts", headers=PM).json()
    assert all(a["cleared_at"] == 1 for a in after["alerts"])
    silent = client.get(f"/projects/{PROJECT}/alerts?since=1", headers=PM).json()
    assert silent["alerts"] == []


def test_package_endpoint(client, ukl_bundle_dir):
    _ingest(client, ukl_bundle_dir, "effort.csv")
    _ingest(client, ukl_bundle_dir, "defects.csv")
    denied = client.post(f"/projects/{PROJECT}/package", headers=DEV)
    assert denied.status_code == 403
    response = client.post(f"/projects/{PROJECT}/package", headers=PM)
    assert response.status_code == 201
    assert response.json()["package_id"].startswith("0001-")


def test_unknown_project_404(client):
    assert client.get("/projects/ghost/views", headers=PM).status_code == 404


def test_measurement_content_type_selects_parser(client, ukl_bundle_dir):
    rows = [
        {
            "timestamp": "2005-12-05T09:00:00Z",
            "project": PROJECT,
            "process_step": "/test/system",
            "metric": "effort",
            "subject": "group_a",
            "value": "2.5",
            "unit": "person-hours",
        }
    ]
    payload = "\n".join(json.dumps(r) for r in rows).encode()
    response = client.post(
        f"/projects/{PROJECT}/measurements?source=push",
        content=payload,
        headers={**PM, "Content-Type": "application/x-ndjson"},
    )
    assert response.status_code == 200
    assert response.json()["accepted"] == 1
