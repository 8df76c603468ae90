"""Command-line front end: the same engine as the HTTP service, no server.

The CLI operates with full visibility (local operator = supervisor). Exit
codes: 0 success, 2 validation findings of severity reject, 1 errors.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .access import Principal
from .catena import catena_from_dict, validate_catena
from .errors import SpccError
from .gqm import check_goal_coverage, plan_from_dict
from .service import ControlCenter, load_bundle_dir
from .techniques import builtin_registry
from .util import canonical_json

_CLI_PRINCIPAL = Principal(principal_id="cli", role_id="supervisor", group_id="*")


def _center(store: str) -> ControlCenter:
    return ControlCenter(store)


def _fail(e: SpccError) -> None:
    click.echo(f"error: {e}", err=True)
    sys.exit(1)


@click.group()
@click.option(
    "--store",
    envvar="SPCC_STORE",
    default="./spcc-store",
    show_default=True,
    help="Store root directory (env SPCC_STORE).",
)
@click.pass_context
def main(ctx, store):
    """Software project control center."""
    ctx.obj = store


@main.command()
@click.argument("bundle_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--project", default=None, help="Project id (default: bundle dir name).")
@click.pass_obj
def init(store, bundle_dir, project):
    """Register a project from a bundle directory."""
    bundle = load_bundle_dir(bundle_dir)
    if project:
        bundle["project"] = project
    try:
        meta = _center(store).register_project(bundle)
    except SpccError as e:
        _fail(e)
    click.echo(canonical_json(meta))


@main.command()
@click.argument("bundle_dir", type=click.Path(exists=True, file_okay=False))
def validate(bundle_dir):
    """Validate a bundle's plan/catena without registering it."""
    bundle = load_bundle_dir(bundle_dir)
    try:
        plan = plan_from_dict(bundle["plan"])
        vc = catena_from_dict(bundle["catena"], project_id=bundle.get("project", ""))
    except Exception as e:  # document/schema errors
        click.echo(f"error: {e}", err=True)
        sys.exit(2)
    report = validate_catena(vc, builtin_registry(), plan)
    coverage = check_goal_coverage(plan, vc)
    click.echo(canonical_json({"validation": report.to_dict(), "coverage": coverage.to_dict()}))
    sys.exit(0 if report.is_valid else 2)


@main.command()
@click.argument("payload", type=click.Path(exists=True, dir_okay=False))
@click.option("--project", required=True)
@click.option("--source", required=True, help="Registered source adapter id.")
@click.pass_obj
def ingest(store, payload, project, source):
    """Ingest one measurement batch from a CSV or JSON-lines file."""
    path = Path(payload)
    fmt = "json-lines" if path.suffix in (".jsonl", ".ndjson") else "csv"
    try:
        receipt = _center(store).ingest(project, source, path.read_bytes(), fmt=fmt)
    except SpccError as e:
        _fail(e)
    click.echo(canonical_json(receipt.to_dict()))
    sys.exit(2 if receipt.rejected else 0)


@main.command()
@click.option("--project", required=True)
@click.pass_obj
def run(store, project):
    """Evaluate the catena on the latest snapshot and show the outcome."""
    center = _center(store)
    try:
        result = center.evaluate(project)
        alerts = center.list_alerts(project, _CLI_PRINCIPAL)
    except SpccError as e:
        _fail(e)
    statuses = {
        iid: out.status for iid, out in sorted(result.outputs.items())
    }
    click.echo(
        canonical_json(
            {
                "project": project,
                "snapshot_version": result.snapshot_version,
                "catena_version": result.catena_version,
                "instances": statuses,
                "open_alerts": sum(1 for a in alerts["alerts"] if a["cleared_at"] is None),
            }
        )
    )


@main.command()
@click.option("--project", required=True)
@click.option("--role", "role", required=True, help="Render views for this role.")
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="json")
@click.pass_obj
def report(store, project, role, fmt):
    """Render the role's views from the latest snapshot."""
    try:
        response = _center(store).get_views(project, _CLI_PRINCIPAL, role=role)
    except SpccError as e:
        _fail(e)
    if fmt == "json":
        click.echo(canonical_json(response))
        return
    click.echo(
        f"project {response['project']}  snapshot v{response['snapshot_version']}  "
        f"catena v{response['catena_version']}"
    )
    for vm in response["views"]:
        click.echo(f"\n== {vm['title']} [{vm['mechanism']}] for {vm['role']}")
        for panel in vm["panels"]:
            click.echo(f"  -- {panel['label']} ({panel['technique']}, {panel['status']})")
            data = panel.get("data") or {}
            for point in data.get("points", []):
                if "status" in point:
                    click.echo(
                        f"     {point['step']:<30} actual={point['actual']:<10g} "
                        f"planned={point['planned'] if point['planned'] is not None else '-':<10} "
                        f"{point['status']}"
                    )
            if "count" in data:
                click.echo(f"     {data}")


@main.command()
@click.option("--project", required=True)
@click.pass_obj
def package(store, project):
    """Package the project's control configuration for reuse."""
    try:
        out = _center(store).package_project(project, _CLI_PRINCIPAL)
    except SpccError as e:
        _fail(e)
    click.echo(canonical_json(out))


@main.command()
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.pass_obj
def serve(store, port, host):
    """Run the HTTP API."""
    import uvicorn

    from .api import create_app

    uvicorn.run(create_app(_center(store)), host=host, port=port)


if __name__ == "__main__":
    main()
