"""Command-line surface over a project directory.

Every mutation acquires the project's single-writer lock and routes
through the same operations as the HTTP API.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from ..errors import PaperforgeError
from .metrics import export_metrics, project_metrics, render_csv
from .project import Lockfile, Project


@click.group()
def main() -> None:
    """Turn a research-paper bundle into an executable code workspace."""


def _project(project_dir: str) -> Project:
    return Project.resume(project_dir)


def _fail(exc: PaperforgeError) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


@main.command()
@click.argument("bundle", type=click.Path(exists=True, file_okay=False))
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--project-dir", "-d", default=".", show_default=True)
def init(bundle: str, config: str, project_dir: str) -> None:
    """Create a project from a paper bundle and a config file."""
    try:
        project = Project.init(bundle, config, project_dir)
    except PaperforgeError as exc:
        _fail(exc)
    click.echo(f"initialized project {project.state.project_id} at {project.dir}")


@main.command()
@click.argument("stage")
@click.option("--project-dir", "-d", default=".", show_default=True)
def run(stage: str, project_dir: str) -> None:
    """Run one pipeline stage (extract, scaffold, funcgen, integrate, finalize)."""
    try:
        with Lockfile(Path(project_dir)):
            project = _project(project_dir)
            state = project.run_stage(stage)
    except PaperforgeError as exc:
        _fail(exc)
    if state.stage == "Failed":
        click.echo(f"stage {stage} failed: {state.failed_reason}", err=True)
        sys.exit(2)
    click.echo(f"stage {stage} complete; project is now {state.stage}")


@main.command()
@click.option("--project-dir", "-d", default=".", show_default=True)
def resume(project_dir: str) -> None:
    """Reload a project from its persisted artifacts and print its state."""
    try:
        project = _project(project_dir)
    except PaperforgeError as exc:
        _fail(exc)
    click.echo(json.dumps(project.state.to_dict(), indent=2, sort_keys=True))


@main.command()
@click.option("--project-dir", "-d", default=".", show_default=True)
def status(project_dir: str) -> None:
    """Print the current stage and artifact index."""
    try:
        project = _project(project_dir)
    except PaperforgeError as exc:
        _fail(exc)
    state = project.state
    click.echo(f"project:  {state.project_id}")
    click.echo(f"stage:    {state.stage}")
    if state.failed_stage:
        click.echo(f"failed:   {state.failed_stage}: {state.failed_reason}")
    click.echo(f"revision: {state.revision}")
    click.echo("artifacts:")
    for name, rel in sorted(state.artifact_index.items()):
        click.echo(f"  {name}: {rel}")


@main.command("approve-division")
@click.option("--actor", required=True, help="who is approving")
@click.option("--project-dir", "-d", default=".", show_default=True)
def approve_division_cmd(actor: str, project_dir: str) -> None:
    """Approve the extracted module division (human gate)."""
    try:
        with Lockfile(Path(project_dir)):
            project = _project(project_dir)
            division = project.approve(actor)
    except PaperforgeError as exc:
        _fail(exc)
    click.echo(f"division approved at revision {division.revision}")


@main.command("refine-division")
@click.option("-m", "--message", "feedback", required=True, help="refinement feedback")
@click.option("--project-dir", "-d", default=".", show_default=True)
def refine_division_cmd(feedback: str, project_dir: str) -> None:
    """Refine the module division with reviewer feedback."""
    try:
        with Lockfile(Path(project_dir)):
            project = _project(project_dir)
            division = project.refine(feedback)
    except PaperforgeError as exc:
        _fail(exc)
    click.echo(f"division refined to revision {division.revision}")


@main.command()
@click.option("--episode", "error_id", required=True, help="episode id, e.g. e0001")
@click.option("-m", "--message", "text", required=True, help="handcrafted repair prompt")
@click.option("--project-dir", "-d", default=".", show_default=True)
def repair(error_id: str, text: str, project_dir: str) -> None:
    """Send one human repair prompt to an unresolved episode."""
    try:
        with Lockfile(Path(project_dir)):
            project = _project(project_dir)
            episode = project.human_repair(error_id, text)
    except PaperforgeError as exc:
        _fail(exc)
    outcome = "resolved" if episode.resolved else "still failing"
    click.echo(f"episode {error_id}: {outcome} (human prompts: {episode.human_prompt_count})")


@main.command()
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True)
@click.option("--output", "-o", type=click.Path(), default=None,
              help="write to a file instead of stdout")
@click.option("--project-dir", "-d", default=".", show_default=True)
def metrics(fmt: str, output: str | None, project_dir: str) -> None:
    """Compute and export the metrics report."""
    try:
        project = _project(project_dir)
        report = project_metrics(project.dir)
    except PaperforgeError as exc:
        _fail(exc)
    if output:
        export_metrics(report, fmt, output)
        click.echo(f"metrics written to {output}")
    elif fmt == "csv":
        click.echo(render_csv(report), nl=False)
    else:
        click.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))


@main.command()
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--project-dir", "-d", default=".", show_default=True)
def serve(port: int, host: str, project_dir: str) -> None:
    """Serve the workbench HTTP API for the review console."""
    from .api import serve_api

    try:
        lock = Lockfile(Path(project_dir))
        lock.acquire()
        try:
            project = _project(project_dir)
            serve_api(project, port, host)
        finally:
            lock.release()
    except PaperforgeError as exc:
        _fail(exc)


@main.command()
@click.argument("category", type=click.Choice(["paper-reading"]))
@click.argument("action", type=click.Choice(["start", "stop"]))
@click.option("--project-dir", "-d", default=".", show_default=True)
def timer(category: str, action: str, project_dir: str) -> None:
    """Record a human timer event (paper-reading start/stop)."""
    try:
        with Lockfile(Path(project_dir)):
            project = _project(project_dir)
            project.record_timer(action)
    except PaperforgeError as exc:
        _fail(exc)
    click.echo(f"{category} timer: {action}")


if __name__ == "__main__":
    main()
