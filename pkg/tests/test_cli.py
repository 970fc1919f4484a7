"""Command-line surface via click's test runner."""
from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from paperforge.workbench.cli import main

from conftest import make_project_inputs


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def initialized(runner, tmp_path):
    bundle, config, project_dir = make_project_inputs(tmp_path)
    result = runner.invoke(
        main, ["init", str(bundle), str(config), "--project-dir", str(project_dir)]
    )
    assert result.exit_code == 0, result.output
    return project_dir


def test_init_and_status(runner, initialized):
    result = runner.invoke(main, ["status", "-d", str(initialized)])
    assert result.exit_code == 0
    assert "stage:    Initialized" in result.output


def test_init_refuses_existing(runner, tmp_path, initialized):
    bundle, config, _ = make_project_inputs(tmp_path / "other")
    result = runner.invoke(
        main, ["init", str(bundle), str(config), "--project-dir", str(initialized)]
    )
    assert result.exit_code == 1
    assert "resume" in result.output


def test_run_extract_approve_and_status(runner, initialized):
    result = runner.invoke(main, ["run", "extract", "-d", str(initialized)])
    assert result.exit_code == 0, result.output
    assert "Extracted" in result.output
    result = runner.invoke(
        main, ["approve-division", "--actor", "reviewer", "-d", str(initialized)]
    )
    assert result.exit_code == 0, result.output
    result = runner.invoke(main, ["status", "-d", str(initialized)])
    assert "DivisionApproved" in result.output


def test_out_of_order_stage_fails_cleanly(runner, initialized):
    result = runner.invoke(main, ["run", "funcgen", "-d", str(initialized)])
    assert result.exit_code == 1
    assert "cannot run" in result.output


def test_refine_division(runner, initialized):
    runner.invoke(main, ["run", "extract", "-d", str(initialized)])
    result = runner.invoke(
        main, ["refine-division", "-m", "merge the modules", "-d", str(initialized)]
    )
    assert result.exit_code == 0, result.output
    assert "revision 2" in result.output


def test_full_pipeline_and_metrics_csv(runner, initialized):
    for args in (
        ["run", "extract"],
        ["approve-division", "--actor", "reviewer"],
        ["run", "scaffold"],
        ["run", "funcgen"],
        ["run", "integrate"],
        ["run", "finalize"],
    ):
        result = runner.invoke(main, args + ["-d", str(initialized)])
        assert result.exit_code == 0, f"{args}: {result.output}"
    result = runner.invoke(main, ["status", "-d", str(initialized)])
    assert "stage:    Done" in result.output

    result = runner.invoke(main, ["metrics", "--format", "csv", "-d", str(initialized)])
    assert result.exit_code == 0
    assert result.output.startswith("section,key,subkey,value")

    out = initialized / "metrics/metrics.json"
    result = runner.invoke(
        main, ["metrics", "--format", "json", "-o", str(out), "-d", str(initialized)]
    )
    assert result.exit_code == 0
    assert json.loads(out.read_text())["total_records"] > 0


def test_timer_commands(runner, initialized):
    assert runner.invoke(
        main, ["timer", "paper-reading", "start", "-d", str(initialized)]
    ).exit_code == 0
    assert runner.invoke(
        main, ["timer", "paper-reading", "stop", "-d", str(initialized)]
    ).exit_code == 0
    result = runner.invoke(main, ["timer", "paper-reading", "stop", "-d", str(initialized)])
    assert result.exit_code == 1
    assert "not running" in result.output


def test_resume_prints_state_json(runner, initialized):
    runner.invoke(main, ["run", "extract", "-d", str(initialized)])
    result = runner.invoke(main, ["resume", "-d", str(initialized)])
    assert result.exit_code == 0
    assert json.loads(result.output)["stage"] == "Extracted"


def test_lock_released_after_command(runner, initialized):
    runner.invoke(main, ["run", "extract", "-d", str(initialized)])
    assert not (initialized / ".lock").exists()
