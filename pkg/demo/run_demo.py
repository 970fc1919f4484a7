#!/usr/bin/env python3
"""Build a demo project by driving the CLI, then optionally serve its API.

Variants:

  done              full pipeline to Done (the clean dry run)
  repairing         the estimator is generated wrong and automatic repair
                    never fixes it, leaving an unresolved episode awaiting a
                    human prompt; a scripted reply matching
                    "divide by the probability" resolves it
  invalid-division  stops after extraction with a division that fails
                    validation (dangling dependency), so approval returns 409

Usage:
  python3 demo/run_demo.py --workdir /tmp/demo --variant done [--serve-port 8765]
"""
from __future__ import annotations

import argparse
import json
import subprocess
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))
from demo_inputs import make_project_inputs, pipeline_script  # noqa: E402

GOOD_ESTIMATE = "admitted_bytes / window / probability"
BAD_ESTIMATE = "admitted_bytes / window * probability"

HUMAN_FIX = (
    "```python\n"
    "def estimate_rate(admitted_bytes: int, window: float, probability: float) -> float:\n"
    "    if window <= 0 or probability <= 0:\n"
    "        return 0.0\n"
    "    return admitted_bytes / window / probability\n"
    "```"
)


def cli(args: list[str], project_dir: Path, check: bool = True) -> subprocess.CompletedProcess:
    cmd = [sys.executable, "-m", "paperforge.workbench.cli", *args, "--project-dir", str(project_dir)]
    result = subprocess.run(cmd, capture_output=True, text=True)
    if check and result.returncode != 0:
        sys.stderr.write(result.stdout + result.stderr)
        raise SystemExit(f"command failed: {' '.join(args)}")
    return result


def build(workdir: Path, variant: str) -> Path:
    bundle, config, project_dir = make_project_inputs(workdir)

    if variant == "repairing":
        script = pipeline_script()
        for rule in script:
            if "def estimate_rate" in rule.get("regex", "") and "Implement" in rule["regex"]:
                rule["reply"] = rule["reply"].replace(GOOD_ESTIMATE, BAD_ESTIMATE)
        # the human fix first, then a catch-all that never produces a patch
        script.insert(0, {"match": "divide by the probability", "reply": HUMAN_FIX})
        script.append({"match": "", "reply": "I suggest reviewing the code carefully."})
        (project_dir / "stub_script.json").write_text(json.dumps(script, indent=2), "utf-8")

    cli(["init", str(bundle), str(config)], project_dir)
    cli(["run", "extract"], project_dir)

    if variant == "invalid-division":
        modules = json.loads((project_dir / "modules.json").read_text("utf-8"))
        modules["modules"][1]["depends_on"] = ["ghost_module"]
        (project_dir / "modules.json").write_text(json.dumps(modules, indent=2), "utf-8")
        return project_dir

    cli(["approve-division", "--actor", "demo-reviewer"], project_dir)
    cli(["run", "scaffold"], project_dir)
    cli(["run", "funcgen"], project_dir)
    cli(["run", "integrate"], project_dir)

    if variant == "repairing":
        return project_dir  # left in Repairing with an unresolved episode

    cli(["run", "finalize"], project_dir)
    cli(["metrics", "--format", "csv", "-o", str(project_dir / "metrics/metrics.csv")],
        project_dir)
    return project_dir


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", required=True, type=Path)
    parser.add_argument(
        "--variant", choices=("done", "repairing", "invalid-division"), default="done"
    )
    parser.add_argument("--serve-port", type=int, default=None)
    args = parser.parse_args()

    project_dir = build(args.workdir, args.variant)
    status = cli(["status"], project_dir).stdout
    sys.stdout.write(status)
    sys.stdout.flush()

    if args.serve_port is not None:
        from paperforge.workbench.api import serve_api
        from paperforge.workbench.project import Project

        serve_api(Project.resume(project_dir), args.serve_port)


if __name__ == "__main__":
    main()
