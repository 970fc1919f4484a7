"""Toolchain command execution over a code workspace.

Commands run with the workspace as working directory, an allowlisted
environment (no inherited secrets), a per-command timeout enforced by
process-group kill with a 2 s grace period, and output capture capped at
64 KiB per stream with head+tail retention and an explicit truncation
marker.

Test adapter protocol: one process invocation per case; the case payload
arrives on stdin as JSON ``{"module", "function", "args"}``; the adapter
prints the JSON-encoded return value on stdout; the verdict compares
stdout against the expected literal after trailing-whitespace strip.
Predicate expectations are executed for their report but never judged
here: evaluating free-text predicates is delegated to the repair stage so
the harness stays deterministic.
"""
from __future__ import annotations

import json
import os
import shutil
import signal
import subprocess
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import AdapterMissing, ToolMissing

PHASE_COMPILE = "Compile"
PHASE_TEST = "Test"
PHASE_RUN = "Run"

VERDICT_PASS = "Pass"
VERDICT_FAIL = "Fail"
VERDICT_ERROR = "Error"

CAPTURE_CAP = 64 * 1024  # bytes per stream
KILL_GRACE_S = 2.0

ENV_ALLOWLIST = ("PATH", "HOME", "LANG", "LC_ALL", "TMPDIR", "SYSTEMROOT")

ADAPTER_FILE = "_adapter.py"

# Written into workspaces that use the python toolchain; reads one case
# from stdin and prints the JSON-encoded call result.
PYTHON_ADAPTER = """\
import importlib
import json
import sys

case = json.load(sys.stdin)
module = importlib.import_module(case["module"])
result = getattr(module, case["function"])(*case["args"])
print(json.dumps(result, sort_keys=True))
"""


@dataclass(frozen=True)
class ToolchainConfig:
    language: str
    compile_command: tuple[str, ...]
    test_command: tuple[str, ...]
    run_command: tuple[str, ...]
    timeout_seconds: float = 30.0
    allowed_dependencies: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.timeout_seconds <= 0:
            raise ValueError("timeout_seconds must be positive")
        for name in ("compile_command", "test_command", "run_command"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be a non-empty argv template")

    def to_dict(self) -> dict:
        return {
            "language": self.language,
            "compile_command": list(self.compile_command),
            "test_command": list(self.test_command),
            "run_command": list(self.run_command),
            "timeout_seconds": self.timeout_seconds,
            "allowed_dependencies": list(self.allowed_dependencies),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ToolchainConfig":
        return cls(
            language=data["language"],
            compile_command=tuple(data["compile_command"]),
            test_command=tuple(data["test_command"]),
            run_command=tuple(data["run_command"]),
            timeout_seconds=data.get("timeout_seconds", 30.0),
            allowed_dependencies=tuple(data.get("allowed_dependencies", ())),
        )


def default_python_toolchain(allowed_dependencies: tuple[str, ...] = ()) -> ToolchainConfig:
    return ToolchainConfig(
        language="python",
        compile_command=(
            sys.executable, "-m", "compileall", "-q",
            "--invalidation-mode", "checked-hash", "{workspace}",
        ),
        test_command=(sys.executable, "{workspace}/" + ADAPTER_FILE),
        run_command=(sys.executable, "{workspace}/{entry}"),
        timeout_seconds=30.0,
        allowed_dependencies=allowed_dependencies,
    )


@dataclass(frozen=True)
class ExecutionReport:
    phase: str
    exit_code: int
    stdout: str
    stderr: str
    duration_ms: int
    timed_out: bool = False
    truncated: bool = False

    @property
    def ok(self) -> bool:
        return self.exit_code == 0 and not self.timed_out

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "exit_code": self.exit_code,
            "stdout": self.stdout,
            "stderr": self.stderr,
            "duration_ms": self.duration_ms,
            "timed_out": self.timed_out,
            "truncated": self.truncated,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExecutionReport":
        return cls(
            phase=data["phase"],
            exit_code=data["exit_code"],
            stdout=data["stdout"],
            stderr=data["stderr"],
            duration_ms=data["duration_ms"],
            timed_out=data.get("timed_out", False),
            truncated=data.get("truncated", False),
        )


def _cap_output(raw: bytes) -> tuple[str, bool]:
    if len(raw) <= CAPTURE_CAP:
        return raw.decode("utf-8", "replace"), False
    half = CAPTURE_CAP // 2
    dropped = len(raw) - 2 * half
    head = raw[:half].decode("utf-8", "replace")
    tail = raw[-half:].decode("utf-8", "replace")
    return f"{head}\n...[output truncated: {dropped} bytes dropped]...\n{tail}", True


def _render_argv(template: tuple[str, ...], workspace: Path, entry: str = "") -> list[str]:
    return [
        token.replace("{workspace}", str(workspace)).replace("{entry}", entry)
        for token in template
    ]


def _sandbox_env() -> dict[str, str]:
    env = {key: os.environ[key] for key in ENV_ALLOWLIST if key in os.environ}
    # Import-time .pyc files are keyed on (mtime, size); a patched source of
    # equal size written within the same second would reuse stale bytecode.
    env["PYTHONDONTWRITEBYTECODE"] = "1"
    return env


def run_command(
    argv: list[str],
    workspace: Path,
    phase: str,
    timeout_s: float,
    stdin_text: str | None = None,
) -> ExecutionReport:
    """Run one command; timeouts surface in the report, not as errors."""
    if shutil.which(argv[0]) is None and not Path(argv[0]).exists():
        raise ToolMissing(argv[0])
    started = time.monotonic()
    proc = subprocess.Popen(
        argv,
        cwd=str(workspace),
        env=_sandbox_env(),
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        start_new_session=True,
    )
    timed_out = False
    stdin_bytes = stdin_text.encode("utf-8") if stdin_text is not None else None
    try:
        out, err = proc.communicate(stdin_bytes, timeout=timeout_s)
    except subprocess.TimeoutExpired:
        timed_out = True
        try:
            os.killpg(proc.pid, signal.SIGTERM)
        except ProcessLookupError:
            pass
        try:
            out, err = proc.communicate(timeout=KILL_GRACE_S)
        except subprocess.TimeoutExpired:
            try:
                os.killpg(proc.pid, signal.SIGKILL)
            except ProcessLookupError:
                pass
            out, err = proc.communicate()
    duration_ms = int((time.monotonic() - started) * 1000)
    stdout, trunc_out = _cap_output(out or b"")
    stderr, trunc_err = _cap_output(err or b"")
    exit_code = proc.returncode if not timed_out else -signal.SIGKILL
    return ExecutionReport(
        phase=phase,
        exit_code=exit_code,
        stdout=stdout,
        stderr=stderr,
        duration_ms=duration_ms,
        timed_out=timed_out,
        truncated=trunc_out or trunc_err,
    )


def compile_workspace(workspace: str | Path, cfg: ToolchainConfig) -> ExecutionReport:
    workspace = Path(workspace)
    argv = _render_argv(cfg.compile_command, workspace)
    return run_command(argv, workspace, PHASE_COMPILE, cfg.timeout_seconds)


def execute(
    workspace: str | Path, entry: str, input_text: str, cfg: ToolchainConfig
) -> ExecutionReport:
    workspace = Path(workspace)
    argv = _render_argv(cfg.run_command, workspace, entry)
    return run_command(argv, workspace, PHASE_RUN, cfg.timeout_seconds, stdin_text=input_text)


def ensure_adapter(workspace: str | Path, cfg: ToolchainConfig) -> None:
    """Install the language's test adapter into the workspace."""
    if cfg.language == "python":
        (Path(workspace) / ADAPTER_FILE).write_text(PYTHON_ADAPTER, "utf-8")
    else:
        raise AdapterMissing(f"no test adapter for language {cfg.language!r}")


def run_tests(
    workspace: str | Path, cases: list, cfg: ToolchainConfig
) -> list[tuple[object, ExecutionReport, str]]:
    """Execute each case via the test adapter; one invocation per case.

    Pass iff stdout equals the expected literal after trailing-whitespace
    strip. Predicate-expectation cases are executed for their captured
    output but always report Pass unless the process fails; their
    semantic judgment belongs to the repair stage.
    """
    workspace = Path(workspace)
    missing = [
        token for token in _render_argv(cfg.test_command, workspace)
        if token.startswith(str(workspace)) and not Path(token).exists()
    ]
    if missing:
        raise AdapterMissing(missing[0])
    results = []
    for case in cases:
        payload = json.dumps(
            {"module": case.module, "function": case.function, "args": list(case.input)}
        )
        argv = _render_argv(cfg.test_command, workspace, entry=case.function)
        report = run_command(argv, workspace, PHASE_TEST, cfg.timeout_seconds, stdin_text=payload)
        if not report.ok:
            verdict = VERDICT_ERROR
        elif case.expected_literal is not None:
            got = report.stdout.rstrip()
            want = case.expected_literal.rstrip()
            verdict = VERDICT_PASS if got == want else VERDICT_FAIL
        else:
            verdict = VERDICT_PASS  # predicate: judged by repair, not here
        results.append((case, report, verdict))
    return results
