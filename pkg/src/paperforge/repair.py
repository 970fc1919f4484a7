"""Stage 4: failure classification, repair prompting, and bounded loops.

Failure taxonomy: the detection phase fixes the major class (compile-time
failures are Syntactic; run/test-time failures are Semantic), and a
checked-in regex pattern table picks the minor class. Unmatched
diagnostics fall to the catch-alls (OtherSyntax, Logical) instead of
guessing.

A repair episode is one bounded classify -> prompt -> patch -> re-check
loop for one failure, with prompt and wall-clock accounting. Exhausted
episodes escalate to the human step; they are never silently dropped.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Callable

from .errors import ContractViolation, EmptyPrompt, EpisodeResolved, SignatureDrift
from .extraction import send_with_contract
from .gateway import AUTOMATIC, HUMAN, Gateway, Session
from .prompting import CodeBlock, RenderedPrompt, StrictJson, TemplateRegistry, parse_contract
from .sandbox import (
    PHASE_COMPILE,
    VERDICT_FAIL,
    ExecutionReport,
    ToolchainConfig,
    run_tests,
)
from .scaffold import (
    CodeUnit,
    normalize_signature,
    parse_python_functions,
    render_implemented,
    replace_function,
)
from .funcgen import TestCase

SYNTACTIC = "Syntactic"
SEMANTIC = "Semantic"

SYNTACTIC_MINORS = ("VariableAccess", "IterableType", "DataFormat", "OtherSyntax")
SEMANTIC_MINORS = ("Invocation", "Logical")

DEFAULT_MAX_ATTEMPTS = {SYNTACTIC: 5, SEMANTIC: 3}


@dataclass(frozen=True)
class ErrorClass:
    major: str
    minor: str

    def __post_init__(self) -> None:
        allowed = SYNTACTIC_MINORS if self.major == SYNTACTIC else SEMANTIC_MINORS
        if self.major not in (SYNTACTIC, SEMANTIC) or self.minor not in allowed:
            raise ValueError(f"inconsistent error class {self.major}/{self.minor}")

    def __str__(self) -> str:
        return f"{self.major}/{self.minor}"

    def to_dict(self) -> dict:
        return {"major": self.major, "minor": self.minor}

    @classmethod
    def from_dict(cls, data: dict) -> "ErrorClass":
        return cls(data["major"], data["minor"])


@dataclass(frozen=True)
class PatternRule:
    phase: str
    pattern: re.Pattern
    minor: str


def load_pattern_table(path: str | Path | None = None) -> tuple[PatternRule, ...]:
    if path is None:
        raw = resources.files("paperforge.data").joinpath("error_patterns.json").read_text("utf-8")
    else:
        raw = Path(path).read_text("utf-8")
    rules = []
    for entry in json.loads(raw):
        rules.append(
            PatternRule(
                phase=entry["phase"],
                pattern=re.compile(entry["pattern"], re.IGNORECASE),
                minor=entry["minor"],
            )
        )
    return tuple(rules)


_PATTERN_TABLE: tuple[PatternRule, ...] | None = None


def _pattern_table() -> tuple[PatternRule, ...]:
    global _PATTERN_TABLE
    if _PATTERN_TABLE is None:
        _PATTERN_TABLE = load_pattern_table()
    return _PATTERN_TABLE


@dataclass(frozen=True)
class TriggerContext:
    """What failed and how to evaluate it again."""

    kind: str  # "compile" | "tests" | "run"
    module: str
    failing_case: TestCase | None = None
    verdict: str | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "module": self.module,
            "failing_case": self.failing_case.to_dict() if self.failing_case else None,
            "verdict": self.verdict,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TriggerContext":
        case = data.get("failing_case")
        return cls(
            kind=data["kind"],
            module=data["module"],
            failing_case=TestCase.from_dict(case) if case else None,
            verdict=data.get("verdict"),
        )


def classify(
    report: ExecutionReport,
    context: TriggerContext,
    table: tuple[PatternRule, ...] | None = None,
) -> ErrorClass:
    """Deterministic classification from the report phase and the table.

    Compile-phase failures are Syntactic with the minor picked by the
    first matching pattern (OtherSyntax otherwise). Run/test failures are
    Semantic: a wrong-output verdict is Logical; invocation patterns mark
    Invocation; everything else falls to Logical.
    """
    table = table if table is not None else _pattern_table()
    text = report.stderr + "\n" + report.stdout
    if report.phase == PHASE_COMPILE:
        for rule in table:
            if rule.phase == PHASE_COMPILE and rule.pattern.search(text):
                return ErrorClass(SYNTACTIC, rule.minor)
        return ErrorClass(SYNTACTIC, "OtherSyntax")
    if context.verdict == VERDICT_FAIL:
        return ErrorClass(SEMANTIC, "Logical")
    for rule in table:
        if rule.phase == report.phase and rule.pattern.search(text):
            return ErrorClass(SEMANTIC, rule.minor)
    return ErrorClass(SEMANTIC, "Logical")


# --- repair prompts ---------------------------------------------------------------

def _diagnostics_text(report: ExecutionReport) -> str:
    parts = []
    if report.stderr.strip():
        parts.append(report.stderr.rstrip())
    if report.stdout.strip():
        parts.append(report.stdout.rstrip())
    text = "\n".join(parts) or "(no diagnostic output)"
    if report.truncated:
        text += "\n[diagnostics were truncated by the capture cap]"
    return text


def _failing_code(unit: CodeUnit) -> str:
    return unit.file_text(unit.main_file())


def _callee_specs(unit: CodeUnit) -> str:
    lines = []
    for decl in unit.functions:
        requirement = decl.requirement or "no recorded requirement"
        lines.append(f"- {decl.signature}: {requirement}")
    return "\n".join(lines)


def build_repair_prompt(
    cls: ErrorClass,
    unit: CodeUnit,
    report: ExecutionReport,
    context: TriggerContext,
    registry: TemplateRegistry,
) -> RenderedPrompt:
    """Template choice by class: compiler feedback, invocation context, or
    test-driven logic repair."""
    diagnostics = _diagnostics_text(report)
    code = _failing_code(unit)
    if cls.major == SYNTACTIC:
        return registry.render("T7", {"DIAGNOSTICS": diagnostics, "CODE": code})
    if cls.minor == "Invocation":
        return registry.render(
            "T8",
            {"DIAGNOSTICS": diagnostics, "CODE": code, "CALLEE_SPECS": _callee_specs(unit)},
        )
    case = context.failing_case
    requirement = "behavior must match the recorded requirement annotations"
    if case is not None:
        target = next((d for d in unit.functions if d.name == case.function), None)
        if target is not None and target.requirement:
            requirement = target.requirement
    return registry.render(
        "T9",
        {
            "CODE": code,
            "REQUIREMENT": requirement,
            "TEST_INPUT": json.dumps(list(case.input)) if case else "(none)",
            "EXPECTED": (case.expected_literal or case.expected_predicate or "") if case else "",
            "ACTUAL": report.stdout.rstrip(),
            "DIAGNOSTICS": diagnostics,
        },
    )


def apply_patch(
    unit: CodeUnit, response: str, allow_whole_file: bool = False
) -> CodeUnit:
    """Apply a fenced-code patch at function granularity.

    Signature changes are rejected. A whole-file replacement requires the
    explicit flag; otherwise unmatched patches are contract violations.
    """
    code = parse_contract(CodeBlock(unit.language), response)
    functions = parse_python_functions(code)
    known = {decl.name: decl for decl in unit.functions}
    matched = [fn for fn in functions if fn.name in known]
    if not matched:
        if allow_whole_file:
            return unit.with_file_text(unit.main_file(), code if code.endswith("\n") else code + "\n")
        if len(functions) == 1 and len(unit.functions) == 1:
            raise SignatureDrift(unit.functions[0].signature, functions[0].signature)
        raise ContractViolation("patch names no known function")
    path = unit.main_file()
    text = unit.file_text(path)
    for fn in matched:
        decl = known[fn.name]
        if normalize_signature(fn.signature) != normalize_signature(decl.signature):
            raise SignatureDrift(decl.signature, fn.signature)
        patched = replace(
            decl,
            body_kind="Implemented",
            body_source="\n".join(fn.body_lines),
        )
        unit = unit.with_function(patched)
        text = replace_function(text, fn.name, render_implemented(patched))
    return unit.with_file_text(path, text)


# --- episodes ----------------------------------------------------------------------

@dataclass
class Attempt:
    prompt_index: int
    patch_applied: bool
    passed: bool
    report: ExecutionReport | None = None

    def to_dict(self) -> dict:
        return {
            "prompt_index": self.prompt_index,
            "patch_applied": self.patch_applied,
            "passed": self.passed,
            "report": self.report.to_dict() if self.report else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Attempt":
        report = data.get("report")
        return cls(
            prompt_index=data["prompt_index"],
            patch_applied=data["patch_applied"],
            passed=data["passed"],
            report=ExecutionReport.from_dict(report) if report else None,
        )


@dataclass
class RepairEpisode:
    error_id: str
    cls: ErrorClass
    context: TriggerContext
    session_id: str
    attempts: list[Attempt] = field(default_factory=list)
    human_steps: list[Attempt] = field(default_factory=list)
    resolved: bool = False
    escalated: bool = False
    human_prompt_count: int = 0
    automatic_prompt_count: int = 0
    wall_clock_ms: int = 0
    tag: str = "module"  # "module" | "integration"

    def to_dict(self) -> dict:
        return {
            "error_id": self.error_id,
            "class": self.cls.to_dict(),
            "context": self.context.to_dict(),
            "session_id": self.session_id,
            "attempts": [a.to_dict() for a in self.attempts],
            "human_steps": [a.to_dict() for a in self.human_steps],
            "resolved": self.resolved,
            "escalated": self.escalated,
            "human_prompt_count": self.human_prompt_count,
            "automatic_prompt_count": self.automatic_prompt_count,
            "wall_clock_ms": self.wall_clock_ms,
            "tag": self.tag,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RepairEpisode":
        return cls(
            error_id=data["error_id"],
            cls=ErrorClass.from_dict(data["class"]),
            context=TriggerContext.from_dict(data["context"]),
            session_id=data["session_id"],
            attempts=[Attempt.from_dict(a) for a in data["attempts"]],
            human_steps=[Attempt.from_dict(a) for a in data.get("human_steps", ())],
            resolved=data["resolved"],
            escalated=data.get("escalated", False),
            human_prompt_count=data["human_prompt_count"],
            automatic_prompt_count=data["automatic_prompt_count"],
            wall_clock_ms=data["wall_clock_ms"],
            tag=data.get("tag", "module"),
        )


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    report: ExecutionReport
    verdict: str | None = None
    failing_case: TestCase | None = None


Recheck = Callable[[CodeUnit], CheckResult]


def repair_loop(
    unit: CodeUnit,
    trigger: CheckResult,
    context: TriggerContext,
    gateway: Gateway,
    session: Session,
    registry: TemplateRegistry,
    recheck: Recheck,
    error_id: str,
    max_attempts: dict[str, int] | None = None,
    table: tuple[PatternRule, ...] | None = None,
    tag: str = "module",
) -> tuple[CodeUnit, RepairEpisode]:
    """Bounded automatic repair for one failure.

    Loops classify -> build prompt -> send (Automatic) -> patch ->
    re-check until the trigger check passes or the class budget is
    exhausted; exhaustion escalates to the human step.
    """
    budgets = max_attempts or DEFAULT_MAX_ATTEMPTS
    started = gateway.clock.now()
    if trigger.passed:
        episode = RepairEpisode(
            error_id=error_id,
            cls=ErrorClass(SEMANTIC, "Logical"),
            context=context,
            session_id=session.id,
            resolved=True,
            tag=tag,
        )
        episode.wall_clock_ms = int((gateway.clock.now() - started) * 1000)
        return unit, episode

    cls = classify(trigger.report, replace(context, verdict=trigger.verdict), table)
    episode = RepairEpisode(
        error_id=error_id, cls=cls, context=context, session_id=session.id, tag=tag
    )
    budget = budgets[cls.major]
    current = trigger
    for _ in range(budget):
        prompt_cls = classify(current.report, replace(context, verdict=current.verdict), table)
        ctx = replace(context, failing_case=current.failing_case or context.failing_case)
        prompt = build_repair_prompt(prompt_cls, unit, current.report, ctx, registry)
        response = gateway.send(session, prompt, AUTOMATIC)
        episode.automatic_prompt_count += 1
        prompt_index = session.records[-1].index
        applied = False
        try:
            unit = apply_patch(unit, response)
            applied = True
        except (ContractViolation, SignatureDrift):
            pass  # unusable patch: burn the attempt, re-check unchanged unit
        current = recheck(unit)
        episode.attempts.append(
            Attempt(
                prompt_index=prompt_index,
                patch_applied=applied,
                passed=current.passed,
                report=current.report,
            )
        )
        if current.passed:
            episode.resolved = True
            break
    if not episode.resolved:
        episode.escalated = True
    episode.wall_clock_ms = int((gateway.clock.now() - started) * 1000)
    return unit, episode


def human_repair_step(
    episode: RepairEpisode,
    human_prompt: str,
    unit: CodeUnit,
    gateway: Gateway,
    session: Session,
    recheck: Recheck,
) -> tuple[CodeUnit, RepairEpisode]:
    """One human-crafted step on an unresolved episode.

    The human text is sent as-is with Human origin; the session carries
    the episode's prior conversation.
    """
    if episode.resolved:
        raise EpisodeResolved(episode.error_id)
    if not human_prompt.strip():
        raise EmptyPrompt("human prompt is empty")
    started = gateway.clock.now()
    prompt = RenderedPrompt(template_id="human", text=human_prompt, bindings={})
    response = gateway.send(session, prompt, HUMAN)
    episode.human_prompt_count += 1
    prompt_index = session.records[-1].index
    applied = False
    try:
        unit = apply_patch(unit, response)
        applied = True
    except (ContractViolation, SignatureDrift):
        pass
    result = recheck(unit)
    episode.human_steps.append(
        Attempt(
            prompt_index=prompt_index,
            patch_applied=applied,
            passed=result.passed,
            report=result.report,
        )
    )
    if result.passed:
        episode.resolved = True
        episode.escalated = False
    episode.wall_clock_ms += int((gateway.clock.now() - started) * 1000)
    return unit, episode


# --- integration testing --------------------------------------------------------------

@dataclass(frozen=True)
class IntegrationOutcome:
    cases: tuple[TestCase, ...]
    results: tuple[tuple[TestCase, ExecutionReport, str], ...]
    failures: tuple[tuple[TestCase, ExecutionReport, str], ...]


def generate_integration_cases(
    units: list[CodeUnit],
    system_io: str,
    gateway: Gateway,
    session: Session,
    registry: TemplateRegistry,
    retry_limit: int = 3,
) -> list[TestCase]:
    """T10-driven cross-module cases validating calls and data exchange."""
    interfaces = []
    for unit in units:
        lines = [f"module {unit.module_name}:"]
        for decl in unit.functions:
            lines.append(f"  - {decl.signature}: {decl.requirement or 'see code'}")
        interfaces.append("\n".join(lines))
    prompt = registry.render(
        "T10",
        {"MODULE_INTERFACES": "\n".join(interfaces), "SYSTEM_IO": system_io},
    )
    payload = send_with_contract(
        gateway, session, prompt, StrictJson("test_cases"), retry_limit, "integration"
    )
    module_names = {u.module_name for u in units}
    cases = []
    for entry in payload["cases"]:
        target = entry.get("function", "")
        module, _, function = target.partition(".")
        if module not in module_names:
            continue  # unknown target module: drop the case
        expected = entry["expected"]
        cases.append(
            TestCase(
                name=entry["name"],
                module=module,
                function=function,
                input=tuple(entry["input"]),
                expected_literal=expected.get("literal"),
                expected_predicate=expected.get("predicate"),
            )
        )
    return cases


def run_integration_cases(
    workspace: str | Path, cases: list[TestCase], cfg: ToolchainConfig
) -> IntegrationOutcome:
    results = tuple(run_tests(workspace, cases, cfg))
    failures = tuple(r for r in results if r[2] != "Pass")
    return IntegrationOutcome(tuple(cases), results, failures)
