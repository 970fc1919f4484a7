"""Semantic reasoning chains: explicit data-flow and control-flow steps.

Wire format::

    Data Flow:
    1. samples: from parameter `samples`; raw measurement list
    2. total: from step 1; running sum of admitted samples
    Control Flow:
    1. iterate over `samples` in arrival order
    2. if `total` exceeds the budget, stop early
    Summary: accumulates admitted samples until the budget is reached

Data-flow steps declare value names; control-flow steps may reference
declared values in backticks. Every backtick reference must resolve to a
declared data-flow name.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import SecotParseError

_DF_STEP = re.compile(r"^(\d+)\. ([A-Za-z_]\w*): from ([^;]+); (.*)$")
_CF_STEP = re.compile(r"^(\d+)\. (.+)$")
_BACKTICK = re.compile(r"`([A-Za-z_]\w*)`")


@dataclass(frozen=True)
class DataFlowStep:
    name: str
    source: str
    transformation: str


@dataclass(frozen=True)
class SeCoT:
    data_flow: tuple[DataFlowStep, ...]
    control_flow: tuple[str, ...]
    summary: str

    def declared_names(self) -> frozenset[str]:
        return frozenset(step.name for step in self.data_flow)


@dataclass(frozen=True)
class SecotFinding:
    code: str
    detail: str

    def __str__(self) -> str:
        return f"{self.code}: {self.detail}"


def print_secot(chain: SeCoT) -> str:
    lines = ["Data Flow:"]
    for i, step in enumerate(chain.data_flow, start=1):
        lines.append(f"{i}. {step.name}: from {step.source}; {step.transformation}")
    lines.append("Control Flow:")
    for i, text in enumerate(chain.control_flow, start=1):
        lines.append(f"{i}. {text}")
    lines.append(f"Summary: {chain.summary}")
    return "\n".join(lines) + "\n"


def parse_secot(text: str) -> SeCoT:
    lines = [ln.rstrip() for ln in text.split("\n")]
    lines = [ln for ln in lines if ln.strip()]
    pos = 0
    if pos >= len(lines) or lines[pos].strip() != "Data Flow:":
        raise SecotParseError(pos + 1, "Data Flow:")
    pos += 1
    data_flow: list[DataFlowStep] = []
    while pos < len(lines) and lines[pos].strip() != "Control Flow:":
        m = _DF_STEP.match(lines[pos].strip())
        if not m:
            raise SecotParseError(pos + 1, "data-flow step 'N. name: from source; transformation'")
        if int(m.group(1)) != len(data_flow) + 1:
            raise SecotParseError(pos + 1, f"step number {len(data_flow) + 1}")
        data_flow.append(DataFlowStep(m.group(2), m.group(3).strip(), m.group(4).strip()))
        pos += 1
    if pos >= len(lines):
        raise SecotParseError(pos + 1, "Control Flow:")
    pos += 1
    control_flow: list[str] = []
    while pos < len(lines) and not lines[pos].strip().startswith("Summary:"):
        m = _CF_STEP.match(lines[pos].strip())
        if not m:
            raise SecotParseError(pos + 1, "control-flow step 'N. description'")
        if int(m.group(1)) != len(control_flow) + 1:
            raise SecotParseError(pos + 1, f"step number {len(control_flow) + 1}")
        control_flow.append(m.group(2).strip())
        pos += 1
    if pos >= len(lines):
        raise SecotParseError(pos + 1, "Summary:")
    summary = lines[pos].strip()[len("Summary:"):].strip()
    pos += 1
    if pos != len(lines):
        raise SecotParseError(pos + 1, "end of chain")
    return SeCoT(tuple(data_flow), tuple(control_flow), summary)


def validate_secot(chain: SeCoT) -> tuple[SecotFinding, ...]:
    """Report empty flows and control-flow references to undeclared values."""
    findings: list[SecotFinding] = []
    if not chain.data_flow:
        findings.append(SecotFinding("empty-data-flow", "no data-flow steps"))
    if not chain.control_flow:
        findings.append(SecotFinding("empty-control-flow", "no control-flow steps"))
    declared = chain.declared_names()
    for i, text in enumerate(chain.control_flow, start=1):
        for name in _BACKTICK.findall(text):
            if name not in declared:
                findings.append(
                    SecotFinding("undeclared-value", f"control-flow step {i} references `{name}`")
                )
    return tuple(findings)
