"""Semantic-chain grammar: parser, printer, cross-reference validator."""
from __future__ import annotations

import pytest

from paperforge.errors import SecotParseError
from paperforge.secot import DataFlowStep, parse_secot, print_secot, validate_secot

CHAIN = """\
Data Flow:
1. xs: from parameter `xs`; raw samples
2. total: from step 1; running sum
Control Flow:
1. iterate over `xs` once accumulating `total`
2. return `total` divided by the length
Summary: single-pass mean
"""


def test_parse_and_roundtrip():
    chain = parse_secot(CHAIN)
    assert chain.data_flow == (
        DataFlowStep("xs", "parameter `xs`", "raw samples"),
        DataFlowStep("total", "step 1", "running sum"),
    )
    assert len(chain.control_flow) == 2
    assert chain.summary == "single-pass mean"
    assert print_secot(chain) == CHAIN


def test_missing_control_flow_header():
    with pytest.raises(SecotParseError):
        parse_secot("Data Flow:\n1. x: from p; y\nSummary: no control\n")


def test_bad_data_flow_step_shape():
    with pytest.raises(SecotParseError):
        parse_secot("Data Flow:\n1. not a step\nControl Flow:\n1. ok\nSummary: s\n")


def test_validator_accepts_declared_references():
    assert validate_secot(parse_secot(CHAIN)) == ()


def test_validator_flags_undeclared_reference():
    chain = parse_secot(
        "Data Flow:\n1. xs: from parameter `xs`; raw\n"
        "Control Flow:\n1. push into `tmp`\nSummary: s\n"
    )
    findings = validate_secot(chain)
    assert any(f.code == "undeclared-value" and "`tmp`" in f.detail for f in findings)


def test_validator_flags_empty_flows():
    chain = parse_secot("Data Flow:\nControl Flow:\nSummary: s\n")
    codes = {f.code for f in validate_secot(chain)}
    assert codes == {"empty-data-flow", "empty-control-flow"}
