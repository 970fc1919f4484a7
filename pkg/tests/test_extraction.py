"""Metadata extraction, module division, validation, refinement, approval."""
from __future__ import annotations

import json

import pytest

from paperforge.document import load_bundle
from paperforge.errors import (
    CyclicDependencies,
    RejectedRefinement,
    StageFailed,
    ValidationErrorsPresent,
)
from paperforge.extraction import (
    UNKNOWN,
    IOItem,
    ModuleDivision,
    ModuleSpec,
    SystemMetadata,
    approve_division,
    divide_modules,
    extract_metadata,
    refine_division,
    topological_order,
    validate_division,
)
from paperforge.gateway import BackendProfile, Gateway, StubBackend, TickClock
from paperforge.prompting import load_builtin_templates

from conftest import METADATA_REPLY

REGISTRY = load_builtin_templates()


def make_gateway(script) -> Gateway:
    profile = BackendProfile("stub", "stub:x", 200000, 8192)
    return Gateway(profile, backend=StubBackend.from_script(script), clock=TickClock())


def spec(name, depends_on=(), inputs=(), outputs=()):
    return ModuleSpec(
        name=name,
        brief_description=f"{name} brief",
        detailed_description=f"{name} detail",
        inputs=tuple(IOItem(n, "hint") for n in inputs),
        outputs=tuple(IOItem(n, "hint") for n in outputs),
        depends_on=tuple(depends_on),
    )


# --- extract_metadata ----------------------------------------------------------

def test_extract_metadata_from_scripted_reply(bundle_dir):
    bundle = load_bundle(bundle_dir)
    gateway = make_gateway([{"match": "Q1:", "reply": json.dumps(METADATA_REPLY)}])
    session = gateway.open_session("extract")
    metadata = extract_metadata(bundle, gateway, session, REGISTRY)
    assert metadata.sub_domain == "Network Measurement"
    assert metadata.system_name == "FlowMark"
    assert [i.name for i in metadata.system_inputs][:2] == ["flow_id", "threshold"]


def test_extract_metadata_traffic_engineering_shape(bundle_dir):
    """Classic sub-domain/system-name pairing parses into the same fields."""
    bundle = load_bundle(bundle_dir)
    reply = {
        "sub_domain": "Traffic Engineering",
        "system_name": "NCFlow",
        "problem_statement": "route flows through a contracted network",
    }
    gateway = make_gateway([{"match": "Q1:", "reply": json.dumps(reply)}])
    session = gateway.open_session("extract")
    metadata = extract_metadata(bundle, gateway, session, REGISTRY)
    assert metadata.sub_domain == "Traffic Engineering"
    assert metadata.system_name == "NCFlow"


def test_unknown_placeholder_preserved(bundle_dir):
    bundle = load_bundle(bundle_dir)
    reply = dict(METADATA_REPLY, sub_domain="UNKNOWN")
    gateway = make_gateway([{"match": "Q1:", "reply": json.dumps(reply)}])
    session = gateway.open_session("extract")
    metadata = extract_metadata(bundle, gateway, session, REGISTRY)
    assert metadata.sub_domain == UNKNOWN


def test_prose_reply_fails_after_retries(bundle_dir):
    bundle = load_bundle(bundle_dir)
    gateway = make_gateway([{"match": "", "reply": "let me think about that"}])
    session = gateway.open_session("extract")
    with pytest.raises(StageFailed) as err:
        extract_metadata(bundle, gateway, session, REGISTRY, retry_limit=3)
    assert err.value.stage == "extract"
    # initial ask + 3 automatic re-asks
    assert len(session.records) == 4


def test_metadata_fields_byte_equal_to_response(bundle_dir):
    """No invented facts: replaying the transcript reproduces every field."""
    bundle = load_bundle(bundle_dir)
    gateway = make_gateway([{"match": "Q1:", "reply": json.dumps(METADATA_REPLY)}])
    session = gateway.open_session("extract")
    metadata = extract_metadata(bundle, gateway, session, REGISTRY)
    replayed = json.loads(session.records[-1].response_text)
    assert metadata.sub_domain == replayed["sub_domain"]
    assert metadata.system_name == replayed["system_name"]
    assert metadata.problem_statement == replayed["problem_statement"]


def test_missing_optional_fields_become_unknown(bundle_dir):
    bundle = load_bundle(bundle_dir)
    reply = {
        "sub_domain": "a",
        "system_name": "b",
        "problem_statement": "c",
    }
    gateway = make_gateway([{"match": "Q1:", "reply": json.dumps(reply)}])
    session = gateway.open_session("extract")
    metadata = extract_metadata(bundle, gateway, session, REGISTRY)
    assert metadata.deployment_type == UNKNOWN
    assert metadata.system_inputs == ()
    assert any("deployment_type" in f for f in metadata.flags)


# --- divide_modules ---------------------------------------------------------------

def fixture_metadata() -> SystemMetadata:
    return SystemMetadata.from_dict(
        dict(METADATA_REPLY, flags=[])
    )


def test_divide_modules_chain_dependencies(bundle_dir):
    bundle = load_bundle(bundle_dir)
    reply = {
        "modules": [
            {"name": "a", "outputs": [{"name": "x"}]},
            {"name": "b", "depends_on": ["a"], "inputs": [{"name": "x"}]},
            {"name": "c", "depends_on": ["b"]},
        ]
    }
    gateway = make_gateway([{"match": "functional modules", "reply": json.dumps(reply)}])
    session = gateway.open_session("extract")
    division = divide_modules(bundle, fixture_metadata(), gateway, session, REGISTRY)
    assert [m.name for m in division.modules] == ["a", "b", "c"]
    assert division.revision == 1 and not division.approved


def test_divide_modules_rejects_cycles(bundle_dir):
    bundle = load_bundle(bundle_dir)
    reply = {
        "modules": [
            {"name": "a", "depends_on": ["b"]},
            {"name": "b", "depends_on": ["a"]},
        ]
    }
    gateway = make_gateway([{"match": "functional modules", "reply": json.dumps(reply)}])
    session = gateway.open_session("extract")
    with pytest.raises(CyclicDependencies):
        divide_modules(bundle, fixture_metadata(), gateway, session, REGISTRY)


def test_divide_modules_missing_outputs_flagged(bundle_dir):
    bundle = load_bundle(bundle_dir)
    reply = {"modules": [{"name": "a", "inputs": [{"name": "x"}]}]}
    gateway = make_gateway([{"match": "functional modules", "reply": json.dumps(reply)}])
    session = gateway.open_session("extract")
    division = divide_modules(bundle, fixture_metadata(), gateway, session, REGISTRY)
    module = division.modules[0]
    assert module.outputs == (IOItem(UNKNOWN, UNKNOWN),)
    assert any("outputs missing" in f for f in module.flags)


# --- validate_division ---------------------------------------------------------------

def test_validate_clean_division():
    division = ModuleDivision(
        modules=(
            spec("a", outputs=("x",)),
            spec("b", depends_on=("a",), inputs=("x",)),
        )
    )
    report = validate_division(division)
    assert report.ok and report.warnings == ()


def test_validate_dangling_dependency():
    division = ModuleDivision(modules=(spec("a", depends_on=("ghost",)),))
    report = validate_division(division)
    assert any(f.code == "dangling-dependency" for f in report.errors)


def test_validate_name_collision():
    division = ModuleDivision(modules=(spec("a"), spec("a")))
    report = validate_division(division)
    assert any(f.code == "name-collision" for f in report.errors)


def test_validate_io_closure_warning():
    division = ModuleDivision(modules=(spec("a", inputs=("topology",)),))
    report = validate_division(division)
    assert report.ok  # warning, not error
    assert any(f.code == "io-closure" and "topology" in f.detail for f in report.warnings)


def test_io_closure_satisfied_by_system_inputs():
    division = ModuleDivision(modules=(spec("a", inputs=("topology",)),))
    report = validate_division(division, system_inputs=(IOItem("topology", "graph"),))
    assert report.warnings == ()


def test_unknown_inputs_skip_closure():
    division = ModuleDivision(
        modules=(ModuleSpec(name="a", inputs=(IOItem(UNKNOWN, UNKNOWN),)),)
    )
    assert validate_division(division).warnings == ()


# --- refine / approve ------------------------------------------------------------------

def test_refine_division_increments_revision(bundle_dir):
    division = ModuleDivision(modules=(spec("a"), spec("b")))
    merged = {"modules": [{"name": "ab", "brief_description": "merged"}]}
    gateway = make_gateway([{"match": "[REVIEWER FEEDBACK]", "reply": json.dumps(merged)}])
    session = gateway.open_session("extract")
    refined = refine_division(division, "merge modules a and b", gateway, session, REGISTRY)
    assert [m.name for m in refined.modules] == ["ab"]
    assert refined.revision == 2
    assert session.records[0].origin == "Human"


def test_refine_requires_feedback():
    division = ModuleDivision(modules=(spec("a"),))
    gateway = make_gateway([])
    with pytest.raises(RejectedRefinement):
        refine_division(division, "   ", gateway, gateway.open_session("x"), REGISTRY)


def test_refine_rejected_on_approved():
    division = ModuleDivision(modules=(spec("a"),), approved=True)
    gateway = make_gateway([])
    with pytest.raises(RejectedRefinement):
        refine_division(division, "split a", gateway, gateway.open_session("x"), REGISTRY)


def test_approve_valid_division():
    division = ModuleDivision(modules=(spec("a"),))
    approved = approve_division(division, actor="reviewer")
    assert approved.approved


def test_approve_blocks_on_errors():
    division = ModuleDivision(modules=(spec("a", depends_on=("ghost",)),))
    with pytest.raises(ValidationErrorsPresent):
        approve_division(division, actor="reviewer")


def test_reapprove_is_idempotent():
    division = ModuleDivision(modules=(spec("a"),), approved=True)
    assert approve_division(division, actor="again") is division


# --- ordering -----------------------------------------------------------------------------

def test_topological_order_with_ties_by_division_order():
    division = ModuleDivision(
        modules=(
            spec("late", depends_on=("base",)),
            spec("base"),
            spec("also-early"),
        )
    )
    ordered = [m.name for m in topological_order(division)]
    assert ordered == ["base", "also-early", "late"]
