"""Chain generation, skeleton normalization, paper mapping, build checks."""
from __future__ import annotations

import json

import pytest

from paperforge.document import load_bundle
from paperforge.errors import RejectedUnit, StageFailed
from paperforge.extraction import ModuleSpec
from paperforge.gateway import BackendProfile, Gateway, StubBackend, TickClock
from paperforge.prompting import load_builtin_exemplars, load_builtin_templates
from paperforge.sandbox import default_python_toolchain
from paperforge.scaffold import (
    FILL_MARKER,
    PLACEHOLDER,
    CodeUnit,
    FunctionDecl,
    compile_check,
    default_return,
    generate_framework,
    generate_scot,
    map_paper_content,
    normalize_signature,
    parse_python_functions,
    render_placeholder,
    replace_function,
)
from paperforge.scot import Cond, Loop, Seq, Step

from conftest import (
    DIVISION_REPLY,
    HASH_QUOTE,
    SAMPLE_QUOTE,
    SAMPLER_SCOT,
    SAMPLER_SKELETON,
)

REGISTRY = load_builtin_templates()
EXEMPLARS = load_builtin_exemplars()
TOOLCHAIN = default_python_toolchain()

SAMPLER_SPEC = ModuleSpec.from_dict(DIVISION_REPLY["modules"][0])


def make_gateway(script) -> Gateway:
    profile = BackendProfile("stub", "stub:x", 200000, 8192)
    return Gateway(profile, backend=StubBackend.from_script(script), clock=TickClock())


# --- generate_scot -----------------------------------------------------------------

def test_generate_scot_parses_and_validates():
    gateway = make_gateway([{"match": "structured pseudo-code chain", "reply": SAMPLER_SCOT}])
    session = gateway.open_session("scaffold")
    chain = generate_scot(SAMPLER_SPEC, gateway, session, REGISTRY, EXEMPLARS)
    kinds = {type(n) for n in chain.body.children}
    assert kinds <= {Step, Cond, Loop, Seq}
    assert chain.io.output is not None


def test_generate_scot_reasks_on_forbidden_construct():
    bad = "Input: none\nOutput: none\n1. Step: recurse until done\n"
    gateway = make_gateway(
        [
            {"match": "rejected", "reply": SAMPLER_SCOT},  # retry prompt mentions rejection
            {"match": "structured pseudo-code chain", "reply": bad},
        ]
    )
    session = gateway.open_session("scaffold")
    chain = generate_scot(SAMPLER_SPEC, gateway, session, REGISTRY, EXEMPLARS)
    assert len(session.records) == 2  # one re-ask
    assert chain.io.inputs


def test_generate_scot_fails_when_violation_persists():
    bad = "Input: none\nOutput: none\n1. Step: goto cleanup\n"
    gateway = make_gateway([{"match": "", "reply": bad}])
    session = gateway.open_session("scaffold")
    with pytest.raises(StageFailed) as err:
        generate_scot(SAMPLER_SPEC, gateway, session, REGISTRY, EXEMPLARS, retry_limit=2)
    assert err.value.stage == "scot"
    assert len(session.records) == 3


def test_generate_scot_reasks_when_output_declaration_missing():
    no_output = "Input: x: int\n1. Step: go\n"
    gateway = make_gateway(
        [
            {"match": "rejected", "reply": SAMPLER_SCOT},
            {"match": "structured pseudo-code chain", "reply": no_output},
        ]
    )
    session = gateway.open_session("scaffold")
    chain = generate_scot(SAMPLER_SPEC, gateway, session, REGISTRY, EXEMPLARS)
    assert chain.io.output is not None
    assert len(session.records) == 2


# --- generate_framework ----------------------------------------------------------------

def scot_fixture():
    gateway = make_gateway([{"match": "", "reply": SAMPLER_SCOT}])
    return generate_scot(
        SAMPLER_SPEC, gateway, gateway.open_session("scaffold"), REGISTRY, EXEMPLARS
    )


def test_generate_framework_normalizes_placeholders():
    chain = scot_fixture()
    gateway = make_gateway([{"match": "code skeleton", "reply": SAMPLER_SKELETON}])
    session = gateway.open_session("scaffold")
    unit = generate_framework(
        SAMPLER_SPEC, chain, gateway, session, REGISTRY, EXEMPLARS, TOOLCHAIN
    )
    assert [f.name for f in unit.functions] == ["hash_flow", "should_sample"]
    assert all(f.body_kind == PLACEHOLDER for f in unit.functions)
    text = unit.file_text("packet_sampler.py")
    assert text.count(FILL_MARKER) == 2
    assert "FNV_OFFSET = 2166136261" in text  # module-level code preserved


def test_generate_framework_reasks_without_functions():
    chain = scot_fixture()
    gateway = make_gateway(
        [
            {"match": "rejected", "reply": SAMPLER_SKELETON},
            {"match": "code skeleton", "reply": "```python\nx = 1\n```"},
        ]
    )
    session = gateway.open_session("scaffold")
    unit = generate_framework(
        SAMPLER_SPEC, chain, gateway, session, REGISTRY, EXEMPLARS, TOOLCHAIN
    )
    assert len(session.records) == 2
    assert unit.functions


def test_generate_framework_reasks_on_missing_return_type():
    chain = scot_fixture()
    untyped = "```python\ndef f(x: int):\n    return x\n```"
    gateway = make_gateway(
        [
            {"match": "rejected", "reply": SAMPLER_SKELETON},
            {"match": "code skeleton", "reply": untyped},
        ]
    )
    session = gateway.open_session("scaffold")
    unit = generate_framework(
        SAMPLER_SPEC, chain, gateway, session, REGISTRY, EXEMPLARS, TOOLCHAIN
    )
    assert len(session.records) == 2
    assert all(f.return_type for f in unit.functions)


# --- map_paper_content -------------------------------------------------------------------

def framework_fixture() -> CodeUnit:
    chain = scot_fixture()
    gateway = make_gateway([{"match": "", "reply": SAMPLER_SKELETON}])
    return generate_framework(
        SAMPLER_SPEC, chain, gateway, gateway.open_session("scaffold"),
        REGISTRY, EXEMPLARS, TOOLCHAIN,
    )


def test_map_paper_content_verifies_true_quotes(bundle_dir):
    bundle = load_bundle(bundle_dir)
    unit = framework_fixture()
    gateway = make_gateway(
        [
            {
                "regex": "(?s)Map the function below.*def hash_flow",
                "reply": json.dumps({"requirement": "hash it", "original_text": HASH_QUOTE}),
            },
            {
                "regex": "(?s)Map the function below.*def should_sample",
                "reply": json.dumps({"requirement": "gate it", "original_text": SAMPLE_QUOTE}),
            },
        ]
    )
    session = gateway.open_session("scaffold")
    annotated = map_paper_content(unit, SAMPLER_SPEC, bundle, gateway, session, REGISTRY)
    assert all(f.verified for f in annotated.functions)
    text = annotated.file_text("packet_sampler.py")
    assert "# [ORIGINAL TEXT] " + HASH_QUOTE in text
    assert "# [VERIFIED] yes" in text


def test_map_paper_content_flags_paraphrase(bundle_dir):
    bundle = load_bundle(bundle_dir)
    unit = framework_fixture()
    paraphrase = "the sampler hashes flows and compares against a cutoff"
    gateway = make_gateway(
        [
            {
                "regex": "(?s)Map the function below.*def hash_flow",
                "reply": json.dumps({"requirement": "hash it", "original_text": HASH_QUOTE}),
            },
            {
                "regex": "(?s)Map the function below.*def should_sample",
                "reply": json.dumps({"requirement": "gate it", "original_text": paraphrase}),
            },
        ]
    )
    session = gateway.open_session("scaffold")
    annotated = map_paper_content(unit, SAMPLER_SPEC, bundle, gateway, session, REGISTRY)
    by_name = {f.name: f for f in annotated.functions}
    assert by_name["hash_flow"].verified
    assert not by_name["should_sample"].verified
    assert "unverified-quote" in by_name["should_sample"].review_flags
    assert "# [VERIFIED] no" in annotated.file_text("packet_sampler.py")


def test_annotation_comment_block_format(bundle_dir):
    """The structured comment block layout is pinned."""
    decl = FunctionDecl(
        name="f",
        signature="def f(x: int) -> int",
        params=(("x", "int"),),
        return_type="int",
        requirement="compute the thing",
        original_text="the thing is computed",
        verified=True,
    )
    assert render_placeholder(decl) == (
        "def f(x: int) -> int:\n"
        "    # [REQUIREMENT] compute the thing\n"
        "    # [ORIGINAL TEXT] the thing is computed\n"
        "    # [VERIFIED] yes\n"
        "    # [FILL]\n"
        "    return 0"
    )


# --- compile_check / helpers ----------------------------------------------------------------

def test_compile_check_placeholder_unit_passes():
    unit = framework_fixture()
    result = compile_check(unit, TOOLCHAIN)
    assert result.ok


def test_compile_check_reports_broken_unit(tmp_path):
    unit = framework_fixture()
    unit = unit.with_file_text("packet_sampler.py", "def broken(:\n")
    result = compile_check(unit, TOOLCHAIN, tmp_path)
    assert not result.ok


def test_compile_check_rejects_empty_unit():
    unit = CodeUnit("empty", "python", (), ())
    with pytest.raises(RejectedUnit):
        compile_check(unit, TOOLCHAIN)


def test_parse_python_functions_signatures():
    fns = parse_python_functions(
        "def f(a: int, b: list) -> dict:\n    return {}\n"
    )
    assert fns[0].signature == "def f(a: int, b: list) -> dict"
    assert fns[0].params == (("a", "int"), ("b", "list"))


def test_replace_function_swaps_only_target():
    source = "def a() -> int:\n    return 1\n\ndef b() -> int:\n    return 2\n"
    swapped = replace_function(source, "a", "def a() -> int:\n    return 9")
    assert "return 9" in swapped and "return 2" in swapped


def test_default_returns_by_annotation():
    assert default_return("int") == "0"
    assert default_return("list of flows") == "[]"
    assert default_return("dict") == "{}"
    assert default_return("Mystery") == "None"


def test_normalize_signature_ignores_whitespace():
    assert normalize_signature("def f( a: int ) -> str:") == normalize_signature(
        "def f(a: int) -> str"
    )
