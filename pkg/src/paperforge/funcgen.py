"""Stage 3: per-function semantic chains, implementations, and test cases.

Each placeholder function is handled in two prompting phases that share
one template: first the semantic reasoning chain (data flow + control
flow), then the implementation guided by that chain. Test cases are a
third rendering with a strict-JSON contract. The implementation must keep
the framework signature byte-for-byte (after whitespace normalization);
anything else is signature drift and is rejected.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import ContractViolation, SignatureDrift, UnfilledPlaceholders
from .extraction import UNKNOWN, IOItem, ModuleSpec
from .gateway import Gateway, Session
from .prompting import (
    SECOT_TRIPLET,
    CodeBlock,
    ExemplarStore,
    StrictJson,
    TemplateRegistry,
    format_exemplars,
    parse_contract,
)
from .sandbox import ToolchainConfig
from .scaffold import (
    FILL_MARKER,
    IMPLEMENTED,
    PLACEHOLDER,
    BuildResult,
    CodeUnit,
    FunctionDecl,
    _ask_until,
    compile_check,
    normalize_signature,
    parse_python_functions,
    render_implemented,
    render_placeholder,
    replace_function,
)
from .secot import SeCoT, print_secot, validate_secot

TASK_SECOT = (
    "Produce the semantic reasoning chain for the function: trace the data "
    "flow (each value, its source, its transformation) and the control flow "
    "(operation order, branches, loops). Reply in the chain format shown in "
    "the examples, and nothing else."
)
TASK_CODE = (
    "Implement the function following the reasoning chain in the context. "
    "Keep the given signature exactly. Reply with one fenced code block "
    "containing only the function."
)
TASK_TESTS = (
    "Produce test cases for the function. Each case gives literal argument "
    "values matching the signature arity and the expected output. Reply "
    'with a single JSON object {"cases": [{"name": "...", "input": [...], '
    '"expected": {"literal": "..."}}]} and nothing else. Use '
    '{"predicate": "..."} only when the expectation cannot be a literal.'
)

GENERATED = "Generated"
MANUAL = "Manual"


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class, despite the name

    name: str
    module: str
    function: str
    input: tuple
    expected_literal: str | None = None
    expected_predicate: str | None = None
    kind: str = GENERATED

    def to_dict(self) -> dict:
        expected = (
            {"literal": self.expected_literal}
            if self.expected_literal is not None
            else {"predicate": self.expected_predicate}
        )
        return {
            "name": self.name,
            "module": self.module,
            "function": self.function,
            "input": list(self.input),
            "expected": expected,
            "kind": self.kind,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TestCase":
        expected = data["expected"]
        return cls(
            name=data["name"],
            module=data["module"],
            function=data["function"],
            input=tuple(data["input"]),
            expected_literal=expected.get("literal"),
            expected_predicate=expected.get("predicate"),
            kind=data.get("kind", GENERATED),
        )


def save_test_cases(cases: list[TestCase], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps({"cases": [c.to_dict() for c in cases]}, indent=2, sort_keys=True) + "\n",
        "utf-8",
    )


def load_test_cases(path: str | Path) -> list[TestCase]:
    payload = json.loads(Path(path).read_text("utf-8"))
    return [TestCase.from_dict(c) for c in payload["cases"]]


# --- operations -------------------------------------------------------------------

def _function_requirement(decl: FunctionDecl, spec: ModuleSpec | None) -> str:
    if decl.requirement and decl.requirement != UNKNOWN:
        return decl.requirement
    if spec is not None:
        return f"{spec.brief_description} (function {decl.name})"
    return f"implement {decl.name}"


def generate_secot(
    decl: FunctionDecl,
    gateway: Gateway,
    session: Session,
    registry: TemplateRegistry,
    exemplars: ExemplarStore,
    spec: ModuleSpec | None = None,
    k: int = 2,
    retry_limit: int = 3,
    preventive_guidelines: str = "",
) -> SeCoT:
    """Phase 1: semantic chain for one placeholder function."""
    prompt = registry.render(
        "T6",
        {
            "TASK": TASK_SECOT,
            "REQUIREMENT": _function_requirement(decl, spec),
            "SIGNATURE": decl.signature,
            "CONTEXT": decl.original_text or "",
            "EXEMPLARS": format_exemplars(exemplars.select(SECOT_TRIPLET, k)),
            "PREVENTIVE_GUIDELINES": preventive_guidelines,
        },
    )
    contract = registry.get("T6").contract

    def parse(raw: str) -> SeCoT:
        chain = parse_contract(contract, raw)
        findings = validate_secot(chain)
        if findings:
            raise ContractViolation("; ".join(str(f) for f in findings))
        return chain

    return _ask_until(gateway, session, prompt, parse, retry_limit, "secot", decl.name)


def generate_function(
    decl: FunctionDecl,
    chain: SeCoT,
    gateway: Gateway,
    session: Session,
    registry: TemplateRegistry,
    exemplars: ExemplarStore,
    language: str = "python",
    spec: ModuleSpec | None = None,
    k: int = 2,
    retry_limit: int = 3,
    preventive_guidelines: str = "",
) -> FunctionDecl:
    """Phase 2: implementation for one placeholder function.

    The returned declaration is Implemented and carries the body source;
    splicing into the unit happens at integrate. A response whose matching
    function changes the signature raises SignatureDrift; extra functions
    in the response are flagged, not accepted.
    """
    prompt = registry.render(
        "T6",
        {
            "TASK": TASK_CODE,
            "REQUIREMENT": _function_requirement(decl, spec),
            "SIGNATURE": decl.signature,
            "CONTEXT": print_secot(chain).rstrip(),
            "EXEMPLARS": format_exemplars(exemplars.select(SECOT_TRIPLET, k)),
            "PREVENTIVE_GUIDELINES": preventive_guidelines,
        },
    )
    contract = CodeBlock(language)

    def parse(raw: str) -> FunctionDecl:
        code = parse_contract(contract, raw)
        functions = parse_python_functions(code)
        if not functions:
            raise ContractViolation("response defines no function")
        match = [fn for fn in functions if fn.name == decl.name]
        if not match:
            if len(functions) == 1:
                raise SignatureDrift(decl.signature, functions[0].signature)
            raise ContractViolation(
                f"response defines {[f.name for f in functions]} but not {decl.name}"
            )
        fn = match[0]
        if normalize_signature(fn.signature) != normalize_signature(decl.signature):
            raise SignatureDrift(decl.signature, fn.signature)
        flags = decl.review_flags
        if len(functions) > 1:
            extra = [f.name for f in functions if f.name != decl.name]
            flags = flags + (f"extra functions ignored: {', '.join(extra)}",)
        return replace(
            decl,
            body_kind=IMPLEMENTED,
            body_source="\n".join(fn.body_lines),
            review_flags=flags,
        )

    return _ask_until(gateway, session, prompt, parse, retry_limit, "funcgen", decl.name)


# --- I/O compliance ----------------------------------------------------------------

_TYPE_SYNONYMS = {
    "list": ("array", "sequence", "vector", "series"),
    "dict": ("map", "mapping", "table", "record"),
    "str": ("string", "text", "name", "identifier"),
    "int": ("integer", "count", "index", "number"),
    "float": ("real", "double", "fraction", "rate", "number"),
    "bool": ("boolean", "flag", "verdict", "decision"),
}


def _type_tokens(text: str) -> set[str]:
    tokens = set()
    for raw in text.lower().replace("[", " ").replace("]", " ").split():
        token = raw.strip(",;:()")
        if not token:
            continue
        tokens.add(token)
        for base, synonyms in _TYPE_SYNONYMS.items():
            if token == base or token in synonyms:
                tokens.add(base)
    return tokens


def _compatible(hint: str, annotation: str) -> bool:
    """Heuristic semantic-type compatibility: shared token after synonym
    expansion, or one description containing the other."""
    hint_l, ann_l = hint.lower().strip(), annotation.lower().strip()
    if not hint_l or not ann_l:
        return True
    if hint_l in ann_l or ann_l in hint_l:
        return True
    return bool(_type_tokens(hint_l) & _type_tokens(ann_l))


@dataclass(frozen=True)
class ComplianceFinding:
    code: str
    detail: str

    def __str__(self) -> str:
        return f"{self.code}: {self.detail}"


def check_io_compliance(decl: FunctionDecl, spec: ModuleSpec) -> tuple[ComplianceFinding, ...]:
    """Advisory comparison of declared types against the module's I/O hints.

    UNKNOWN hints are vacuously compliant and noted as such.
    """
    findings: list[ComplianceFinding] = []
    hints_by_name = {item.name.lower(): item for item in spec.inputs}
    for param_name, annotation in decl.params:
        item = hints_by_name.get(param_name.lower())
        if item is None:
            continue
        if item.hint == UNKNOWN or item.name == UNKNOWN:
            findings.append(
                ComplianceFinding("unknown-hint", f"{decl.name}.{param_name}: hint is UNKNOWN")
            )
            continue
        if not _compatible(item.hint, annotation):
            findings.append(
                ComplianceFinding(
                    "type-mismatch",
                    f"{decl.name}.{param_name}: hint {item.hint!r} vs annotation {annotation!r}",
                )
            )
    if spec.outputs:
        out: IOItem = spec.outputs[0]
        if out.hint == UNKNOWN or out.name == UNKNOWN:
            findings.append(
                ComplianceFinding("unknown-hint", f"{decl.name} return: hint is UNKNOWN")
            )
        elif not _compatible(out.hint, decl.return_type):
            findings.append(
                ComplianceFinding(
                    "type-mismatch",
                    f"{decl.name} return: hint {out.hint!r} vs annotation {decl.return_type!r}",
                )
            )
    return tuple(findings)


# --- test generation -----------------------------------------------------------------

def generate_tests(
    decl: FunctionDecl,
    module_name: str,
    gateway: Gateway,
    session: Session,
    registry: TemplateRegistry,
    exemplars: ExemplarStore,
    spec: ModuleSpec | None = None,
    k: int = 2,
    retry_limit: int = 3,
) -> list[TestCase]:
    """Phase 3: generated test cases, arity-checked against the signature.

    Cases with wrong arity are rejected individually; an entirely empty or
    unusable response is re-asked.
    """
    prompt = registry.render(
        "T6",
        {
            "TASK": TASK_TESTS,
            "REQUIREMENT": _function_requirement(decl, spec),
            "SIGNATURE": decl.signature,
            "CONTEXT": "",
            "EXEMPLARS": format_exemplars(exemplars.select(SECOT_TRIPLET, k)),
            "PREVENTIVE_GUIDELINES": "",
        },
    )
    arity = len(decl.params)

    def parse(raw: str) -> list[TestCase]:
        payload = parse_contract(StrictJson("test_cases"), raw)
        kept: list[TestCase] = []
        for entry in payload["cases"]:
            if len(entry["input"]) != arity:
                continue  # arity mismatch: reject the case, keep the rest
            expected = entry["expected"]
            kept.append(
                TestCase(
                    name=entry["name"],
                    module=module_name,
                    function=decl.name,
                    input=tuple(entry["input"]),
                    expected_literal=expected.get("literal"),
                    expected_predicate=expected.get("predicate"),
                    kind=GENERATED,
                )
            )
        if not kept:
            raise ContractViolation("no case matches the function arity")
        return kept

    return _ask_until(gateway, session, prompt, parse, retry_limit, "tests", decl.name)


# --- integration ------------------------------------------------------------------------

def integrate(
    unit: CodeUnit,
    impls: dict[str, FunctionDecl],
    toolchain: ToolchainConfig,
    waivers: tuple[str, ...] = (),
    workdir: str | Path | None = None,
) -> tuple[CodeUnit, BuildResult]:
    """Splice implementations into the unit and verify it builds.

    Every placeholder needs an implementation or an explicit waiver;
    afterwards no fill marker may remain anywhere. Raises
    UnfilledPlaceholders or returns the BuildResult for the repair stage
    to act on.
    """
    missing = tuple(
        decl.name
        for decl in unit.functions
        if decl.body_kind == PLACEHOLDER and decl.name not in impls and decl.name not in waivers
    )
    if missing:
        raise UnfilledPlaceholders(missing)

    path = unit.main_file()
    text = unit.file_text(path)
    for decl in unit.functions:
        if decl.name in impls:
            impl = impls[decl.name]
            if normalize_signature(impl.signature) != normalize_signature(decl.signature):
                raise SignatureDrift(decl.signature, impl.signature)
            unit = unit.with_function(impl)
            text = replace_function(text, decl.name, render_implemented(impl))
        elif decl.name in waivers:
            waived = replace(decl, review_flags=decl.review_flags + ("waived-placeholder",))
            unit = unit.with_function(waived)
            waived_text = render_placeholder(waived).replace(
                FILL_MARKER, "# placeholder accepted by human waiver"
            )
            text = replace_function(text, decl.name, waived_text)
    unit = unit.with_file_text(path, text)

    leftovers = tuple(
        p for p, file_text in unit.files if FILL_MARKER in file_text
    )
    if leftovers:
        raise UnfilledPlaceholders(leftovers)

    build = compile_check(unit, toolchain, workdir)
    return unit, build
