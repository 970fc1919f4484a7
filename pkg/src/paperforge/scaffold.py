"""Stage 2: per-module reasoning chain, code skeleton, and paper mapping.

The skeleton convention: every generated function keeps its explicit
typed signature and gets a canonical placeholder body holding an
annotation comment block plus a fill marker::

    def f(x: int) -> int:
        # [REQUIREMENT] pending
        # [FILL]
        return 0

The ``# [FILL]`` marker is how the function-generation stage locates fill
sites; the annotation block carries the requirement and the verified
paper quote once content mapping has run. A unit leaves this stage only
if it compiles.
"""
from __future__ import annotations

import ast
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path

from .document import PaperBundle, SectionKind, find_verbatim, normalize_whitespace
from .errors import ContractViolation, RejectedUnit, StageFailed
from .extraction import UNKNOWN, ModuleSpec, send_with_contract
from .gateway import Gateway, Session
from .prompting import (
    SCOT_TRIPLET,
    CodeBlock,
    ExemplarStore,
    StrictJson,
    TemplateRegistry,
    format_exemplars,
    parse_contract,
)
from .sandbox import ExecutionReport, ToolchainConfig, compile_workspace
from .scot import SCoT, print_scot, validate_scot

FILL_MARKER = "# [FILL]"

PLACEHOLDER = "Placeholder"
IMPLEMENTED = "Implemented"


@dataclass(frozen=True)
class FunctionDecl:
    name: str
    signature: str  # canonical "def name(params) -> ret" header text
    params: tuple[tuple[str, str], ...]  # (name, annotation)
    return_type: str
    body_kind: str = PLACEHOLDER
    body_source: str = ""  # implementation body lines, filled by funcgen
    requirement: str | None = None
    original_text: str | None = None
    verified: bool | None = None
    review_flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "signature": self.signature,
            "params": [list(p) for p in self.params],
            "return_type": self.return_type,
            "body_kind": self.body_kind,
            "body_source": self.body_source,
            "requirement": self.requirement,
            "original_text": self.original_text,
            "verified": self.verified,
            "review_flags": list(self.review_flags),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FunctionDecl":
        return cls(
            name=data["name"],
            signature=data["signature"],
            params=tuple((p[0], p[1]) for p in data["params"]),
            return_type=data["return_type"],
            body_kind=data["body_kind"],
            body_source=data.get("body_source", ""),
            requirement=data.get("requirement"),
            original_text=data.get("original_text"),
            verified=data.get("verified"),
            review_flags=tuple(data.get("review_flags", ())),
        )


@dataclass(frozen=True)
class CodeUnit:
    module_name: str
    language: str
    files: tuple[tuple[str, str], ...]
    functions: tuple[FunctionDecl, ...]

    def file_text(self, path: str) -> str:
        for p, text in self.files:
            if p == path:
                return text
        raise KeyError(path)

    def main_file(self) -> str:
        return self.files[0][0]

    def function(self, name: str) -> FunctionDecl:
        for decl in self.functions:
            if decl.name == name:
                return decl
        raise KeyError(name)

    def with_file_text(self, path: str, text: str) -> "CodeUnit":
        files = tuple((p, text if p == path else t) for p, t in self.files)
        return replace(self, files=files)

    def with_function(self, decl: FunctionDecl) -> "CodeUnit":
        functions = tuple(decl if f.name == decl.name else f for f in self.functions)
        return replace(self, functions=functions)

    def to_dict(self) -> dict:
        return {
            "module_name": self.module_name,
            "language": self.language,
            "files": [list(f) for f in self.files],
            "functions": [f.to_dict() for f in self.functions],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CodeUnit":
        return cls(
            module_name=data["module_name"],
            language=data["language"],
            files=tuple((f[0], f[1]) for f in data["files"]),
            functions=tuple(FunctionDecl.from_dict(f) for f in data["functions"]),
        )


@dataclass(frozen=True)
class BuildResult:
    ok: bool
    report: ExecutionReport


# --- python source analysis -----------------------------------------------------

_DEFAULT_RETURNS = (
    ("int", "0"),
    ("float", "0.0"),
    ("str", "''"),
    ("bool", "False"),
    ("list", "[]"),
    ("dict", "{}"),
    ("map", "{}"),
    ("tuple", "()"),
    ("set", "set()"),
    ("none", "None"),
)


def default_return(annotation: str) -> str:
    """Neutral default literal for a semantic return annotation."""
    lowered = annotation.strip().lower()
    for prefix, literal in _DEFAULT_RETURNS:
        if lowered.startswith(prefix):
            return literal
    return "None"


def normalize_signature(sig: str) -> str:
    """Whitespace-insensitive comparison form of a signature."""
    return normalize_whitespace(sig).rstrip(":").replace(" ", "")


def _canonical_signature(node: ast.FunctionDef) -> str:
    args = ast.unparse(node.args)
    suffix = f" -> {ast.unparse(node.returns)}" if node.returns else ""
    return f"def {node.name}({args}){suffix}"


@dataclass(frozen=True)
class ParsedFunction:
    name: str
    signature: str
    params: tuple[tuple[str, str], ...]
    return_type: str | None
    body_lines: tuple[str, ...]
    missing_annotations: tuple[str, ...]


def _body_lines(source: str, node: ast.FunctionDef) -> tuple[str, ...]:
    lines = source.split("\n")
    first = node.body[0]
    line = lines[first.lineno - 1]
    leading = len(line) - len(line.lstrip())
    if first.col_offset > leading:
        # body shares the header's closing line: regenerate canonically
        unparsed = ast.unparse(node).split("\n")
        while unparsed and not unparsed[0].lstrip().startswith("def "):
            unparsed.pop(0)  # drop decorators
        return tuple(unparsed[1:])
    return tuple(lines[first.lineno - 1 : node.end_lineno])


def parse_python_functions(source: str) -> tuple[ParsedFunction, ...]:
    """Extract top-level function declarations from python source."""
    try:
        tree = ast.parse(source)
    except SyntaxError as exc:
        raise ContractViolation(f"code does not parse: {exc}") from exc
    found = []
    for node in tree.body:
        if not isinstance(node, ast.FunctionDef):
            continue
        params = []
        missing = []
        for arg in node.args.args:
            annotation = ast.unparse(arg.annotation) if arg.annotation else ""
            if not annotation:
                missing.append(arg.arg)
            params.append((arg.arg, annotation))
        found.append(
            ParsedFunction(
                name=node.name,
                signature=_canonical_signature(node),
                params=tuple(params),
                return_type=ast.unparse(node.returns) if node.returns else None,
                body_lines=_body_lines(source, node),
                missing_annotations=tuple(missing),
            )
        )
    return tuple(found)


def _annotation_block(decl: FunctionDecl) -> list[str]:
    requirement = normalize_whitespace(decl.requirement or "pending")
    lines = [f"    # [REQUIREMENT] {requirement}"]
    if decl.original_text is not None:
        lines.append(f"    # [ORIGINAL TEXT] {normalize_whitespace(decl.original_text)}")
        lines.append(f"    # [VERIFIED] {'yes' if decl.verified else 'no'}")
    return lines


def render_placeholder(decl: FunctionDecl) -> str:
    lines = [f"{decl.signature}:"]
    lines.extend(_annotation_block(decl))
    lines.append(f"    {FILL_MARKER}")
    lines.append(f"    return {default_return(decl.return_type)}")
    return "\n".join(lines)


def render_implemented(decl: FunctionDecl) -> str:
    """Annotation block followed by the implementation body."""
    lines = [f"{decl.signature}:"]
    lines.extend(_annotation_block(decl))
    lines.append(decl.body_source.rstrip("\n"))
    return "\n".join(lines)


def _function_region(source: str, name: str) -> tuple[int, int]:
    """(start, end) line span (0-based, end-exclusive) of a def in source."""
    tree = ast.parse(source)
    for node in tree.body:
        if isinstance(node, ast.FunctionDef) and node.name == name:
            return node.lineno - 1, node.end_lineno
    raise KeyError(name)


def replace_function(source: str, name: str, new_text: str) -> str:
    start, end = _function_region(source, name)
    lines = source.split("\n")
    return "\n".join(lines[:start] + new_text.split("\n") + lines[end:])


def _unit_from_skeleton(module_name: str, language: str, code: str) -> CodeUnit:
    parsed = parse_python_functions(code)
    if not parsed:
        raise ContractViolation("skeleton defines no functions")
    problems = []
    for fn in parsed:
        if fn.missing_annotations:
            problems.append(
                f"{fn.name}: parameters without type annotations: "
                + ", ".join(fn.missing_annotations)
            )
        if fn.return_type is None:
            problems.append(f"{fn.name}: missing return type annotation")
    if problems:
        raise ContractViolation("; ".join(problems))

    decls = tuple(
        FunctionDecl(
            name=fn.name,
            signature=fn.signature,
            params=fn.params,
            return_type=fn.return_type or "None",
        )
        for fn in parsed
    )
    text = code
    for decl in decls:
        text = replace_function(text, decl.name, render_placeholder(decl))
    if not text.endswith("\n"):
        text += "\n"
    return CodeUnit(
        module_name=module_name,
        language=language,
        files=((f"{module_name}.py", text),),
        functions=decls,
    )


# --- operations -------------------------------------------------------------------

def _requirement_text(spec: ModuleSpec) -> str:
    def items(values) -> str:
        if not values:
            return "none"
        return "; ".join(f"{v.name} ({v.hint})" for v in values)

    return (
        f"Module {spec.name}: {spec.brief_description}\n"
        f"{spec.detailed_description}\n"
        f"Inputs: {items(spec.inputs)}\n"
        f"Outputs: {items(spec.outputs)}"
    )


def _ask_until(gateway, session, prompt, parse, retry_limit: int, stage: str, what: str):
    """Send, parse/validate, and re-ask with the rejection reason appended."""
    attempt = prompt
    last_reason = ""
    for round_no in range(retry_limit + 1):
        raw = gateway.send(session, attempt)
        try:
            return parse(raw)
        except ContractViolation as exc:
            last_reason = exc.reason
        if round_no < retry_limit:
            attempt = replace(
                prompt,
                text=(
                    f"The previous response was rejected: {last_reason}\n"
                    f"Answer again, correcting the problem.\n\n{prompt.text}"
                ),
                attachments=(),
            )
    raise StageFailed(stage, f"{what}: {last_reason}")


def generate_scot(
    spec: ModuleSpec,
    gateway: Gateway,
    session: Session,
    registry: TemplateRegistry,
    exemplars: ExemplarStore,
    k: int = 2,
    retry_limit: int = 3,
) -> SCoT:
    """Generate and validate a module's reasoning chain, re-asking on
    grammar or construct violations."""
    prompt = registry.render(
        "T3",
        {
            "REQUIREMENT": _requirement_text(spec),
            "EXEMPLARS": format_exemplars(exemplars.select(SCOT_TRIPLET, k)),
        },
    )
    contract = registry.get("T3").contract

    def parse(raw: str) -> SCoT:
        chain = parse_contract(contract, raw)
        findings = validate_scot(chain)
        if findings:
            raise ContractViolation("; ".join(str(f) for f in findings))
        return chain

    return _ask_until(gateway, session, prompt, parse, retry_limit, "scot", spec.name)


def generate_framework(
    spec: ModuleSpec,
    chain: SCoT,
    gateway: Gateway,
    session: Session,
    registry: TemplateRegistry,
    exemplars: ExemplarStore,
    toolchain: ToolchainConfig,
    k: int = 2,
    retry_limit: int = 3,
    preventive_guidelines: str = "",
) -> CodeUnit:
    """Generate an all-placeholder skeleton for one module."""
    prompt = registry.render(
        "T4",
        {
            "REQUIREMENT": _requirement_text(spec),
            "SCOT": print_scot(chain).rstrip(),
            "EXEMPLARS": format_exemplars(exemplars.select(SCOT_TRIPLET, k)),
            "ALLOWED_DEPENDENCIES": ", ".join(toolchain.allowed_dependencies)
            or "standard library only",
            "PREVENTIVE_GUIDELINES": preventive_guidelines,
        },
    )
    contract = CodeBlock(toolchain.language)

    def parse(raw: str) -> CodeUnit:
        code = parse_contract(contract, raw)
        return _unit_from_skeleton(spec.name, toolchain.language, code)

    return _ask_until(gateway, session, prompt, parse, retry_limit, "framework", spec.name)


def map_paper_content(
    unit: CodeUnit,
    spec: ModuleSpec,
    bundle: PaperBundle,
    gateway: Gateway,
    session: Session,
    registry: TemplateRegistry,
    retry_limit: int = 3,
) -> CodeUnit:
    """Annotate every function with a requirement and a paper quote.

    The quote is checked with the verbatim locator; paraphrases are kept
    but flagged for human review, never silently accepted.
    """
    context = _mapping_context(spec, bundle)
    for decl in unit.functions:
        prompt = registry.render(
            "T5",
            {
                "MODULE_NAME": unit.module_name,
                "FUNCTION_SIGNATURE": decl.signature,
                "PAPER_CONTEXT": context,
            },
        )
        payload = send_with_contract(
            gateway, session, prompt, StrictJson("content_map"), retry_limit, "mapping"
        )
        requirement = payload["requirement"]
        original = payload["original_text"]
        verified = find_verbatim(bundle, original) is not None
        flags = decl.review_flags
        if not verified:
            flags = flags + ("unverified-quote",)
        if requirement == UNKNOWN:
            flags = flags + ("unknown-requirement",)
        annotated = replace(
            decl,
            requirement=requirement,
            original_text=original,
            verified=verified,
            review_flags=flags,
        )
        unit = unit.with_function(annotated)
        path = unit.main_file()
        unit = unit.with_file_text(
            path,
            replace_function(unit.file_text(path), decl.name, render_placeholder(annotated)),
        )
    return unit


def _mapping_context(spec: ModuleSpec, bundle: PaperBundle) -> str:
    """Paper text relevant to a module: its referenced sections, else the
    design-heavy kinds."""
    chosen = []
    refs = {normalize_whitespace(r).lower() for r in spec.paper_refs if r != UNKNOWN}
    for section in bundle.sections:
        if normalize_whitespace(section.heading).lower() in refs:
            chosen.append(section)
    if not chosen:
        chosen = list(
            bundle.sections_of_kind(SectionKind.SYSTEM_ARCHITECTURE, SectionKind.DESIGN)
        )
    return "\n\n".join(s.text() for s in chosen)


def compile_check(
    unit: CodeUnit, toolchain: ToolchainConfig, workdir: str | Path | None = None
) -> BuildResult:
    """Materialize the unit and run the toolchain compile command."""
    if not unit.files or not unit.functions:
        raise RejectedUnit(f"{unit.module_name}: unit has no files or no functions")
    if workdir is None:
        with tempfile.TemporaryDirectory(prefix="paperforge-build-") as tmp:
            return compile_check(unit, toolchain, tmp)
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    write_unit(unit, workdir)
    report = compile_workspace(workdir, toolchain)
    return BuildResult(ok=report.ok, report=report)


def write_unit(unit: CodeUnit, directory: str | Path) -> None:
    directory = Path(directory)
    for path, text in unit.files:
        target = directory / path
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, "utf-8")
