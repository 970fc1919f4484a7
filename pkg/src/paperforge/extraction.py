"""Stage 1: system metadata extraction and module division.

Both operations render a built-in template, send it through the gateway,
and parse the response under a strict-JSON contract. A malformed response
is re-asked with the violation appended, up to the configured retry
limit, then the stage fails. Fields the backend cannot ground must carry
the UNKNOWN placeholder; they are never invented here.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .document import (
    DesignFirstParagraph,
    ElementKind,
    IntroLastParagraph,
    Outline,
    PaperBundle,
    SectionKind,
    SectionsByKind,
    SystemOverview,
    select_excerpt,
)
from .errors import (
    ContractViolation,
    CyclicDependencies,
    RejectedRefinement,
    StageFailed,
    ValidationErrorsPresent,
)
from .gateway import AUTOMATIC, HUMAN, Gateway, Session
from .prompting import Attachment, StrictJson, TemplateRegistry, parse_contract

UNKNOWN = "UNKNOWN"

RETRY_PREFIX = (
    "The previous response violated the required output format: {reason}\n"
    "Answer the previous request again. Reply with only the required "
    "payload, exactly in the format specified."
)


@dataclass(frozen=True)
class IOItem:
    name: str
    hint: str = UNKNOWN


@dataclass(frozen=True)
class SystemMetadata:
    sub_domain: str
    system_name: str
    deployment_type: str
    problem_statement: str
    system_inputs: tuple[IOItem, ...]
    system_outputs: tuple[IOItem, ...]
    architecture_features: tuple[str, ...]
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "sub_domain": self.sub_domain,
            "system_name": self.system_name,
            "deployment_type": self.deployment_type,
            "problem_statement": self.problem_statement,
            "system_inputs": [{"name": i.name, "hint": i.hint} for i in self.system_inputs],
            "system_outputs": [{"name": i.name, "hint": i.hint} for i in self.system_outputs],
            "architecture_features": list(self.architecture_features),
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SystemMetadata":
        return cls(
            sub_domain=data["sub_domain"],
            system_name=data["system_name"],
            deployment_type=data["deployment_type"],
            problem_statement=data["problem_statement"],
            system_inputs=tuple(IOItem(i["name"], i.get("hint", UNKNOWN)) for i in data["system_inputs"]),
            system_outputs=tuple(IOItem(i["name"], i.get("hint", UNKNOWN)) for i in data["system_outputs"]),
            architecture_features=tuple(data["architecture_features"]),
            flags=tuple(data.get("flags", ())),
        )


@dataclass(frozen=True)
class ModuleSpec:
    name: str
    brief_description: str = UNKNOWN
    detailed_description: str = UNKNOWN
    inputs: tuple[IOItem, ...] = ()
    outputs: tuple[IOItem, ...] = ()
    paper_refs: tuple[str, ...] = ()
    depends_on: tuple[str, ...] = ()
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "brief_description": self.brief_description,
            "detailed_description": self.detailed_description,
            "inputs": [{"name": i.name, "hint": i.hint} for i in self.inputs],
            "outputs": [{"name": i.name, "hint": i.hint} for i in self.outputs],
            "paper_refs": list(self.paper_refs),
            "depends_on": list(self.depends_on),
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModuleSpec":
        return cls(
            name=data["name"],
            brief_description=data.get("brief_description", UNKNOWN),
            detailed_description=data.get("detailed_description", UNKNOWN),
            inputs=tuple(IOItem(i["name"], i.get("hint", UNKNOWN)) for i in data.get("inputs", ())),
            outputs=tuple(IOItem(i["name"], i.get("hint", UNKNOWN)) for i in data.get("outputs", ())),
            paper_refs=tuple(data.get("paper_refs", ())),
            depends_on=tuple(data.get("depends_on", ())),
            flags=tuple(data.get("flags", ())),
        )


@dataclass(frozen=True)
class ModuleDivision:
    modules: tuple[ModuleSpec, ...]
    approved: bool = False
    revision: int = 1

    def module(self, name: str) -> ModuleSpec:
        for spec in self.modules:
            if spec.name == name:
                return spec
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "modules": [m.to_dict() for m in self.modules],
            "approved": self.approved,
            "revision": self.revision,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModuleDivision":
        return cls(
            modules=tuple(ModuleSpec.from_dict(m) for m in data["modules"]),
            approved=data.get("approved", False),
            revision=data.get("revision", 1),
        )


@dataclass(frozen=True)
class Finding:
    code: str
    detail: str

    def __str__(self) -> str:
        return f"{self.code}: {self.detail}"


@dataclass(frozen=True)
class DivisionReport:
    errors: tuple[Finding, ...] = ()
    warnings: tuple[Finding, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors


# --- helpers -------------------------------------------------------------------

def send_with_contract(
    gateway: Gateway,
    session: Session,
    prompt,
    contract,
    retry_limit: int,
    stage: str,
    origin: str = AUTOMATIC,
):
    """Send, parse, and re-ask on contract violations up to retry_limit."""
    raw = gateway.send(session, prompt, origin)
    last_reason = ""
    for _ in range(retry_limit):
        try:
            return parse_contract(contract, raw)
        except ContractViolation as exc:
            last_reason = exc.reason
        retry = replace(prompt, text=RETRY_PREFIX.format(reason=last_reason), attachments=())
        raw = gateway.send(session, retry, AUTOMATIC)
    try:
        return parse_contract(contract, raw)
    except ContractViolation as exc:
        raise StageFailed(
            stage, f"contract still violated after {retry_limit} retries: {exc.reason}"
        ) from exc


def _figure_attachments(bundle: PaperBundle, kinds: tuple[SectionKind, ...]) -> tuple[Attachment, ...]:
    attachments = []
    for section in bundle.sections_of_kind(*kinds):
        for element_id in section.element_refs:
            el = bundle.element(element_id)
            if el.kind in (ElementKind.FIGURE, ElementKind.TABLE):
                attachments.append(Attachment(el.id, el.kind.value, el.caption, el.payload))
    return tuple(attachments)


# --- operations ------------------------------------------------------------------

def extract_metadata(
    bundle: PaperBundle,
    gateway: Gateway,
    session: Session,
    registry: TemplateRegistry,
    retry_limit: int = 3,
) -> SystemMetadata:
    """Extract system metadata from the introduction and background."""
    context = select_excerpt(
        bundle, SectionsByKind((SectionKind.INTRODUCTION, SectionKind.BACKGROUND))
    )
    prompt = registry.render(
        "T1",
        {"PAPER_CONTEXT": context.text},
        attachments=_figure_attachments(
            bundle, (SectionKind.INTRODUCTION, SectionKind.BACKGROUND)
        ),
    )
    payload = send_with_contract(
        gateway, session, prompt, StrictJson("system_metadata"), retry_limit, "extract"
    )
    flags = []
    for key in ("deployment_type", "system_inputs", "system_outputs", "architecture_features"):
        if key not in payload:
            flags.append(f"{key} missing; filled with UNKNOWN")
    return SystemMetadata(
        sub_domain=payload["sub_domain"],
        system_name=payload["system_name"],
        deployment_type=payload.get("deployment_type", UNKNOWN),
        problem_statement=payload["problem_statement"],
        system_inputs=tuple(
            IOItem(i["name"], i.get("hint", UNKNOWN)) for i in payload.get("system_inputs", ())
        ),
        system_outputs=tuple(
            IOItem(i["name"], i.get("hint", UNKNOWN)) for i in payload.get("system_outputs", ())
        ),
        architecture_features=tuple(payload.get("architecture_features", ())),
        flags=tuple(flags),
    )


def _division_from_payload(payload: dict) -> ModuleDivision:
    specs = []
    for module in payload["modules"]:
        flags = []
        for key in ("brief_description", "detailed_description", "inputs", "outputs"):
            if key not in module:
                flags.append(f"{key} missing; filled with UNKNOWN")
        spec = ModuleSpec.from_dict(module)
        if not spec.inputs and "inputs" not in module:
            spec = replace(spec, inputs=(IOItem(UNKNOWN, UNKNOWN),))
        if not spec.outputs and "outputs" not in module:
            spec = replace(spec, outputs=(IOItem(UNKNOWN, UNKNOWN),))
        specs.append(replace(spec, flags=spec.flags + tuple(flags)))
    return ModuleDivision(modules=tuple(specs))


def _find_cycle(division: ModuleDivision) -> tuple[str, ...] | None:
    names = {m.name for m in division.modules}
    graph = {m.name: [d for d in m.depends_on if d in names] for m in division.modules}
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {n: WHITE for n in graph}
    stack: list[str] = []

    def visit(node: str) -> tuple[str, ...] | None:
        color[node] = GRAY
        stack.append(node)
        for dep in graph[node]:
            if color[dep] == GRAY:
                i = stack.index(dep)
                return tuple(stack[i:] + [dep])
            if color[dep] == WHITE:
                found = visit(dep)
                if found:
                    return found
        stack.pop()
        color[node] = BLACK
        return None

    for name in graph:
        if color[name] == WHITE:
            found = visit(name)
            if found:
                return found
    return None


def divide_modules(
    bundle: PaperBundle,
    metadata: SystemMetadata,
    gateway: Gateway,
    session: Session,
    registry: TemplateRegistry,
    retry_limit: int = 3,
) -> ModuleDivision:
    """Divide the system into functional modules (unapproved, revision 1)."""
    bindings = {
        "SYSTEM_METADATA": json.dumps(metadata.to_dict(), indent=2, sort_keys=True),
        "INTRO_LAST_PARAGRAPH": select_excerpt(bundle, IntroLastParagraph()).text,
        "DESIGN_FIRST_PARAGRAPH": select_excerpt(bundle, DesignFirstParagraph()).text,
        "SYSTEM_OVERVIEW": select_excerpt(bundle, SystemOverview()).text,
        "OUTLINE": select_excerpt(bundle, Outline()).text,
    }
    prompt = registry.render(
        "T2",
        bindings,
        attachments=_figure_attachments(
            bundle, (SectionKind.SYSTEM_ARCHITECTURE, SectionKind.DESIGN)
        ),
    )
    payload = send_with_contract(
        gateway, session, prompt, StrictJson("module_division"), retry_limit, "divide"
    )
    division = _division_from_payload(payload)
    cycle = _find_cycle(division)
    if cycle:
        raise CyclicDependencies(cycle)
    return division


def validate_division(
    division: ModuleDivision, system_inputs: tuple[IOItem, ...] = ()
) -> DivisionReport:
    """Report-only check: cycles, dangling deps, name collisions, I/O closure.

    I/O closure findings are warnings: an input satisfied by neither the
    system inputs nor any module's outputs may simply be glue the paper
    omits.
    """
    errors: list[Finding] = []
    warnings: list[Finding] = []

    seen: set[str] = set()
    for spec in division.modules:
        if spec.name in seen:
            errors.append(Finding("name-collision", spec.name))
        seen.add(spec.name)

    names = {m.name for m in division.modules}
    for spec in division.modules:
        for dep in spec.depends_on:
            if dep not in names:
                errors.append(Finding("dangling-dependency", f"{spec.name} -> {dep}"))

    cycle = _find_cycle(division)
    if cycle:
        errors.append(Finding("cycle", " -> ".join(cycle)))

    produced = {o.name.lower() for m in division.modules for o in m.outputs if o.name != UNKNOWN}
    available = produced | {i.name.lower() for i in system_inputs}
    for spec in division.modules:
        for item in spec.inputs:
            if item.name == UNKNOWN:
                continue
            if item.name.lower() not in available:
                warnings.append(
                    Finding("io-closure", f"{spec.name} input {item.name!r} has no producer")
                )
    return DivisionReport(tuple(errors), tuple(warnings))


def refine_division(
    division: ModuleDivision,
    feedback: str,
    gateway: Gateway,
    session: Session,
    registry: TemplateRegistry,
    retry_limit: int = 3,
) -> ModuleDivision:
    """Revise an unapproved division per reviewer feedback; revision + 1.

    The feedback is human-authored, so the send carries Human origin.
    """
    if division.approved:
        raise RejectedRefinement("division already approved")
    if not feedback.strip():
        raise RejectedRefinement("empty feedback")
    bindings = {
        "CURRENT_DIVISION": json.dumps(division.to_dict(), indent=2, sort_keys=True),
        "FEEDBACK": feedback,
    }
    prompt = registry.render("T11", bindings)
    payload = send_with_contract(
        gateway, session, prompt, StrictJson("module_division"), retry_limit, "refine",
        origin=HUMAN,
    )
    refined = _division_from_payload(payload)
    cycle = _find_cycle(refined)
    if cycle:
        raise CyclicDependencies(cycle)
    return replace(refined, revision=division.revision + 1)


def approve_division(division: ModuleDivision, actor: str) -> ModuleDivision:
    """Freeze a division; warnings allowed, errors block approval.

    Re-approving an approved division is an idempotent no-op.
    """
    if division.approved:
        return division
    report = validate_division(division)
    if report.errors:
        raise ValidationErrorsPresent(report.errors)
    if not actor.strip():
        raise ValidationErrorsPresent((Finding("actor", "approval requires a named actor"),))
    return replace(division, approved=True)


def topological_order(division: ModuleDivision) -> tuple[ModuleSpec, ...]:
    """Modules in dependency order; ties broken by division order."""
    names = {m.name for m in division.modules}
    indegree = {m.name: 0 for m in division.modules}
    for spec in division.modules:
        for dep in spec.depends_on:
            if dep in names:
                indegree[spec.name] += 1
    order: list[ModuleSpec] = []
    placed: set[str] = set()
    remaining = list(division.modules)
    while remaining:
        progressed = False
        for spec in list(remaining):
            if all(dep in placed or dep not in names for dep in spec.depends_on):
                order.append(spec)
                placed.add(spec.name)
                remaining.remove(spec)
                progressed = True
        if not progressed:
            raise CyclicDependencies(tuple(m.name for m in remaining))
    return tuple(order)
