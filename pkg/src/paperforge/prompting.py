"""Prompt templates, output contracts, and the few-shot exemplar store.

Templates are data files under ``data/templates/`` with a front-matter
header (id, contract, placeholders) followed by the body. Placeholders use
``{{NAME}}`` markers; rendering is a single literal pass, so bound values
containing placeholder syntax are never re-expanded.

Contracts describe how a backend response must be shaped:

- ``strict_json:<schema id>``  fenced or bare JSON validating against the
  named checked-in JSON Schema
- ``scot_markdown`` / ``secot_markdown``  reasoning-chain grammars
- ``code_block:<tag>``  first fenced block with a matching info tag
- ``free_text``  anything
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources

import jsonschema

from . import scot as scot_mod
from . import secot as secot_mod
from .errors import (
    ContractViolation,
    DuplicateId,
    MissingBinding,
    NoExemplars,
    RejectedDefinition,
    ScotParseError,
    SecotParseError,
    UnknownTemplate,
)

_PLACEHOLDER = re.compile(r"\{\{([A-Z][A-Z0-9_]*)\}\}")


# --- contracts ---------------------------------------------------------------

@dataclass(frozen=True)
class StrictJson:
    schema_id: str


@dataclass(frozen=True)
class ScotMarkdown:
    pass


@dataclass(frozen=True)
class SecotMarkdown:
    pass


@dataclass(frozen=True)
class CodeBlock:
    tag: str


@dataclass(frozen=True)
class FreeText:
    pass


OutputContract = StrictJson | ScotMarkdown | SecotMarkdown | CodeBlock | FreeText


def contract_from_string(spec: str) -> OutputContract:
    if spec.startswith("strict_json:"):
        return StrictJson(spec.split(":", 1)[1])
    if spec.startswith("code_block:"):
        return CodeBlock(spec.split(":", 1)[1])
    if spec == "scot_markdown":
        return ScotMarkdown()
    if spec == "secot_markdown":
        return SecotMarkdown()
    if spec == "free_text":
        return FreeText()
    raise RejectedDefinition(f"unknown contract {spec!r}")


# --- templates ---------------------------------------------------------------

@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str
    required_placeholders: frozenset[str]
    contract: OutputContract


@dataclass(frozen=True)
class Attachment:
    element_id: str
    kind: str
    caption: str
    payload_ref: str


@dataclass(frozen=True)
class RenderedPrompt:
    template_id: str
    text: str
    bindings: dict[str, str]
    attachments: tuple[Attachment, ...] = ()


class TemplateRegistry:
    """Append-only template store; registration happens at startup."""

    def __init__(self) -> None:
        self._templates: dict[str, PromptTemplate] = {}

    def register(self, template: PromptTemplate) -> str:
        if template.id in self._templates:
            raise DuplicateId(template.id)
        found = frozenset(_PLACEHOLDER.findall(template.body))
        if found != template.required_placeholders:
            missing = template.required_placeholders - found
            extra = found - template.required_placeholders
            raise RejectedDefinition(
                f"{template.id}: placeholder mismatch"
                f"{' missing ' + ','.join(sorted(missing)) if missing else ''}"
                f"{' undeclared ' + ','.join(sorted(extra)) if extra else ''}"
            )
        self._templates[template.id] = template
        return template.id

    def get(self, template_id: str) -> PromptTemplate:
        try:
            return self._templates[template_id]
        except KeyError:
            raise UnknownTemplate(template_id) from None

    def ids(self) -> tuple[str, ...]:
        return tuple(self._templates)

    def render(
        self,
        template_id: str,
        bindings: dict[str, str],
        attachments: tuple[Attachment, ...] = (),
    ) -> RenderedPrompt:
        """Substitute placeholders literally; pure in (template, bindings)."""
        template = self.get(template_id)
        for name in sorted(template.required_placeholders):
            if name not in bindings:
                raise MissingBinding(name)
        snapshot = {name: bindings[name] for name in template.required_placeholders}
        text = _PLACEHOLDER.sub(lambda m: snapshot[m.group(1)], template.body)
        return RenderedPrompt(template_id, text, snapshot, attachments)


# --- response parsing ---------------------------------------------------------

_FENCE_LINE = re.compile(r"^```([\w+-]*)\s*$")


def extract_fenced_blocks(text: str) -> list[tuple[str, str]]:
    """Return (tag, content) for every fenced block, in order."""
    blocks: list[tuple[str, str]] = []
    tag: str | None = None
    body: list[str] = []
    for line in text.split("\n"):
        m = _FENCE_LINE.match(line.strip())
        if m:
            if tag is None:
                tag = m.group(1).lower()
                body = []
            else:
                blocks.append((tag, "\n".join(body)))
                tag = None
        elif tag is not None:
            body.append(line)
    return blocks


def _strip_fences(raw: str) -> str:
    blocks = extract_fenced_blocks(raw)
    if blocks:
        return blocks[0][1]
    return raw


_SCHEMA_CACHE: dict[str, dict] = {}


def load_schema(schema_id: str) -> dict:
    if schema_id not in _SCHEMA_CACHE:
        path = resources.files("paperforge.data.schemas").joinpath(f"{schema_id}.schema.json")
        try:
            _SCHEMA_CACHE[schema_id] = json.loads(path.read_text("utf-8"))
        except FileNotFoundError:
            raise ContractViolation(f"unknown schema id {schema_id}") from None
    return _SCHEMA_CACHE[schema_id]


def parse_contract(contract: OutputContract, raw: str):
    """Parse a backend response under its contract.

    Returns the payload (dict for JSON, str for code blocks, chain objects
    for the reasoning grammars). Raises ContractViolation for any
    malformed response; violations are retry-eligible.
    """
    if isinstance(contract, FreeText):
        return raw

    if isinstance(contract, StrictJson):
        candidate = _strip_fences(raw).strip()
        try:
            payload = json.loads(candidate)
        except json.JSONDecodeError as exc:
            raise ContractViolation(f"invalid JSON: {exc}") from exc
        schema = load_schema(contract.schema_id)
        try:
            jsonschema.validate(payload, schema)
        except jsonschema.ValidationError as exc:
            raise ContractViolation(f"schema {contract.schema_id}: {exc.message}") from exc
        return payload

    if isinstance(contract, CodeBlock):
        for tag, content in extract_fenced_blocks(raw):
            if tag == contract.tag.lower():
                return content
        raise ContractViolation(f"no fenced {contract.tag} block in response")

    if isinstance(contract, ScotMarkdown):
        try:
            return scot_mod.parse_scot(_strip_fences(raw).strip("\n") + "\n")
        except ScotParseError as exc:
            raise ContractViolation(f"chain grammar: {exc}") from exc

    if isinstance(contract, SecotMarkdown):
        try:
            return secot_mod.parse_secot(_strip_fences(raw))
        except SecotParseError as exc:
            raise ContractViolation(f"chain grammar: {exc}") from exc

    raise ContractViolation(f"unsupported contract {contract!r}")


# --- exemplars ----------------------------------------------------------------

SCOT_TRIPLET = "ScotTriplet"
SECOT_TRIPLET = "SecotTriplet"


@dataclass(frozen=True)
class Exemplar:
    kind: str
    requirement: str
    chain: str  # chain text in the matching grammar
    code: str


class ExemplarStore:
    """Append-only store; selection is deterministic registry order."""

    def __init__(self) -> None:
        self._exemplars: list[Exemplar] = []

    def add(self, exemplar: Exemplar) -> None:
        if exemplar.kind not in (SCOT_TRIPLET, SECOT_TRIPLET):
            raise RejectedDefinition(f"unknown exemplar kind {exemplar.kind}")
        if not (exemplar.requirement and exemplar.chain and exemplar.code):
            raise RejectedDefinition("exemplar parts must be non-empty")
        # chain must parse under the grammar matching its kind
        if exemplar.kind == SCOT_TRIPLET:
            scot_mod.parse_scot(exemplar.chain)
        else:
            secot_mod.parse_secot(exemplar.chain)
        self._exemplars.append(exemplar)

    def select(self, kind: str, k: int) -> tuple[Exemplar, ...]:
        of_kind = tuple(e for e in self._exemplars if e.kind == kind)
        if not of_kind:
            raise NoExemplars(kind)
        return of_kind[: max(k, 0)]


def format_exemplars(exemplars: tuple[Exemplar, ...], language: str = "python") -> str:
    """Render triplets for prompt inclusion."""
    parts = []
    for i, ex in enumerate(exemplars, start=1):
        parts.append(
            f"### Example {i}\n"
            f"Requirement:\n{ex.requirement}\n\n"
            f"Chain:\n{ex.chain.rstrip()}\n\n"
            f"Code:\n```{language}\n{ex.code.rstrip()}\n```"
        )
    return "\n\n".join(parts)


# --- built-in data loading ------------------------------------------------------

_FRONT_MATTER = re.compile(r"\A---\n(.*?)\n---\n", re.DOTALL)


def _parse_front_matter(text: str) -> tuple[dict[str, str], str]:
    m = _FRONT_MATTER.match(text)
    if not m:
        raise RejectedDefinition("data file has no front-matter header")
    header: dict[str, str] = {}
    for line in m.group(1).split("\n"):
        if not line.strip():
            continue
        key, _, value = line.partition(":")
        header[key.strip()] = value.strip()
    return header, text[m.end():]


def load_builtin_templates(registry: TemplateRegistry | None = None) -> TemplateRegistry:
    """Load the built-in template set (T1..T11) from package data."""
    registry = registry or TemplateRegistry()
    root = resources.files("paperforge.data.templates")
    names = sorted(
        (entry.name for entry in root.iterdir() if entry.name.endswith(".prompt")),
        key=lambda n: (len(n), n),  # T2 before T10
    )
    for name in names:
        header, body = _parse_front_matter(root.joinpath(name).read_text("utf-8"))
        placeholders = frozenset(
            p.strip() for p in header.get("placeholders", "").split(",") if p.strip()
        )
        registry.register(
            PromptTemplate(
                id=header["id"],
                body=body.rstrip("\n"),
                required_placeholders=placeholders,
                contract=contract_from_string(header["contract"]),
            )
        )
    return registry


def load_builtin_exemplars(store: ExemplarStore | None = None) -> ExemplarStore:
    """Load the built-in exemplar set from package data, filename order."""
    store = store or ExemplarStore()
    root = resources.files("paperforge.data.exemplars")
    for name in sorted(entry.name for entry in root.iterdir() if entry.name.endswith(".md")):
        header, body = _parse_front_matter(root.joinpath(name).read_text("utf-8"))
        sections: dict[str, list[str]] = {}
        current: list[str] | None = None
        for line in body.split("\n"):
            if line.startswith("# "):
                current = sections.setdefault(line[2:].strip().lower(), [])
            elif current is not None:
                current.append(line)
        code_lines = sections.get("code", [])
        code = "\n".join(code_lines).strip()
        blocks = extract_fenced_blocks(code)
        if blocks:
            code = blocks[0][1]
        store.add(
            Exemplar(
                kind=header["kind"],
                requirement="\n".join(sections.get("requirement", [])).strip(),
                chain="\n".join(sections.get("chain", [])).strip("\n") + "\n",
                code=code,
            )
        )
    return store
