"""Paper bundle ingestion and excerpt selection.

A bundle is a directory holding ``manifest.json`` plus one UTF-8 text file
per section. The manifest declares the title, the ordered section list
(heading, file, optional ``kind_hint``), and the figure/table assets.
Formulas and pseudocode live inline in section bodies as fenced blocks::

    ```formula id=eq1
    \\hat{r} = n / (w \\cdot p)
    ```

Figure/table assets are referenced from a section body with a marker line
``[element: fig1]``. Every element must be referenced by exactly one
section.

All loaded values are immutable; any number of pipeline stages may read a
bundle concurrently.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from importlib import resources

from .errors import (
    DanglingElementRef,
    EmptyQuote,
    MalformedSection,
    MissingManifest,
    SelectorUnsatisfied,
)


class SectionKind(str, Enum):
    """The eight canonical section kinds."""

    ABSTRACT = "Abstract"
    INTRODUCTION = "Introduction"
    BACKGROUND = "Background"
    SYSTEM_ARCHITECTURE = "SystemArchitecture"
    DESIGN = "Design"
    EVALUATION = "Evaluation"
    DISCUSSION = "Discussion"
    APPENDICES = "Appendices"


class ElementKind(str, Enum):
    FIGURE = "Figure"
    TABLE = "Table"
    FORMULA = "Formula"
    PSEUDOCODE = "Pseudocode"


# Section classification falls back to Design for unmatched headings:
# Design is the stage that consumes the most content, so misfiled text
# stays reachable downstream.
FALLBACK_KIND = SectionKind.DESIGN


def normalize_whitespace(text: str) -> str:
    """Collapse whitespace runs to single spaces and trim.

    Case-sensitive and idempotent; this is the comparison form used for
    all verbatim-quote checks.
    """
    return " ".join(text.split())


@dataclass(frozen=True)
class MultimodalElement:
    id: str
    kind: ElementKind
    payload: str  # asset path for Figure/Table, LaTeX source otherwise
    caption: str = ""


@dataclass(frozen=True)
class Section:
    heading: str
    kind: SectionKind
    paragraphs: tuple[str, ...]
    element_refs: tuple[str, ...] = ()

    def text(self) -> str:
        return "\n\n".join(self.paragraphs)


@dataclass(frozen=True)
class PaperBundle:
    id: str
    sections: tuple[Section, ...]
    elements: tuple[MultimodalElement, ...]
    manifest: dict
    classification_flags: tuple[str, ...] = ()

    def element(self, element_id: str) -> MultimodalElement:
        for el in self.elements:
            if el.id == element_id:
                return el
        raise DanglingElementRef(element_id, "unknown element")

    def sections_of_kind(self, *kinds: SectionKind) -> tuple[Section, ...]:
        wanted = set(kinds)
        return tuple(s for s in self.sections if s.kind in wanted)


@dataclass(frozen=True)
class Location:
    section_index: int
    heading: str
    start: int
    end: int


@dataclass(frozen=True)
class OutlineEntry:
    index: int
    heading: str
    kind: SectionKind


@dataclass(frozen=True)
class ExcerptOrigin:
    selector: str
    spans: tuple[tuple[int, int, int], ...] = ()  # (section index, para lo, para hi)
    params: tuple[str, ...] = ()


@dataclass(frozen=True)
class Excerpt:
    text: str
    origin: ExcerptOrigin


@dataclass(frozen=True)
class SectionMap:
    kinds: dict[str, SectionKind]
    flagged: tuple[str, ...] = ()


# --- selectors --------------------------------------------------------------

@dataclass(frozen=True)
class IntroLastParagraph:
    key = "intro_last_paragraph"


@dataclass(frozen=True)
class DesignFirstParagraph:
    key = "design_first_paragraph"


@dataclass(frozen=True)
class SectionsByKind:
    kinds: tuple[SectionKind, ...]
    key = "sections_by_kind"


@dataclass(frozen=True)
class SystemOverview:
    """System-architecture section when present, else first Design paragraph."""

    key = "system_overview"


@dataclass(frozen=True)
class Outline:
    key = "outline"


ExcerptSelector = (
    IntroLastParagraph | DesignFirstParagraph | SectionsByKind | SystemOverview | Outline
)


# --- alias table ------------------------------------------------------------

_HEADING_NUMBER = re.compile(r"^\s*(?:[0-9]+|[IVXLC]+|[A-Z])(?:[.)]|\s)\s*", re.ASCII)


def _normalize_heading(heading: str) -> str:
    h = _HEADING_NUMBER.sub("", heading)
    h = re.sub(r"[^\w\s-]", "", h)
    return normalize_whitespace(h).lower()


def _load_alias_table() -> dict[str, SectionKind]:
    raw = resources.files("paperforge.data").joinpath("section_aliases.json").read_text("utf-8")
    table = json.loads(raw)
    return {alias: SectionKind(kind) for kind, aliases in table.items() for alias in aliases}


_ALIAS_TABLE: dict[str, SectionKind] | None = None


def _alias_table() -> dict[str, SectionKind]:
    global _ALIAS_TABLE
    if _ALIAS_TABLE is None:
        _ALIAS_TABLE = _load_alias_table()
    return _ALIAS_TABLE


def _classify_heading(heading: str, kind_hint: str | None) -> tuple[SectionKind, bool]:
    """Resolve a heading to a canonical kind; True flag means fallback applied."""
    if kind_hint:
        try:
            return SectionKind(kind_hint), False
        except ValueError:
            pass  # bad hints fall through to the alias table
    kind = _alias_table().get(_normalize_heading(heading))
    if kind is not None:
        return kind, False
    return FALLBACK_KIND, True


# --- latex balance ----------------------------------------------------------

_BEGIN_END = re.compile(r"\\(begin|end)\{([^}]*)\}")


def check_latex_balanced(source: str) -> str | None:
    """Return a reason string when braces or environments are unbalanced."""
    depth = 0
    i = 0
    while i < len(source):
        ch = source[i]
        if ch == "\\" and i + 1 < len(source):
            i += 2
            continue
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth < 0:
                return "unbalanced closing brace"
        i += 1
    if depth != 0:
        return "unbalanced opening brace"
    stack: list[str] = []
    for m in _BEGIN_END.finditer(source):
        if m.group(1) == "begin":
            stack.append(m.group(2))
        else:
            if not stack or stack.pop() != m.group(2):
                return f"mismatched \\end{{{m.group(2)}}}"
    if stack:
        return f"unclosed \\begin{{{stack[-1]}}}"
    return None


# --- bundle loading ---------------------------------------------------------

_FENCE_OPEN = re.compile(r"^```(formula|pseudocode)\s+id=([\w.-]+)\s*$")
_ELEMENT_MARKER = re.compile(r"^\[element:\s*([\w.-]+)\]\s*$")


@dataclass
class _ParsedBody:
    paragraphs: list[str] = field(default_factory=list)
    inline_elements: list[MultimodalElement] = field(default_factory=list)
    asset_refs: list[str] = field(default_factory=list)


def _parse_section_body(file_name: str, text: str) -> _ParsedBody:
    parsed = _ParsedBody()
    lines = text.split("\n")
    para_lines: list[str] = []

    def flush() -> None:
        block = "\n".join(para_lines).strip()
        if block:
            parsed.paragraphs.append(block)
        para_lines.clear()

    i = 0
    while i < len(lines):
        line = lines[i]
        fence = _FENCE_OPEN.match(line)
        marker = _ELEMENT_MARKER.match(line)
        if fence:
            flush()
            kind = ElementKind.FORMULA if fence.group(1) == "formula" else ElementKind.PSEUDOCODE
            element_id = fence.group(2)
            body: list[str] = []
            i += 1
            while i < len(lines) and lines[i].rstrip() != "```":
                body.append(lines[i])
                i += 1
            if i >= len(lines):
                raise MalformedSection(file_name, f"unterminated fenced block {element_id}")
            payload = "\n".join(body)
            reason = check_latex_balanced(payload)
            if reason:
                raise MalformedSection(file_name, f"element {element_id}: {reason}")
            parsed.inline_elements.append(MultimodalElement(element_id, kind, payload))
        elif line.startswith("```"):
            raise MalformedSection(file_name, f"fenced block without element id: {line.strip()}")
        elif marker:
            flush()
            parsed.asset_refs.append(marker.group(1))
        elif line.strip() == "":
            flush()
        else:
            para_lines.append(line)
        i += 1
    flush()
    return parsed


def load_bundle(path: str | Path) -> PaperBundle:
    """Load and validate a bundle directory.

    Raises MissingManifest when manifest.json is absent or unreadable,
    MalformedSection for broken section files, and DanglingElementRef for
    assets that are missing on disk or not referenced by exactly one
    section.
    """
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise MissingManifest(str(manifest_path))
    try:
        manifest = json.loads(manifest_path.read_text("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MissingManifest(f"{manifest_path}: {exc}") from exc
    if not isinstance(manifest, dict) or "sections" not in manifest:
        raise MissingManifest(f"{manifest_path}: no sections declared")

    bundle_id = str(manifest.get("id") or manifest.get("title") or "").strip()
    if not bundle_id:
        raise MissingManifest(f"{manifest_path}: empty bundle id/title")

    assets: dict[str, MultimodalElement] = {}
    for entry in manifest.get("assets", ()):
        element_id = entry["id"]
        if element_id in assets:
            raise DanglingElementRef(element_id, "duplicate asset id")
        try:
            kind = ElementKind(entry["kind"])
        except ValueError as exc:
            raise DanglingElementRef(element_id, f"bad asset kind {entry['kind']}") from exc
        if kind not in (ElementKind.FIGURE, ElementKind.TABLE):
            raise DanglingElementRef(element_id, "assets must be Figure or Table")
        asset_file = root / entry["file"]
        if not asset_file.is_file():
            raise DanglingElementRef(element_id, f"asset file missing: {entry['file']}")
        assets[element_id] = MultimodalElement(
            element_id, kind, entry["file"], entry.get("caption", "")
        )

    sections: list[Section] = []
    inline_elements: list[MultimodalElement] = []
    asset_ref_counts: dict[str, int] = {eid: 0 for eid in assets}
    flags: list[str] = []

    for entry in manifest["sections"]:
        heading = entry["heading"]
        file_name = entry["file"]
        section_path = root / file_name
        if not section_path.is_file():
            raise MalformedSection(file_name, "section file missing")
        try:
            text = section_path.read_text("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedSection(file_name, f"not valid UTF-8: {exc}") from exc
        parsed = _parse_section_body(file_name, text)

        refs: list[str] = []
        for element_id in parsed.asset_refs:
            if element_id not in assets:
                raise DanglingElementRef(element_id, f"referenced in {file_name} but not declared")
            asset_ref_counts[element_id] += 1
            refs.append(element_id)
        for el in parsed.inline_elements:
            if el.id in assets or any(e.id == el.id for e in inline_elements):
                raise MalformedSection(file_name, f"duplicate element id {el.id}")
            inline_elements.append(el)
            refs.append(el.id)

        if not parsed.paragraphs and not refs:
            raise MalformedSection(file_name, "empty section (no paragraphs, no elements)")

        kind, fell_back = _classify_heading(heading, entry.get("kind_hint"))
        if fell_back:
            flags.append(heading)
        sections.append(Section(heading, kind, tuple(parsed.paragraphs), tuple(refs)))

    for element_id, count in asset_ref_counts.items():
        if count == 0:
            raise DanglingElementRef(element_id, "asset never referenced by a section")
        if count > 1:
            raise DanglingElementRef(element_id, f"asset referenced by {count} sections")

    return PaperBundle(
        id=bundle_id,
        sections=tuple(sections),
        elements=tuple(assets.values()) + tuple(inline_elements),
        manifest=manifest,
        classification_flags=tuple(flags),
    )


# --- operations -------------------------------------------------------------

def classify_sections(bundle: PaperBundle) -> SectionMap:
    """Map every heading to its canonical kind; deterministic and total.

    Fallback headings are flagged. For duplicate headings the first
    occurrence wins in the map.
    """
    kinds: dict[str, SectionKind] = {}
    flagged: list[str] = []
    for entry, section in zip(bundle.manifest["sections"], bundle.sections):
        kind, fell_back = _classify_heading(section.heading, entry.get("kind_hint"))
        kinds.setdefault(section.heading, kind)
        if fell_back and section.heading not in flagged:
            flagged.append(section.heading)
    return SectionMap(kinds=kinds, flagged=tuple(flagged))


def extract_outline(bundle: PaperBundle) -> tuple[OutlineEntry, ...]:
    """Ordered headings with kinds; duplicates keep their indices."""
    return tuple(
        OutlineEntry(i, s.heading, s.kind) for i, s in enumerate(bundle.sections)
    )


def _first_of_kind(bundle: PaperBundle, kind: SectionKind) -> tuple[int, Section] | None:
    for i, section in enumerate(bundle.sections):
        if section.kind == kind:
            return i, section
    return None


def select_excerpt(bundle: PaperBundle, selector: ExcerptSelector) -> Excerpt:
    """Return the exact text region named by the selector.

    Raises SelectorUnsatisfied when the named region does not exist.
    """
    if isinstance(selector, IntroLastParagraph):
        hit = _first_of_kind(bundle, SectionKind.INTRODUCTION)
        if hit is None or not hit[1].paragraphs:
            raise SelectorUnsatisfied(selector.key)
        idx, section = hit
        last = len(section.paragraphs) - 1
        return Excerpt(
            section.paragraphs[last],
            ExcerptOrigin(selector.key, spans=((idx, last, last + 1),)),
        )

    if isinstance(selector, DesignFirstParagraph):
        hit = _first_of_kind(bundle, SectionKind.DESIGN)
        if hit is None or not hit[1].paragraphs:
            raise SelectorUnsatisfied(selector.key)
        idx, section = hit
        return Excerpt(
            section.paragraphs[0],
            ExcerptOrigin(selector.key, spans=((idx, 0, 1),)),
        )

    if isinstance(selector, SectionsByKind):
        spans = []
        parts = []
        for i, section in enumerate(bundle.sections):
            if section.kind in selector.kinds and section.paragraphs:
                spans.append((i, 0, len(section.paragraphs)))
                parts.append(section.text())
        if not parts:
            raise SelectorUnsatisfied(selector.key)
        return Excerpt(
            "\n\n".join(parts),
            ExcerptOrigin(
                selector.key,
                spans=tuple(spans),
                params=tuple(k.value for k in selector.kinds),
            ),
        )

    if isinstance(selector, SystemOverview):
        hit = _first_of_kind(bundle, SectionKind.SYSTEM_ARCHITECTURE)
        if hit is not None and hit[1].paragraphs:
            idx, section = hit
            return Excerpt(
                section.text(),
                ExcerptOrigin(selector.key, spans=((idx, 0, len(section.paragraphs)),)),
            )
        hit = _first_of_kind(bundle, SectionKind.DESIGN)
        if hit is None or not hit[1].paragraphs:
            raise SelectorUnsatisfied(selector.key)
        idx, section = hit
        return Excerpt(
            section.paragraphs[0],
            ExcerptOrigin(selector.key, spans=((idx, 0, 1),)),
        )

    if isinstance(selector, Outline):
        if not bundle.sections:
            raise SelectorUnsatisfied(selector.key)
        return Excerpt(
            "\n".join(s.heading for s in bundle.sections),
            ExcerptOrigin(selector.key),
        )

    raise SelectorUnsatisfied(repr(selector))


def reproduce_excerpt(bundle: PaperBundle, origin: ExcerptOrigin) -> str:
    """Rebuild excerpt text from its origin record (round-trip check)."""
    if origin.selector == Outline.key:
        return "\n".join(s.heading for s in bundle.sections)
    parts = []
    for section_index, lo, hi in origin.spans:
        section = bundle.sections[section_index]
        parts.append("\n\n".join(section.paragraphs[lo:hi]))
    return "\n\n".join(parts)


def find_verbatim(bundle: PaperBundle, quote: str) -> Location | None:
    """Locate a quote in the bundle after whitespace normalization.

    Returns the first match in document order as (section, char range in
    the section's normalized text), or None. Searches paragraph text only;
    element payloads and captions are not quoted material.
    """
    normalized_quote = normalize_whitespace(quote)
    if not normalized_quote:
        raise EmptyQuote("quote is empty")
    for i, section in enumerate(bundle.sections):
        haystack = normalize_whitespace(section.text())
        pos = haystack.find(normalized_quote)
        if pos >= 0:
            return Location(i, section.heading, pos, pos + len(normalized_quote))
    return None
