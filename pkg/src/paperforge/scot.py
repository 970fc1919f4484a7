"""Structured pseudo-code chains: AST, parser, printer, validator.

The chain grammar restricts plans to sequential steps, conditionals, and
loops, with a typed I/O declaration up front::

    Input: samples: list of float; window: int
    Output: averages: list of float
    1. Step: validate the window size
    2. Cond: window is larger than the sample count
        Then:
            1. Step: return an empty list
        Else:
            1. Step: keep going
    3. Loop: for each window position
        1. Step: append the window mean

Rules: statements are numbered 1..n per block; nesting indents by four
spaces; ``Cond`` requires a ``Then:`` label (``Else:`` optional) with the
branch statements one level deeper. ``parse(print(chain))`` round-trips
losslessly.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from random import Random

from .errors import ScotParseError

INDENT = "    "


@dataclass(frozen=True)
class Param:
    name: str
    type: str


@dataclass(frozen=True)
class IoDecl:
    inputs: tuple[Param, ...]
    output: Param | None


@dataclass(frozen=True)
class Step:
    text: str


@dataclass(frozen=True)
class Seq:
    children: tuple["Node", ...]


@dataclass(frozen=True)
class Loop:
    condition: str
    body: Seq


@dataclass(frozen=True)
class Cond:
    condition: str
    then: Seq
    orelse: Seq | None = None


Node = Step | Seq | Loop | Cond


@dataclass(frozen=True)
class SCoT:
    io: IoDecl
    body: Seq


# --- printer ----------------------------------------------------------------

def _format_param(p: Param) -> str:
    return f"{p.name}: {p.type}"


def _print_block(seq: Seq, level: int, out: list[str]) -> None:
    pad = INDENT * level
    for number, node in enumerate(seq.children, start=1):
        if isinstance(node, Step):
            out.append(f"{pad}{number}. Step: {node.text}")
        elif isinstance(node, Loop):
            out.append(f"{pad}{number}. Loop: {node.condition}")
            _print_block(node.body, level + 1, out)
        elif isinstance(node, Cond):
            out.append(f"{pad}{number}. Cond: {node.condition}")
            out.append(f"{pad}{INDENT}Then:")
            _print_block(node.then, level + 2, out)
            if node.orelse is not None:
                out.append(f"{pad}{INDENT}Else:")
                _print_block(node.orelse, level + 2, out)
        else:  # nested bare Seq is not printable; the grammar has no syntax for it
            raise TypeError(f"unprintable node {node!r}")


def print_scot(chain: SCoT) -> str:
    if chain.io.inputs:
        inputs = "; ".join(_format_param(p) for p in chain.io.inputs)
    else:
        inputs = "none"
    output = _format_param(chain.io.output) if chain.io.output else "none"
    lines = [f"Input: {inputs}", f"Output: {output}"]
    _print_block(chain.body, 0, lines)
    return "\n".join(lines) + "\n"


# --- parser -----------------------------------------------------------------

_STMT = re.compile(r"^( *)(\d+)\. (Step|Loop|Cond): (.*)$")
_LABEL = re.compile(r"^( *)(Then|Else):\s*$")
_PARAM = re.compile(r"^([A-Za-z_]\w*): (.+)$")


class _Lines:
    def __init__(self, text: str):
        self.lines = [ln for ln in text.split("\n") if ln.strip()]
        self.numbers = []
        n = 0
        for ln in text.split("\n"):
            n += 1
            if ln.strip():
                self.numbers.append(n)
        self.pos = 0

    def peek(self) -> str | None:
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def lineno(self) -> int:
        if self.pos < len(self.numbers):
            return self.numbers[self.pos]
        return self.numbers[-1] + 1 if self.numbers else 1

    def advance(self) -> str:
        line = self.lines[self.pos]
        self.pos += 1
        return line


def _parse_params(raw: str, lineno: int, what: str) -> tuple[Param, ...]:
    raw = raw.strip()
    if raw == "none":
        return ()
    params = []
    for piece in raw.split(";"):
        m = _PARAM.match(piece.strip())
        if not m:
            raise ScotParseError(lineno, f"{what} declaration 'name: type'")
        params.append(Param(m.group(1), m.group(2).strip()))
    return tuple(params)


def _indent_width(line: str) -> int:
    return len(line) - len(line.lstrip(" "))


def _parse_block(src: _Lines, level: int) -> Seq:
    children: list[Node] = []
    expected_number = 1
    while True:
        line = src.peek()
        if line is None:
            break
        if "\t" in line[: _indent_width(line) + 1]:
            raise ScotParseError(src.lineno(), "space indentation (no tabs)")
        if _indent_width(line) < level * len(INDENT):
            break
        m = _STMT.match(line)
        if not m or len(m.group(1)) != level * len(INDENT):
            if children:
                break
            raise ScotParseError(src.lineno(), f"statement at indent {level * len(INDENT)}")
        if int(m.group(2)) != expected_number:
            raise ScotParseError(src.lineno(), f"statement number {expected_number}")
        src.advance()
        keyword, text = m.group(3), m.group(4).strip()
        if keyword == "Step":
            children.append(Step(text))
        elif keyword == "Loop":
            children.append(Loop(text, _parse_block(src, level + 1)))
        else:
            then_line = src.peek()
            label = _LABEL.match(then_line) if then_line is not None else None
            if not label or label.group(2) != "Then" or len(label.group(1)) != (level + 1) * len(INDENT):
                raise ScotParseError(src.lineno(), "Then:")
            src.advance()
            then_block = _parse_block(src, level + 2)
            orelse = None
            else_line = src.peek()
            label = _LABEL.match(else_line) if else_line is not None else None
            if label and label.group(2) == "Else" and len(label.group(1)) == (level + 1) * len(INDENT):
                src.advance()
                orelse = _parse_block(src, level + 2)
            children.append(Cond(text, then_block, orelse))
        expected_number += 1
    return Seq(tuple(children))


def parse_scot(text: str) -> SCoT:
    """Parse chain text into an AST; raises ScotParseError with line and
    expectation on the first deviation from the grammar."""
    src = _Lines(text)
    line = src.peek()
    if line is None or not line.startswith("Input:"):
        raise ScotParseError(src.lineno(), "Input:")
    inputs = _parse_params(src.advance()[len("Input:"):], src.lineno() - 1, "input")
    line = src.peek()
    if line is None or not line.startswith("Output:"):
        raise ScotParseError(src.lineno(), "Output:")
    raw_out = src.advance()[len("Output:"):].strip()
    if raw_out == "none":
        output = None
    else:
        outputs = _parse_params(raw_out, src.lineno() - 1, "output")
        if len(outputs) != 1:
            raise ScotParseError(src.lineno() - 1, "exactly one output declaration")
        output = outputs[0]
    body = _parse_block(src, 0)
    if src.peek() is not None:
        raise ScotParseError(src.lineno(), "end of chain")
    return SCoT(IoDecl(inputs, output), body)


# --- validator --------------------------------------------------------------

# Lexical approximation of the three-construct restriction: step and
# condition text must not smuggle in control flow outside Seq/Cond/Loop.
BLACKLIST = tuple(
    re.compile(p, re.IGNORECASE)
    for p in (
        r"\bgoto\b",
        r"\brecurs(e|es|ed|ion|ive|ively)\b",
        r"\bcalls? itself\b",
        r"\blongjmp\b",
        r"\bsetjmp\b",
        r"\bjump to label\b",
        r"\b(raise|throw)\b[^.]*\bto (exit|break|terminate)\b",
        r"\bexception-driven\b",
    )
)


@dataclass(frozen=True)
class ChainFinding:
    code: str
    detail: str

    def __str__(self) -> str:
        return f"{self.code}: {self.detail}"


def _scan_text(text: str, where: str, findings: list[ChainFinding]) -> None:
    for pattern in BLACKLIST:
        m = pattern.search(text)
        if m:
            findings.append(
                ChainFinding("construct", f"{where}: forbidden construct {m.group(0)!r}")
            )
            return


def _walk(node: Node, path: str, findings: list[ChainFinding]) -> None:
    if isinstance(node, Step):
        if not node.text:
            findings.append(ChainFinding("empty-step", path))
        else:
            _scan_text(node.text, path, findings)
    elif isinstance(node, Loop):
        if not node.condition:
            findings.append(ChainFinding("empty-condition", path))
        else:
            _scan_text(node.condition, path, findings)
        if not node.body.children:
            findings.append(ChainFinding("empty-branch", f"{path}: loop body"))
        _walk(node.body, path + "/loop", findings)
    elif isinstance(node, Cond):
        if not node.condition:
            findings.append(ChainFinding("empty-condition", path))
        else:
            _scan_text(node.condition, path, findings)
        if not node.then.children:
            findings.append(ChainFinding("empty-branch", f"{path}: then"))
        if node.orelse is not None and not node.orelse.children:
            findings.append(ChainFinding("empty-branch", f"{path}: else"))
        _walk(node.then, path + "/then", findings)
        if node.orelse is not None:
            _walk(node.orelse, path + "/else", findings)
    else:
        for i, child in enumerate(node.children):
            _walk(child, f"{path}.{i + 1}", findings)


def validate_scot(chain: SCoT) -> tuple[ChainFinding, ...]:
    """Report-only structural check: forbidden constructs in step text,
    missing I/O types, empty branches."""
    findings: list[ChainFinding] = []
    for p in chain.io.inputs:
        if not p.type or p.type.upper() == "UNKNOWN":
            findings.append(ChainFinding("missing-io-type", f"input {p.name}"))
    if chain.io.output is not None and (
        not chain.io.output.type or chain.io.output.type.upper() == "UNKNOWN"
    ):
        findings.append(ChainFinding("missing-io-type", f"output {chain.io.output.name}"))
    if not chain.body.children:
        findings.append(ChainFinding("empty-branch", "body"))
    _walk(chain.body, "body", findings)
    return tuple(findings)


# --- random generation (round-trip testing) ---------------------------------

_WORDS = (
    "scan", "queue", "packet", "merge", "count", "flows", "table", "probe",
    "update", "window", "order", "route", "batch", "split", "score", "emit",
)


def _random_text(rng: Random) -> str:
    return " ".join(rng.choice(_WORDS) for _ in range(rng.randint(1, 5)))


def _random_block(rng: Random, depth: int, max_depth: int) -> Seq:
    children: list[Node] = []
    for _ in range(rng.randint(1, 3)):
        roll = rng.random()
        if depth >= max_depth or roll < 0.55:
            children.append(Step(_random_text(rng)))
        elif roll < 0.8:
            children.append(Loop(_random_text(rng), _random_block(rng, depth + 1, max_depth)))
        else:
            orelse = _random_block(rng, depth + 1, max_depth) if rng.random() < 0.5 else None
            children.append(
                Cond(_random_text(rng), _random_block(rng, depth + 1, max_depth), orelse)
            )
    return Seq(tuple(children))


def random_scot(rng: Random, max_depth: int = 5) -> SCoT:
    """Generate a random grammar-conforming chain (for round-trip tests)."""
    inputs = tuple(
        Param(f"arg{i}", rng.choice(("int", "float", "str", "list of int", "list of float")))
        for i in range(rng.randint(0, 3))
    )
    output = None if rng.random() < 0.3 else Param("result", rng.choice(("int", "list of int", "bool")))
    return SCoT(IoDecl(inputs, output), _random_block(rng, 1, max_depth))
