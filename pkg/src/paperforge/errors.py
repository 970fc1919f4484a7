"""Exception hierarchy shared across the pipeline.

Every domain error derives from PaperforgeError so callers can catch the
whole family. Plain file-system failures propagate as OSError.
"""
from __future__ import annotations


class PaperforgeError(Exception):
    """Base class for all domain errors raised by this package."""


# --- document -------------------------------------------------------------

class MissingManifest(PaperforgeError):
    """Bundle directory has no readable manifest.json."""


class MalformedSection(PaperforgeError):
    def __init__(self, file: str, reason: str):
        super().__init__(f"{file}: {reason}")
        self.file = file
        self.reason = reason


class DanglingElementRef(PaperforgeError):
    def __init__(self, element_id: str, reason: str = ""):
        detail = f"{element_id}: {reason}" if reason else element_id
        super().__init__(detail)
        self.element_id = element_id


class SelectorUnsatisfied(PaperforgeError):
    def __init__(self, selector: str):
        super().__init__(f"selector cannot be satisfied: {selector}")
        self.selector = selector


class EmptyQuote(PaperforgeError):
    """Verbatim search received an empty quote."""


# --- prompting ------------------------------------------------------------

class DuplicateId(PaperforgeError):
    pass


class RejectedDefinition(PaperforgeError):
    """Template definition violates its own placeholder invariant."""


class MissingBinding(PaperforgeError):
    def __init__(self, name: str):
        super().__init__(f"missing binding: {name}")
        self.name = name


class UnknownTemplate(PaperforgeError):
    pass


class ContractViolation(PaperforgeError):
    """Backend response does not satisfy the output contract.

    Retry-eligible: pipeline stages re-ask with the reason appended.
    """

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class NoExemplars(PaperforgeError):
    def __init__(self, kind: str):
        super().__init__(f"no exemplars of kind {kind}")
        self.kind = kind


# --- gateway --------------------------------------------------------------

class RejectedProfile(PaperforgeError):
    pass


class BackendUnreachable(PaperforgeError):
    pass


class BudgetExceeded(PaperforgeError):
    def __init__(self, estimate: int, limit: int):
        super().__init__(f"prompt estimate {estimate} exceeds context budget {limit}")
        self.estimate = estimate
        self.limit = limit


class BackendError(PaperforgeError):
    def __init__(self, status: int, detail: str = ""):
        super().__init__(f"backend error {status}: {detail}")
        self.status = status


class StubExhausted(PaperforgeError):
    """Scripted stub has no reply matching the rendered prompt."""


# --- stages ---------------------------------------------------------------

class StageFailed(PaperforgeError):
    def __init__(self, stage: str, reason: str):
        super().__init__(f"stage {stage} failed: {reason}")
        self.stage = stage
        self.reason = reason


class CyclicDependencies(PaperforgeError):
    def __init__(self, names: tuple[str, ...]):
        super().__init__(f"cyclic module dependencies: {' -> '.join(names)}")
        self.names = names


class RejectedRefinement(PaperforgeError):
    pass


class ValidationErrorsPresent(PaperforgeError):
    def __init__(self, findings: tuple):
        super().__init__("; ".join(str(f) for f in findings))
        self.findings = findings


class ScotParseError(PaperforgeError):
    def __init__(self, line: int, expected: str):
        super().__init__(f"line {line}: expected {expected}")
        self.line = line
        self.expected = expected


class SecotParseError(PaperforgeError):
    def __init__(self, line: int, expected: str):
        super().__init__(f"line {line}: expected {expected}")
        self.line = line
        self.expected = expected


class SignatureDrift(PaperforgeError):
    def __init__(self, expected: str, got: str):
        super().__init__(f"signature drift: expected {expected!r}, got {got!r}")
        self.expected = expected
        self.got = got


class UnfilledPlaceholders(PaperforgeError):
    def __init__(self, names: tuple[str, ...]):
        super().__init__(f"unfilled placeholders: {', '.join(names)}")
        self.names = names


class BuildFailed(PaperforgeError):
    def __init__(self, report):
        super().__init__("build failed")
        self.report = report


class RejectedUnit(PaperforgeError):
    pass


# --- sandbox --------------------------------------------------------------

class ToolMissing(PaperforgeError):
    def __init__(self, command: str):
        super().__init__(f"toolchain command not found: {command}")
        self.command = command


class AdapterMissing(PaperforgeError):
    pass


# --- repair ---------------------------------------------------------------

class EmptyPrompt(PaperforgeError):
    pass


class EpisodeResolved(PaperforgeError):
    pass


# --- workbench ------------------------------------------------------------

class ConfigError(PaperforgeError):
    def __init__(self, key: str, reason: str = ""):
        detail = f"{key}: {reason}" if reason else key
        super().__init__(f"bad config entry {detail}")
        self.key = key


class RefusedExisting(PaperforgeError):
    pass


class OutOfOrderStage(PaperforgeError):
    def __init__(self, requested: str, current: str):
        super().__init__(f"stage {requested} cannot run from state {current}")
        self.requested = requested
        self.current = current


class CorruptWorkspace(PaperforgeError):
    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class UnbalancedTimer(PaperforgeError):
    pass


class PortInUse(PaperforgeError):
    def __init__(self, port: int):
        super().__init__(f"port {port} already in use")
        self.port = port


class LockHeld(PaperforgeError):
    def __init__(self, pid: int):
        super().__init__(f"project lock held by pid {pid}")
        self.pid = pid
