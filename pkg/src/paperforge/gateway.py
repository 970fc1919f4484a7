"""Uniform access to chat backends with budgets and transcript logging.

Two backend families share one session interface: a remote
chat-completions endpoint (``https://...``) and a deterministic scripted
stub (``stub:<script.json>``). Stub scripts are an ordered list of rules::

    [{"match": "substring", "reply": "..."},
     {"regex": "(?s)pattern", "reply": "...", "max_uses": 1}]

The first rule matching the rendered prompt text wins; an exhausted or
unmatched send raises StubExhausted. Identical scripts and send sequences
produce byte-identical transcripts (pair a stub with a TickClock).

Token budgeting uses a chars/4 estimator (rounded up) by default; pass a
custom ``estimator`` for exact counting. Conversational context carries
the most recent prior turns that fit the budget, dropping oldest first.
"""
from __future__ import annotations

import json
import math
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from .errors import (
    BackendError,
    BackendUnreachable,
    BudgetExceeded,
    RejectedProfile,
    StubExhausted,
)
from .prompting import RenderedPrompt

AUTOMATIC = "Automatic"
HUMAN = "Human"


def estimate_tokens(text: str) -> int:
    """Deterministic token estimate: ceil(len/4). Monotone in length."""
    return math.ceil(len(text) / 4)


@dataclass(frozen=True)
class BackendProfile:
    name: str
    endpoint: str
    max_context_tokens: int
    max_output_tokens: int
    multimodal: bool = False
    temperature: float = 0.0
    seed: int | None = None

    def __post_init__(self) -> None:
        if not (self.max_context_tokens >= self.max_output_tokens > 0):
            raise RejectedProfile(
                f"{self.name}: need max_context >= max_output > 0, got "
                f"{self.max_context_tokens}/{self.max_output_tokens}"
            )


@dataclass(frozen=True)
class PromptRecord:
    index: int
    origin: str  # Automatic | Human
    stage: str
    rendered_text: str
    response_text: str
    started_at: float
    duration_ms: int
    tokens_in: int
    tokens_out: int
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "origin": self.origin,
            "stage": self.stage,
            "rendered_text": self.rendered_text,
            "response_text": self.response_text,
            "started_at": self.started_at,
            "duration_ms": self.duration_ms,
            "tokens_in": self.tokens_in,
            "tokens_out": self.tokens_out,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PromptRecord":
        return cls(
            index=data["index"],
            origin=data["origin"],
            stage=data["stage"],
            rendered_text=data["rendered_text"],
            response_text=data["response_text"],
            started_at=data["started_at"],
            duration_ms=data["duration_ms"],
            tokens_in=data["tokens_in"],
            tokens_out=data["tokens_out"],
            flags=tuple(data.get("flags", ())),
        )


@dataclass(frozen=True)
class Transcript:
    session_id: str
    backend_name: str
    stage: str
    records: tuple[PromptRecord, ...]


# --- clocks -------------------------------------------------------------------

class Clock(Protocol):
    def now(self) -> float: ...


class RealClock:
    def now(self) -> float:
        return time.time()


class TickClock:
    """Logical clock advancing a fixed step per reading; deterministic."""

    def __init__(self, start: float = 0.0, step: float = 1.0):
        self._t = start
        self._step = step

    def now(self) -> float:
        value = self._t
        self._t += self._step
        return value


# --- backends -----------------------------------------------------------------

class Backend(Protocol):
    def complete(self, messages: list[dict], profile: BackendProfile) -> str: ...


@dataclass
class StubRule:
    reply: str
    match: str | None = None
    regex: str | None = None
    max_uses: int | None = None
    uses: int = 0

    def matches(self, text: str) -> bool:
        if self.max_uses is not None and self.uses >= self.max_uses:
            return False
        if self.regex is not None:
            return re.search(self.regex, text) is not None
        return (self.match or "") in text


class StubBackend:
    """Replays scripted replies; first matching rule wins."""

    def __init__(self, rules: list[StubRule]):
        self._rules = rules

    @classmethod
    def from_script(cls, script: list[dict]) -> "StubBackend":
        rules = [
            StubRule(
                reply=entry["reply"],
                match=entry.get("match"),
                regex=entry.get("regex"),
                max_uses=entry.get("max_uses"),
            )
            for entry in script
        ]
        return cls(rules)

    @classmethod
    def from_file(cls, path: str | Path) -> "StubBackend":
        return cls.from_script(json.loads(Path(path).read_text("utf-8")))

    def complete(self, messages: list[dict], profile: BackendProfile) -> str:
        prompt_text = messages[-1]["content"]
        for rule in self._rules:
            if rule.matches(prompt_text):
                rule.uses += 1
                return rule.reply
        raise StubExhausted(f"no scripted reply matches prompt: {prompt_text[:120]!r}")


API_KEY_ENV = "PAPERFORGE_API_KEY"


class HttpBackend:
    """Chat-completions-style JSON over HTTP(S); one retry on 5xx."""

    def __init__(self, endpoint: str, retry_backoff_s: float = 1.0):
        self.endpoint = endpoint
        self.retry_backoff_s = retry_backoff_s

    def complete(self, messages: list[dict], profile: BackendProfile) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body = {
            "model": profile.name,
            "messages": messages,
            "max_tokens": profile.max_output_tokens,
            "temperature": profile.temperature,
        }
        if profile.seed is not None:
            body["seed"] = profile.seed
        last_status = 0
        for attempt in range(2):
            try:
                resp = requests.post(self.endpoint, json=body, headers=headers, timeout=120)
            except requests.RequestException as exc:
                raise BackendUnreachable(f"{self.endpoint}: {exc}") from exc
            if resp.status_code < 300:
                payload = resp.json()
                return payload["choices"][0]["message"]["content"]
            last_status = resp.status_code
            if 500 <= resp.status_code < 600 and attempt == 0:
                time.sleep(self.retry_backoff_s)
                continue
            break
        raise BackendError(last_status, resp.text[:500])


def backend_for(profile: BackendProfile, script_root: Path | None = None) -> Backend:
    if profile.endpoint.startswith("stub:"):
        script_path = Path(profile.endpoint[len("stub:"):])
        if script_root is not None and not script_path.is_absolute():
            script_path = script_root / script_path
        return StubBackend.from_file(script_path)
    return HttpBackend(profile.endpoint)


# --- sessions -----------------------------------------------------------------

SYSTEM_PREAMBLE = (
    "You are a careful engineering assistant reproducing a networking "
    "system from its research paper. Follow output format instructions "
    "exactly."
)


@dataclass
class Session:
    id: str
    stage: str
    profile: BackendProfile
    records: list[PromptRecord] = field(default_factory=list)

    def transcript(self) -> Transcript:
        return Transcript(self.id, self.profile.name, self.stage, tuple(self.records))


class Gateway:
    """Owns a backend, a clock, and the session counter.

    Sessions are single-owner: no concurrent sends on one session.
    Distinct sessions may run in parallel.
    """

    def __init__(
        self,
        profile: BackendProfile,
        backend: Backend | None = None,
        clock: Clock | None = None,
        estimator: Callable[[str], int] = estimate_tokens,
        script_root: Path | None = None,
    ):
        self.profile = profile
        self.backend = backend or backend_for(profile, script_root)
        # Stub runs default to a logical clock so transcripts are
        # byte-identical across runs; remote runs keep wall-clock time.
        if clock is None:
            clock = TickClock() if profile.endpoint.startswith("stub:") else RealClock()
        self.clock = clock
        self.estimator = estimator
        self._session_seq = 0

    @property
    def session_seq(self) -> int:
        return self._session_seq

    @session_seq.setter
    def session_seq(self, value: int) -> None:
        self._session_seq = value

    def open_session(self, stage: str) -> Session:
        self._session_seq += 1
        return Session(id=f"s{self._session_seq:04d}-{stage}", stage=stage, profile=self.profile)

    def reopen_session(self, transcript: Transcript) -> Session:
        """Restore a session's conversational context from its transcript."""
        session = Session(
            id=transcript.session_id,
            stage=transcript.stage,
            profile=self.profile,
            records=list(transcript.records),
        )
        seq = _session_seq_of(transcript.session_id)
        if seq is not None:
            self._session_seq = max(self._session_seq, seq)
        return session

    def _assemble_messages(self, session: Session, prompt_text: str) -> list[dict]:
        new_cost = self.estimator(prompt_text)
        preamble_cost = self.estimator(SYSTEM_PREAMBLE)
        budget = self.profile.max_context_tokens - new_cost - preamble_cost
        kept: list[dict] = []
        for record in reversed(session.records):
            cost = record.tokens_in + record.tokens_out
            if cost > budget:
                break  # oldest turns drop first
            budget -= cost
            kept.append({"role": "assistant", "content": record.response_text})
            kept.append({"role": "user", "content": record.rendered_text})
        messages = [{"role": "system", "content": SYSTEM_PREAMBLE}]
        messages.extend(reversed(kept))
        messages.append({"role": "user", "content": prompt_text})
        return messages

    def send(self, session: Session, prompt: RenderedPrompt, origin: str = AUTOMATIC) -> str:
        """Send one prompt; appends exactly one record on success.

        Raises BudgetExceeded (no record appended) when the prompt alone
        exceeds the profile's context budget.
        """
        if origin not in (AUTOMATIC, HUMAN):
            raise ValueError(f"origin must be Automatic or Human, got {origin!r}")
        text = prompt.text
        flags: tuple[str, ...] = ()
        if prompt.attachments:
            if self.profile.multimodal:
                flags = ("attachments-native",)
            else:
                captions = "\n".join(
                    f"[attachment {a.element_id} ({a.kind})]: {a.caption}"
                    for a in prompt.attachments
                )
                text = f"{text}\n\n{captions}"
                flags = ("attachments-as-captions",)

        estimate = self.estimator(text)
        if estimate > self.profile.max_context_tokens:
            raise BudgetExceeded(estimate, self.profile.max_context_tokens)

        messages = self._assemble_messages(session, text)
        started = self.clock.now()
        response = self.backend.complete(messages, self.profile)
        duration_ms = int(round((self.clock.now() - started) * 1000))
        session.records.append(
            PromptRecord(
                index=len(session.records),
                origin=origin,
                stage=session.stage,
                rendered_text=text,
                response_text=response,
                started_at=started,
                duration_ms=duration_ms,
                tokens_in=estimate,
                tokens_out=self.estimator(response),
                flags=flags,
            )
        )
        return response


def _session_seq_of(session_id: str) -> int | None:
    m = re.match(r"^s(\d+)-", session_id)
    return int(m.group(1)) if m else None


# --- transcript persistence -----------------------------------------------------

def export_transcript(transcript: Transcript, path: str | Path) -> Path:
    """Write a transcript as JSON lines: one header line, one line per record."""
    path = Path(path)
    header = {
        "session_id": transcript.session_id,
        "backend": transcript.backend_name,
        "stage": transcript.stage,
    }
    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(json.dumps(r.to_dict(), sort_keys=True) for r in transcript.records)
    path.write_text("\n".join(lines) + "\n", "utf-8")
    return path


def load_transcript(path: str | Path) -> Transcript:
    lines = Path(path).read_text("utf-8").splitlines()
    if not lines:
        raise OSError(f"empty transcript file: {path}")
    header = json.loads(lines[0])
    records = tuple(PromptRecord.from_dict(json.loads(line)) for line in lines[1:])
    return Transcript(header["session_id"], header["backend"], header["stage"], records)
