"""Project configuration: backend profile, toolchain, limits, toggles."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigError, RejectedProfile
from ..gateway import BackendProfile
from ..sandbox import ToolchainConfig, default_python_toolchain

_TOP_KEYS = {
    "backend",
    "toolchain",
    "retry_limit",
    "max_attempts",
    "exemplar_k",
    "preventive_preambles",
    "run_generated_tests",
}

_BACKEND_KEYS = {
    "name",
    "endpoint",
    "max_context_tokens",
    "max_output_tokens",
    "multimodal",
    "temperature",
    "seed",
}

_PREAMBLE_KEYS = {"variable_types", "iterable_decls", "output_format"}

PREAMBLE_FRAGMENTS = {
    "variable_types": (
        "- Pre-declare every variable you introduce with its data type in a "
        "comment before first use (for example: variable x is a "
        "floating-point number)."
    ),
    "iterable_decls": (
        "- Any variable that will be iterated over must be declared as an "
        "iterable object (a list or a string), and stated as such."
    ),
    "output_format": (
        "- Outputs must follow the declared structural schema exactly: "
        "include every required attribute, in the documented shape."
    ),
}


@dataclass(frozen=True)
class Config:
    backend: BackendProfile
    toolchain: ToolchainConfig
    retry_limit: int = 3
    max_attempts: dict = field(default_factory=lambda: {"Syntactic": 5, "Semantic": 3})
    exemplar_k: int = 2
    preventive_preambles: dict = field(
        default_factory=lambda: {k: False for k in _PREAMBLE_KEYS}
    )
    run_generated_tests: bool = True

    def preamble_text(self) -> str:
        """Assembled generation-time guideline fragment, per the toggles."""
        lines = [
            PREAMBLE_FRAGMENTS[key]
            for key in ("variable_types", "iterable_decls", "output_format")
            if self.preventive_preambles.get(key)
        ]
        if not lines:
            return ""
        return "Additional generation rules:\n" + "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        backend = {
            "name": self.backend.name,
            "endpoint": self.backend.endpoint,
            "max_context_tokens": self.backend.max_context_tokens,
            "max_output_tokens": self.backend.max_output_tokens,
            "multimodal": self.backend.multimodal,
            "temperature": self.backend.temperature,
            "seed": self.backend.seed,
        }
        return {
            "backend": backend,
            "toolchain": self.toolchain.to_dict(),
            "retry_limit": self.retry_limit,
            "max_attempts": dict(self.max_attempts),
            "exemplar_k": self.exemplar_k,
            "preventive_preambles": dict(self.preventive_preambles),
            "run_generated_tests": self.run_generated_tests,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        for key in data:
            if key not in _TOP_KEYS:
                raise ConfigError(key, "unknown key")
        if "backend" not in data:
            raise ConfigError("backend", "required")
        for key in data["backend"]:
            if key not in _BACKEND_KEYS:
                raise ConfigError(f"backend.{key}", "unknown key")
        try:
            backend = BackendProfile(
                name=data["backend"]["name"],
                endpoint=data["backend"]["endpoint"],
                max_context_tokens=data["backend"]["max_context_tokens"],
                max_output_tokens=data["backend"]["max_output_tokens"],
                multimodal=data["backend"].get("multimodal", False),
                temperature=data["backend"].get("temperature", 0.0),
                seed=data["backend"].get("seed"),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError("backend", str(exc)) from exc
        except RejectedProfile as exc:
            raise ConfigError("backend", str(exc)) from exc

        if "toolchain" in data:
            try:
                toolchain = ToolchainConfig.from_dict(data["toolchain"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError("toolchain", str(exc)) from exc
        else:
            toolchain = default_python_toolchain()

        max_attempts = data.get("max_attempts", {"Syntactic": 5, "Semantic": 3})
        for key in max_attempts:
            if key not in ("Syntactic", "Semantic"):
                raise ConfigError(f"max_attempts.{key}", "unknown key")
        preambles = {k: False for k in _PREAMBLE_KEYS}
        for key, value in data.get("preventive_preambles", {}).items():
            if key not in _PREAMBLE_KEYS:
                raise ConfigError(f"preventive_preambles.{key}", "unknown key")
            preambles[key] = bool(value)

        return cls(
            backend=backend,
            toolchain=toolchain,
            retry_limit=int(data.get("retry_limit", 3)),
            max_attempts=dict(max_attempts),
            exemplar_k=int(data.get("exemplar_k", 2)),
            preventive_preambles=preambles,
            run_generated_tests=bool(data.get("run_generated_tests", True)),
        )


def load_config(path: str | Path) -> Config:
    path = Path(path)
    try:
        data = json.loads(path.read_text("utf-8"))
    except FileNotFoundError:
        raise ConfigError(str(path), "config file missing") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from exc
    return Config.from_dict(data)
