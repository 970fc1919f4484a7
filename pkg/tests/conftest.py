"""Shared fixtures, built from the demo inputs in demo/demo_inputs.py.

The demo module is the source of truth for the synthetic paper bundle and
the scripted stub backend; tests re-export its names so fixture content
lives in exactly one place.
"""
from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "demo"))

from demo_inputs import (  # noqa: E402,F401
    ABSTRACT,
    ARCHITECTURE,
    BACKGROUND,
    DESIGN,
    DISCUSSION,
    DIVISION_REPLY,
    ESTIMATE_IMPL,
    ESTIMATE_QUOTE,
    ESTIMATE_SECOT,
    ESTIMATOR_SCOT,
    ESTIMATOR_SKELETON,
    EVALUATION,
    HASH_IMPL,
    HASH_QUOTE,
    HASH_SECOT,
    INTRODUCTION,
    MASK32,
    METADATA_REPLY,
    SAMPLE_IMPL,
    SAMPLE_QUOTE,
    SAMPLE_SECOT,
    SAMPLER_SCOT,
    SAMPLER_SKELETON,
    fnv_hash,
    make_bundle,
    pipeline_script,
    write_config,
)
from demo_inputs import make_project_inputs as _make_project_inputs  # noqa: E402


def make_project_inputs(workdir: Path) -> tuple[Path, Path, Path]:
    return _make_project_inputs(Path(workdir))


@pytest.fixture()
def bundle_dir(tmp_path: Path) -> Path:
    return make_bundle(tmp_path / "bundle")


@pytest.fixture()
def project_inputs(tmp_path: Path) -> tuple[Path, Path, Path]:
    return make_project_inputs(tmp_path)
