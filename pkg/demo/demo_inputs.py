"""Demo inputs: a synthetic paper bundle and the stub script that drives it.

The bundle describes FlowMark, a small fictional measurement system with
two modules: a hash-based packet sampler and a rate estimator. The stub
script scripts every backend reply the pipeline needs, so the whole
workflow runs deterministically offline. The test suite builds its
fixtures from this module too.
"""
from __future__ import annotations

import json
from pathlib import Path

from paperforge.sandbox import default_python_toolchain

# --- reference implementations used to compute expected test outputs ---------
# These mirror the code the stub backend "generates"; the scripted test
# cases freeze their outputs as expected literals.

FNV_OFFSET = 2166136261
FNV_PRIME = 16777619
MASK32 = 4294967296


def fnv_hash(flow_id: str) -> int:
    digest = FNV_OFFSET
    for ch in flow_id.encode("utf-8"):
        digest = (digest ^ ch) * FNV_PRIME % MASK32
    return digest


# --- bundle -------------------------------------------------------------------

ABSTRACT = """\
FlowMark samples packets with a deterministic hash filter and turns the
sampled counts into per-flow rate estimates. The design needs no per-packet
state beyond a single counter per tracked flow.

Operators deploy FlowMark at the collector, where it consumes flow records
and emits rate estimates once per measurement window.
"""

INTRODUCTION = """\
Measuring per-flow rates at line speed is expensive because per-packet
bookkeeping competes with forwarding for memory bandwidth.

Sampling reduces that cost, but naive random sampling makes the resulting
estimates hard to reproduce across runs and across vantage points.

FlowMark instead derives its sampling decision from a hash of the flow
identifier, so every observer admits exactly the same packets.

We contribute a deterministic sampling filter, an unbiased rate estimator
on top of it, and an evaluation on packet traces from two campus networks.
"""

BACKGROUND = """\
Prior collectors either keep exact per-flow counters or sample packets
uniformly at random. Exact counters blow up memory on heavy-tailed flow
size distributions; uniform sampling keeps memory flat but yields
non-reproducible admission decisions.

Hash-based admission has been used for load balancing, where a keyed hash
of the connection tuple picks a path. FlowMark reuses that trick for
measurement.
"""

ARCHITECTURE = """\
FlowMark is a two-stage pipeline placed between the record source and the
reporting sink. The first stage is the sampler, which decides per packet
whether the packet's flow participates in measurement. The second stage is
the estimator, which converts admitted byte counts into rate estimates.

Both stages are stateless across windows: the sampler needs only the
threshold, and the estimator needs the window length and the sampling
probability.

[element: fig1]
"""

DESIGN = """\
The sampler computes a 32-bit hash of the flow identifier and admits the
packet when the hash value falls below the sampling threshold. Flows hash
once; the admission decision is therefore identical for every packet of
the flow and for every observer using the same threshold.

```formula id=eq1
\\hat{r} = \\frac{c}{w \\cdot p}
```

The estimator divides the admitted byte count by the measurement window
and scales by the inverse sampling probability to recover the true rate.
A window or probability that is not positive yields an estimate of zero
rather than a division error.

```formula id=eq2
p = \\frac{T}{2^{32}}
```

The sampling probability follows from the threshold: a threshold of T out
of the full 32-bit hash space admits a fraction T over two to the 32 of
all flows.

```pseudocode id=alg1
\\begin{algorithmic}
\\STATE admit the packet if h(f) < T
\\end{algorithmic}
```
"""

EVALUATION = """\
On both campus traces the estimator stays within five percent of the true
per-flow rate for flows above one megabit per second, while admitting
under three percent of packets.

Reproducibility holds by construction: two collectors with the same
threshold admitted identical packet sets in every run.
"""

DISCUSSION = """\
Deterministic admission concentrates error on the unlucky flows whose
hashes fall just above the threshold; rotating the hash key between
windows trades reproducibility for coverage.

We leave adaptive thresholds to future work.
"""

APPENDIX = """\
Trace capture used standard port mirroring; timestamps were aligned to
the collector clock before windowing.
"""


def make_bundle(root: Path) -> Path:
    """Write the 8-section bundle (2 formulas, 1 pseudocode, 1 figure)."""
    bundle = root
    (bundle / "sections").mkdir(parents=True, exist_ok=True)
    (bundle / "assets").mkdir(parents=True, exist_ok=True)
    sections = [
        ("Abstract", "sections/00_abstract.txt", ABSTRACT, None),
        ("1 Introduction", "sections/01_introduction.txt", INTRODUCTION, None),
        ("2 Background", "sections/02_background.txt", BACKGROUND, None),
        ("3 System Architecture", "sections/03_architecture.txt", ARCHITECTURE, None),
        ("4 Design", "sections/04_design.txt", DESIGN, None),
        ("5 Evaluation", "sections/05_evaluation.txt", EVALUATION, None),
        ("6 Discussion", "sections/06_discussion.txt", DISCUSSION, None),
        ("Appendix A", "sections/07_appendix.txt", APPENDIX, "Appendices"),
    ]
    manifest = {
        "id": "flowmark",
        "title": "FlowMark: Lightweight Per-Flow Sampling for Rate Estimation",
        "sections": [],
        "assets": [
            {
                "id": "fig1",
                "kind": "Figure",
                "file": "assets/fig1.png",
                "caption": "FlowMark pipeline: sampler feeding the estimator",
            }
        ],
    }
    for heading, file, text, hint in sections:
        (bundle / file).write_text(text, "utf-8")
        entry = {"heading": heading, "file": file}
        if hint:
            entry["kind_hint"] = hint
        manifest["sections"].append(entry)
    (bundle / "assets/fig1.png").write_bytes(b"\x89PNG\r\n\x1a\nstub")
    (bundle / "manifest.json").write_text(json.dumps(manifest, indent=2), "utf-8")
    return bundle


# --- scripted backend replies ----------------------------------------------------

METADATA_REPLY = {
    "sub_domain": "Network Measurement",
    "system_name": "FlowMark",
    "deployment_type": "collector-side software",
    "problem_statement": (
        "Estimate per-flow rates from a small, reproducible sample of packets "
        "instead of per-packet bookkeeping."
    ),
    "system_inputs": [
        {"name": "flow_id", "hint": "string flow identifier"},
        {"name": "threshold", "hint": "integer sampling threshold"},
        {"name": "window", "hint": "float measurement window in seconds"},
        {"name": "probability", "hint": "float sampling probability"},
    ],
    "system_outputs": [{"name": "rate", "hint": "float bytes per second"}],
    "architecture_features": [
        "two-stage pipeline",
        "stateless across windows",
        "deterministic hash admission",
    ],
}

DIVISION_REPLY = {
    "modules": [
        {
            "name": "packet_sampler",
            "brief_description": "Admit packets whose flow hash falls below the threshold",
            "detailed_description": (
                "Hashes the flow identifier to 32 bits and admits the packet when "
                "the hash is below the sampling threshold, so the decision is "
                "identical for every packet of a flow."
            ),
            "inputs": [
                {"name": "flow_id", "hint": "string flow identifier"},
                {"name": "threshold", "hint": "integer sampling threshold"},
            ],
            "outputs": [{"name": "admitted_bytes", "hint": "integer sampled byte count"}],
            "paper_refs": ["4 Design"],
            "depends_on": [],
        },
        {
            "name": "rate_estimator",
            "brief_description": "Convert admitted byte counts into per-flow rate estimates",
            "detailed_description": (
                "Divides the admitted byte count by the measurement window and "
                "scales by the inverse sampling probability; non-positive windows "
                "or probabilities yield zero."
            ),
            "inputs": [
                {"name": "admitted_bytes", "hint": "integer sampled byte count"},
                {"name": "window", "hint": "float seconds"},
                {"name": "probability", "hint": "float sampling probability"},
            ],
            "outputs": [{"name": "rate", "hint": "float bytes per second"}],
            "paper_refs": ["4 Design"],
            "depends_on": ["packet_sampler"],
        },
    ]
}

SAMPLER_SCOT = """\
Input: flow_id: str; threshold: int
Output: admitted: bool
1. Step: hash the flow identifier into a 32-bit value
2. Cond: the hash value is below the threshold
    Then:
        1. Step: admit the packet
    Else:
        1. Step: reject the packet
3. Step: return the decision
"""

ESTIMATOR_SCOT = """\
Input: admitted_bytes: int; window: float; probability: float
Output: rate: float
1. Step: validate the window and the probability
2. Cond: the window or the probability is not positive
    Then:
        1. Step: return zero
    Else:
        1. Step: continue with the scaled division
3. Step: divide the admitted bytes by the window and scale by the inverse probability
4. Step: return the rate estimate
"""

SAMPLER_SKELETON = """\
```python
FNV_OFFSET = 2166136261
FNV_PRIME = 16777619
MASK32 = 4294967296


def hash_flow(flow_id: str) -> int:
    return 0


def should_sample(flow_id: str, threshold: int) -> bool:
    return False
```
"""

ESTIMATOR_SKELETON = """\
```python
def estimate_rate(admitted_bytes: int, window: float, probability: float) -> float:
    return 0.0
```
"""

HASH_QUOTE = "The sampler computes a 32-bit hash of the flow identifier"
SAMPLE_QUOTE = "admits the packet when the hash value falls below the sampling threshold"
ESTIMATE_QUOTE = (
    "divides the admitted byte count by the measurement window and scales by "
    "the inverse sampling probability"
)

HASH_SECOT = """\
Data Flow:
1. flow_id: from parameter `flow_id`; the flow identifier string
2. digest: from hashing `flow_id`; 32-bit running accumulator
Control Flow:
1. iterate over the encoded bytes of `flow_id`, folding each into `digest`
2. keep `digest` inside 32 bits after every fold and return it
Summary: FNV-style 32-bit hash of the flow identifier
"""

SAMPLE_SECOT = """\
Data Flow:
1. flow_id: from parameter `flow_id`; identifier whose hash gates admission
2. threshold: from parameter `threshold`; admission cut-off
3. digest: from hash_flow of `flow_id`; 32-bit hash value
Control Flow:
1. compute `digest` once per call
2. if `digest` is below `threshold`, admit; otherwise reject
Summary: threshold test on the deterministic flow hash
"""

ESTIMATE_SECOT = """\
Data Flow:
1. admitted_bytes: from parameter `admitted_bytes`; sampled byte count
2. window: from parameter `window`; measurement window seconds
3. probability: from parameter `probability`; sampling probability
4. rate: from scaling `admitted_bytes`; final estimate
Control Flow:
1. if `window` or `probability` is not positive, return zero
2. otherwise divide `admitted_bytes` by `window` and by `probability` into `rate`
Summary: unbiased rate estimate with guarded division
"""

HASH_IMPL = """\
```python
def hash_flow(flow_id: str) -> int:
    digest = 2166136261
    for ch in flow_id.encode("utf-8"):
        digest = (digest ^ ch) * 16777619 % 4294967296
    return digest
```
"""

SAMPLE_IMPL = """\
```python
def should_sample(flow_id: str, threshold: int) -> bool:
    return hash_flow(flow_id) < threshold
```
"""

ESTIMATE_IMPL = """\
```python
def estimate_rate(admitted_bytes: int, window: float, probability: float) -> float:
    if window <= 0 or probability <= 0:
        return 0.0
    return admitted_bytes / window / probability
```
"""


def _cases_reply(cases: list[dict]) -> str:
    return json.dumps({"cases": cases})


def pipeline_script() -> list[dict]:
    """Stub rules driving the whole dry run; first match wins."""
    hash_a = fnv_hash("flowA")
    hash_b = fnv_hash("flowB")
    return [
        {"match": "Q1:", "reply": json.dumps(METADATA_REPLY)},
        {"match": "[REVIEWER FEEDBACK]", "reply": json.dumps(DIVISION_REPLY)},
        {
            "match": "functional modules",
            "reply": json.dumps(DIVISION_REPLY),
        },
        # content mapping (T5), most specific first
        {
            "regex": "(?s)Map the function below.*def hash_flow",
            "reply": json.dumps(
                {
                    "requirement": "Hash the flow identifier into the 32-bit space.",
                    "original_text": HASH_QUOTE,
                }
            ),
        },
        {
            "regex": "(?s)Map the function below.*def should_sample",
            "reply": json.dumps(
                {
                    "requirement": "Admit the packet when the flow hash is below the threshold.",
                    "original_text": SAMPLE_QUOTE,
                }
            ),
        },
        {
            "regex": "(?s)Map the function below.*def estimate_rate",
            "reply": json.dumps(
                {
                    "requirement": "Scale admitted bytes by window and inverse probability.",
                    "original_text": ESTIMATE_QUOTE,
                }
            ),
        },
        # reasoning chains (T3)
        {
            "regex": "(?s)structured pseudo-code chain.*Module packet_sampler",
            "reply": SAMPLER_SCOT,
        },
        {
            "regex": "(?s)structured pseudo-code chain.*Module rate_estimator",
            "reply": ESTIMATOR_SCOT,
        },
        # skeletons (T4)
        {
            "regex": "(?s)framework-level code skeleton.*Module packet_sampler",
            "reply": SAMPLER_SKELETON,
        },
        {
            "regex": "(?s)framework-level code skeleton.*Module rate_estimator",
            "reply": ESTIMATOR_SKELETON,
        },
        # per-function semantic chains / implementations / tests (T6)
        {
            "regex": "(?s)def hash_flow.*Produce the semantic reasoning chain",
            "reply": HASH_SECOT,
        },
        {
            "regex": "(?s)def should_sample.*Produce the semantic reasoning chain",
            "reply": SAMPLE_SECOT,
        },
        {
            "regex": "(?s)def estimate_rate.*Produce the semantic reasoning chain",
            "reply": ESTIMATE_SECOT,
        },
        {
            "regex": "(?s)def hash_flow.*Implement the function following",
            "reply": HASH_IMPL,
        },
        {
            "regex": "(?s)def should_sample.*Implement the function following",
            "reply": SAMPLE_IMPL,
        },
        {
            "regex": "(?s)def estimate_rate.*Implement the function following",
            "reply": ESTIMATE_IMPL,
        },
        {
            "regex": "(?s)def hash_flow.*Produce test cases for the function",
            "reply": _cases_reply(
                [
                    {
                        "name": "hash_flow_a",
                        "input": ["flowA"],
                        "expected": {"literal": str(hash_a)},
                    },
                    {
                        "name": "hash_flow_b",
                        "input": ["flowB"],
                        "expected": {"literal": str(hash_b)},
                    },
                ]
            ),
        },
        {
            "regex": "(?s)def should_sample.*Produce test cases for the function",
            "reply": _cases_reply(
                [
                    {
                        "name": "admits_below_threshold",
                        "input": ["flowA", hash_a + 1],
                        "expected": {"literal": "true"},
                    },
                    {
                        "name": "rejects_at_threshold",
                        "input": ["flowA", hash_a],
                        "expected": {"literal": "false"},
                    },
                ]
            ),
        },
        {
            "regex": "(?s)def estimate_rate.*Produce test cases for the function",
            "reply": _cases_reply(
                [
                    {
                        "name": "scales_by_inverse_probability",
                        "input": [1000, 2.0, 0.5],
                        "expected": {"literal": "1000.0"},
                    },
                    {
                        "name": "zero_window_is_zero",
                        "input": [5, 0, 0.5],
                        "expected": {"literal": "0.0"},
                    },
                ]
            ),
        },
        # integration cases (T10)
        {
            "match": "implemented and assembled",
            "reply": _cases_reply(
                [
                    {
                        "name": "sampler_feeds_estimator",
                        "function": "rate_estimator.estimate_rate",
                        "input": [1200, 2.0, 0.5],
                        "expected": {"literal": "1200.0"},
                    },
                    {
                        "name": "full_hash_space_admits",
                        "function": "packet_sampler.should_sample",
                        "input": ["flowA", MASK32],
                        "expected": {"literal": "true"},
                    },
                ]
            ),
        },
    ]


def write_config(path: Path, endpoint: str, max_context: int = 200000,
                 max_output: int = 8192) -> Path:
    config = {
        "backend": {
            "name": "stub-model",
            "endpoint": endpoint,
            "max_context_tokens": max_context,
            "max_output_tokens": max_output,
        },
        "toolchain": default_python_toolchain().to_dict(),
        "retry_limit": 3,
        "max_attempts": {"Syntactic": 5, "Semantic": 3},
        "exemplar_k": 2,
    }
    path.write_text(json.dumps(config, indent=2), "utf-8")
    return path


def make_project_inputs(workdir: Path) -> tuple[Path, Path, Path]:
    """Bundle dir, config path, and project dir pre-seeded with the stub
    script (referenced by a project-relative endpoint)."""
    workdir.mkdir(parents=True, exist_ok=True)
    bundle = make_bundle(workdir / "bundle-src")
    project_dir = workdir / "proj"
    project_dir.mkdir(exist_ok=True)
    (project_dir / "stub_script.json").write_text(
        json.dumps(pipeline_script(), indent=2), "utf-8"
    )
    config = write_config(workdir / "config.json", "stub:stub_script.json")
    return bundle, config, project_dir
