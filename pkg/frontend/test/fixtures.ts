/** Recorded API payloads from a dry-run project (shape-faithful). */

import type {
  DivisionResponse,
  MetricsReport,
  ProjectState,
  RepairEpisode,
  TranscriptSession,
} from "../src/types.js";

export const STATE_SCAFFOLDED: ProjectState = {
  project_id: "proj",
  stage: "Scaffolded",
  failed_stage: null,
  failed_reason: null,
  revision: 3,
  artifact_index: {
    bundle: "bundle",
    metadata: "metadata.json",
    modules: "modules.json",
    "scot:packet_sampler": "scots/packet_sampler.scot.md",
  },
  config: {},
  session_seq: 3,
};

export const DIVISION_UNAPPROVED: DivisionResponse = {
  division: {
    modules: [
      {
        name: "packet_sampler",
        brief_description: "Admit packets whose flow hash falls below the threshold",
        detailed_description: "Hashes the flow identifier to 32 bits.",
        inputs: [{ name: "flow_id", hint: "string flow identifier" }],
        outputs: [{ name: "admitted_bytes", hint: "integer sampled byte count" }],
        paper_refs: ["4 Design"],
        depends_on: [],
        flags: [],
      },
      {
        name: "rate_estimator",
        brief_description: "Convert admitted byte counts into rate estimates",
        detailed_description: "Divides by window, scales by inverse probability.",
        inputs: [{ name: "admitted_bytes", hint: "integer sampled byte count" }],
        outputs: [{ name: "rate", hint: "float bytes per second" }],
        paper_refs: ["4 Design"],
        depends_on: ["packet_sampler"],
        flags: [],
      },
    ],
    approved: false,
    revision: 1,
  },
  findings: { errors: [], warnings: [] },
};

export const DIVISION_INVALID: DivisionResponse = {
  division: { ...DIVISION_UNAPPROVED.division },
  findings: {
    errors: ["dangling-dependency: rate_estimator -> ghost_module"],
    warnings: ["io-closure: rate_estimator input 'admitted_bytes' has no producer"],
  },
};

export const EPISODE_OPEN: RepairEpisode = {
  error_id: "e0001",
  class: { major: "Semantic", minor: "Logical" },
  context: { kind: "tests", module: "rate_estimator", failing_case: null, verdict: "Fail" },
  session_id: "s0009-repair",
  attempts: [
    {
      prompt_index: 0,
      patch_applied: false,
      passed: false,
      report: {
        phase: "Test",
        exit_code: 0,
        stdout: "250.0",
        stderr: "",
        duration_ms: 40,
        timed_out: false,
        truncated: false,
      },
    },
  ],
  human_steps: [],
  resolved: false,
  escalated: true,
  human_prompt_count: 0,
  automatic_prompt_count: 3,
  wall_clock_ms: 9000,
  tag: "module",
};

export const SESSIONS: TranscriptSession[] = [
  {
    session_id: "s0001-extract",
    backend: "stub-model",
    stage: "extract",
    records: [
      {
        index: 0,
        origin: "Automatic",
        stage: "extract",
        rendered_text: "Q1: ...",
        response_text: '{"sub_domain": "Network Measurement"}',
        started_at: 0,
        duration_ms: 1000,
        tokens_in: 120,
        tokens_out: 14,
        flags: [],
      },
      {
        index: 1,
        origin: "Human",
        stage: "extract",
        rendered_text: "merge the modules",
        response_text: '{"modules": []}',
        started_at: 2,
        duration_ms: 1000,
        tokens_in: 5,
        tokens_out: 4,
        flags: [],
      },
    ],
  },
  {
    session_id: "s0002-scaffold",
    backend: "stub-model",
    stage: "scaffold",
    records: [
      {
        index: 0,
        origin: "Automatic",
        stage: "scaffold",
        rendered_text: "plan please",
        response_text: "Input: none\nOutput: none\n1. Step: go",
        started_at: 4,
        duration_ms: 1000,
        tokens_in: 9,
        tokens_out: 11,
        flags: ["attachments-as-captions"],
      },
    ],
  },
];

export const METRICS: MetricsReport = {
  stage_durations_ms: { CodeGeneration: 12, ErrorCorrection: 24, PaperReading: 60000 },
  prompt_counts: {
    extract: { Automatic: 2 },
    repair: { Automatic: 1, Human: 1 },
  },
  origin_shares: {
    Automatic: { numerator: 3, denominator: 4, value: 0.75 },
    Human: { numerator: 1, denominator: 4, value: 0.25 },
  },
  error_stats: {
    "Semantic/Logical": {
      count: 1,
      repair_time_ms: 30000,
      automatic_prompts: 1,
      human_prompts: 3,
      resolved: 0,
    },
    "Syntactic/VariableAccess": {
      count: 1,
      repair_time_ms: 10000,
      automatic_prompts: 2,
      human_prompts: 1,
      resolved: 1,
    },
  },
  regression: { slope: 10000, intercept: 0, r: 1 },
  total_records: 4,
  total_episodes: 2,
};
