/** Payload shapes of the workbench HTTP API, mirrored one to one. */

export interface ProjectState {
  project_id: string;
  stage: string;
  failed_stage: string | null;
  failed_reason: string | null;
  revision: number;
  artifact_index: Record<string, string>;
  config: unknown;
  session_seq: number;
}

export interface IOItem {
  name: string;
  hint: string;
}

export interface ModuleSpec {
  name: string;
  brief_description: string;
  detailed_description: string;
  inputs: IOItem[];
  outputs: IOItem[];
  paper_refs: string[];
  depends_on: string[];
  flags: string[];
}

export interface ModuleDivision {
  modules: ModuleSpec[];
  approved: boolean;
  revision: number;
}

export interface DivisionResponse {
  division: ModuleDivision;
  findings: {
    errors: string[];
    warnings: string[];
  };
}

export interface PromptRecord {
  index: number;
  origin: "Automatic" | "Human";
  stage: string;
  rendered_text: string;
  response_text: string;
  started_at: number;
  duration_ms: number;
  tokens_in: number;
  tokens_out: number;
  flags: string[];
}

export interface TranscriptSession {
  session_id: string;
  backend: string;
  stage: string;
  records: PromptRecord[];
}

export interface TranscriptsResponse {
  sessions: TranscriptSession[];
}

export interface ExecutionReport {
  phase: string;
  exit_code: number;
  stdout: string;
  stderr: string;
  duration_ms: number;
  timed_out: boolean;
  truncated: boolean;
}

export interface RepairAttempt {
  prompt_index: number;
  patch_applied: boolean;
  passed: boolean;
  report: ExecutionReport | null;
}

export interface RepairEpisode {
  error_id: string;
  class: { major: string; minor: string };
  context: {
    kind: string;
    module: string;
    failing_case: unknown;
    verdict: string | null;
  };
  session_id: string;
  attempts: RepairAttempt[];
  human_steps: RepairAttempt[];
  resolved: boolean;
  escalated: boolean;
  human_prompt_count: number;
  automatic_prompt_count: number;
  wall_clock_ms: number;
  tag: string;
}

export interface RepairsResponse {
  episodes: RepairEpisode[];
}

export interface OriginShare {
  numerator: number;
  denominator: number;
  value: number;
}

export interface ErrorStats {
  count: number;
  repair_time_ms: number;
  automatic_prompts: number;
  human_prompts: number;
  resolved: number;
}

export interface Regression {
  slope: number;
  intercept: number;
  r: number;
}

export interface MetricsReport {
  stage_durations_ms: Record<string, number>;
  prompt_counts: Record<string, Record<string, number>>;
  origin_shares: Record<string, OriginShare>;
  error_stats: Record<string, ErrorStats>;
  regression: Regression | null;
  total_records: number;
  total_episodes: number;
}

export interface ModuleArtifacts {
  unit: unknown;
  files: Record<string, string>;
  scot?: string;
  secots?: Record<string, string>;
  tests?: Record<string, string>;
}

export interface ApiFailure {
  error: string;
  detail: string;
  findings?: string[];
}
