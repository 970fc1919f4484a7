/** Pure view builders: API payloads in, view models and HTML strings out.
 *
 * Every number and string shown comes straight from the payload; the only
 * client-side computation is display geometry (bar widths, scatter
 * coordinates). The regression line uses the server's slope/intercept,
 * never a client-side refit.
 */

import { escapeHtml, formatDuration, formatShare, formatTimestamp, truncate } from "./format.js";
import type {
  DivisionResponse,
  MetricsReport,
  ProjectState,
  PromptRecord,
  RepairEpisode,
  TranscriptSession,
} from "./types.js";

export const STAGE_ORDER = [
  "Initialized",
  "Extracted",
  "DivisionApproved",
  "Scaffolded",
  "FunctionsGenerated",
  "Integrated",
  "Done",
] as const;

// --- status board -------------------------------------------------------------

export interface StatusBoard {
  projectId: string;
  stage: string;
  failed: string | null;
  revision: number;
  ladder: { name: string; reached: boolean; current: boolean }[];
  artifacts: { name: string; path: string }[];
}

export function buildStatusBoard(state: ProjectState): StatusBoard {
  const position = STAGE_ORDER.indexOf(state.stage as (typeof STAGE_ORDER)[number]);
  const reachedUpTo = state.stage === "Repairing" ? STAGE_ORDER.indexOf("Integrated") : position;
  return {
    projectId: state.project_id,
    stage: state.stage,
    failed: state.failed_stage ? `${state.failed_stage}: ${state.failed_reason ?? ""}` : null,
    revision: state.revision,
    ladder: STAGE_ORDER.map((name, i) => ({
      name,
      reached: reachedUpTo >= 0 && i <= reachedUpTo,
      current: name === state.stage,
    })),
    artifacts: Object.entries(state.artifact_index)
      .sort(([a], [b]) => a.localeCompare(b))
      .map(([name, path]) => ({ name, path })),
  };
}

export function renderStatusBoard(board: StatusBoard): string {
  const ladder = board.ladder
    .map((step) => {
      const cls = step.current ? "step current" : step.reached ? "step reached" : "step";
      return `<span class="${cls}">${escapeHtml(step.name)}</span>`;
    })
    .join('<span class="arrow">→</span>');
  const failed = board.failed
    ? `<p class="error">failed — ${escapeHtml(board.failed)}</p>`
    : "";
  const artifacts = board.artifacts
    .map(
      (a) =>
        `<tr><td>${escapeHtml(a.name)}</td><td><code>${escapeHtml(a.path)}</code></td></tr>`,
    )
    .join("");
  return `
    <h2>${escapeHtml(board.projectId)} <span class="badge stage">${escapeHtml(board.stage)}</span>
      <span class="muted">revision ${board.revision}</span></h2>
    ${failed}
    <div class="ladder">${ladder}</div>
    <table class="kv"><thead><tr><th>artifact</th><th>path</th></tr></thead>
    <tbody>${artifacts}</tbody></table>`;
}

// --- division editor ------------------------------------------------------------

export interface DivisionView {
  approved: boolean;
  revision: number;
  errors: string[];
  warnings: string[];
  canApprove: boolean;
  canRefine: boolean;
  modules: {
    name: string;
    brief: string;
    detailed: string;
    inputs: string[];
    outputs: string[];
    dependsOn: string[];
    paperRefs: string[];
    flags: string[];
  }[];
}

export function buildDivisionView(payload: DivisionResponse): DivisionView {
  const division = payload.division;
  return {
    approved: division.approved,
    revision: division.revision,
    errors: payload.findings.errors,
    warnings: payload.findings.warnings,
    canApprove: !division.approved && payload.findings.errors.length === 0,
    canRefine: !division.approved,
    modules: division.modules.map((m) => ({
      name: m.name,
      brief: m.brief_description,
      detailed: m.detailed_description,
      inputs: m.inputs.map((i) => `${i.name}: ${i.hint}`),
      outputs: m.outputs.map((o) => `${o.name}: ${o.hint}`),
      dependsOn: m.depends_on,
      paperRefs: m.paper_refs,
      flags: m.flags,
    })),
  };
}

export function renderDivision(view: DivisionView): string {
  const findings = [
    ...view.errors.map((f) => `<li class="error">${escapeHtml(f)}</li>`),
    ...view.warnings.map((f) => `<li class="warning">${escapeHtml(f)}</li>`),
  ].join("");
  const modules = view.modules
    .map(
      (m) => `
      <div class="card">
        <h3>${escapeHtml(m.name)}${m.flags.map((f) => ` <span class="badge flag">${escapeHtml(f)}</span>`).join("")}</h3>
        <p>${escapeHtml(m.brief)}</p>
        <p class="muted">${escapeHtml(m.detailed)}</p>
        <dl>
          <dt>inputs</dt><dd>${m.inputs.map(escapeHtml).join("; ") || "—"}</dd>
          <dt>outputs</dt><dd>${m.outputs.map(escapeHtml).join("; ") || "—"}</dd>
          <dt>depends on</dt><dd>${m.dependsOn.map(escapeHtml).join(", ") || "—"}</dd>
          <dt>paper refs</dt><dd>${m.paperRefs.map(escapeHtml).join(", ") || "—"}</dd>
        </dl>
      </div>`,
    )
    .join("");
  const status = view.approved
    ? `<span class="badge ok">approved (revision ${view.revision})</span>`
    : `<span class="badge pending">unapproved (revision ${view.revision})</span>`;
  return `
    <h2>Module division ${status}</h2>
    <ul class="findings">${findings || '<li class="muted">no findings</li>'}</ul>
    ${modules}
    <div class="actions">
      <input id="actor" placeholder="your name" ${view.canApprove ? "" : "disabled"}>
      <button id="approve" ${view.canApprove ? "" : "disabled"}>Approve</button>
      <textarea id="feedback" placeholder="refinement feedback"
        ${view.canRefine ? "" : "disabled"}></textarea>
      <button id="refine" ${view.canRefine ? "" : "disabled"}>Submit refinement</button>
    </div>`;
}

// --- repair console ----------------------------------------------------------------

export interface EpisodeRow {
  errorId: string;
  klass: string;
  tag: string;
  module: string;
  resolved: boolean;
  escalated: boolean;
  attemptCount: number;
  automaticPrompts: number;
  humanPrompts: number;
  wallClockMs: number;
  canPrompt: boolean;
  diagnostics: string;
}

export function buildEpisodeRows(episodes: RepairEpisode[]): EpisodeRow[] {
  return episodes.map((e) => {
    const last = [...e.human_steps, ...e.attempts].filter((a) => a.report !== null).pop();
    const report = last?.report ?? null;
    return {
      errorId: e.error_id,
      klass: `${e.class.major}/${e.class.minor}`,
      tag: e.tag,
      module: e.context.module,
      resolved: e.resolved,
      escalated: e.escalated,
      attemptCount: e.attempts.length,
      automaticPrompts: e.automatic_prompt_count,
      humanPrompts: e.human_prompt_count,
      wallClockMs: e.wall_clock_ms,
      canPrompt: !e.resolved,
      diagnostics: report ? `${report.stderr}\n${report.stdout}`.trim() : "",
    };
  });
}

export function renderRepairs(rows: EpisodeRow[]): string {
  if (rows.length === 0) {
    return "<h2>Repair episodes</h2><p class='muted'>no episodes recorded</p>";
  }
  const body = rows
    .map((r) => {
      const status = r.resolved
        ? '<span class="badge ok">resolved</span>'
        : r.escalated
          ? '<span class="badge error">awaiting human</span>'
          : '<span class="badge pending">open</span>';
      const prompt = r.canPrompt
        ? `<textarea id="prompt-${escapeHtml(r.errorId)}" placeholder="handcrafted repair prompt"></textarea>
           <button class="human-prompt" data-episode="${escapeHtml(r.errorId)}">Send human prompt</button>`
        : "";
      return `
      <div class="card" id="episode-${escapeHtml(r.errorId)}">
        <h3>${escapeHtml(r.errorId)} ${status}
          <span class="badge">${escapeHtml(r.klass)}</span>
          <span class="muted">${escapeHtml(r.tag)} / ${escapeHtml(r.module)}</span></h3>
        <p>attempts ${r.attemptCount} · automatic prompts ${r.automaticPrompts} ·
           human prompts <span class="human-count">${r.humanPrompts}</span> ·
           ${formatDuration(r.wallClockMs)}</p>
        <pre class="diagnostics">${escapeHtml(truncate(r.diagnostics))}</pre>
        ${prompt}
      </div>`;
    })
    .join("");
  return `<h2>Repair episodes</h2>${body}`;
}

// --- transcript browser -----------------------------------------------------------------

export interface TranscriptView {
  stages: string[];
  rows: {
    sessionId: string;
    stage: string;
    index: number;
    origin: "Automatic" | "Human";
    prompt: string;
    response: string;
    startedAt: string;
    durationMs: number;
    tokensIn: number;
    tokensOut: number;
    flags: string[];
  }[];
}

export function buildTranscriptView(
  sessions: TranscriptSession[],
  stageFilter: string | null = null,
): TranscriptView {
  const stages = [...new Set(sessions.map((s) => s.stage))].sort();
  const rows = [];
  for (const session of sessions) {
    if (stageFilter && session.stage !== stageFilter) continue;
    for (const record of session.records) {
      rows.push({
        sessionId: session.session_id,
        stage: record.stage,
        index: record.index,
        origin: record.origin,
        prompt: record.rendered_text,
        response: record.response_text,
        startedAt: formatTimestamp(record.started_at),
        durationMs: record.duration_ms,
        tokensIn: record.tokens_in,
        tokensOut: record.tokens_out,
        flags: record.flags,
      });
    }
  }
  return { stages, rows };
}

export function originBadge(origin: PromptRecord["origin"]): string {
  const cls = origin === "Human" ? "badge human" : "badge automatic";
  return `<span class="${cls}">${origin}</span>`;
}

export function renderTranscripts(view: TranscriptView, stageFilter: string | null): string {
  const options = ['<option value="">all stages</option>']
    .concat(
      view.stages.map(
        (s) =>
          `<option value="${escapeHtml(s)}"${s === stageFilter ? " selected" : ""}>${escapeHtml(s)}</option>`,
      ),
    )
    .join("");
  const rows = view.rows
    .map(
      (r) => `
      <details class="record">
        <summary>${originBadge(r.origin)}
          <code>${escapeHtml(r.sessionId)}#${r.index}</code>
          <span class="badge">${escapeHtml(r.stage)}</span>
          <span class="muted">${escapeHtml(r.startedAt)} · ${r.durationMs} ms ·
            ${r.tokensIn}→${r.tokensOut} tokens</span>
          ${r.flags.map((f) => `<span class="badge flag">${escapeHtml(f)}</span>`).join("")}
        </summary>
        <h4>prompt</h4><pre>${escapeHtml(truncate(r.prompt, 4000))}</pre>
        <h4>response</h4><pre>${escapeHtml(truncate(r.response, 4000))}</pre>
      </details>`,
    )
    .join("");
  return `
    <h2>Transcripts <select id="stage-filter">${options}</select></h2>
    <p class="muted">${view.rows.length} records</p>
    ${rows}`;
}

// --- metrics dashboard ----------------------------------------------------------------------

export interface MetricsView {
  durationBars: { label: string; ms: number; widthPct: number }[];
  originBars: {
    stage: string;
    segments: { origin: string; count: number; widthPct: number }[];
    total: number;
  }[];
  shareLines: string[];
  errorRows: {
    klass: string;
    count: number;
    repairTimeMs: number;
    automaticPrompts: number;
    humanPrompts: number;
    resolved: number;
  }[];
  scatter: {
    points: { x: number; y: number; px: number; py: number }[];
    line: { x1: number; y1: number; x2: number; y2: number } | null;
    slopeLabel: string | null;
  };
  totals: { records: number; episodes: number };
}

const PLOT_W = 360;
const PLOT_H = 200;

export function buildMetricsView(report: MetricsReport): MetricsView {
  const durations = Object.entries(report.stage_durations_ms).sort();
  const maxMs = Math.max(1, ...durations.map(([, ms]) => ms));
  const durationBars = durations.map(([label, ms]) => ({
    label,
    ms,
    widthPct: (ms / maxMs) * 100,
  }));

  const originBars = Object.entries(report.prompt_counts)
    .sort()
    .map(([stage, origins]) => {
      const total = Object.values(origins).reduce((a, b) => a + b, 0);
      const segments = Object.entries(origins)
        .sort()
        .map(([origin, count]) => ({
          origin,
          count,
          widthPct: total ? (count / total) * 100 : 0,
        }));
      return { stage, segments, total };
    });

  const shareLines = Object.entries(report.origin_shares)
    .sort()
    .map(
      ([origin, share]) =>
        `${origin}: ${formatShare(share.numerator, share.denominator, share.value)}`,
    );

  const errorRows = Object.entries(report.error_stats)
    .sort()
    .map(([klass, stats]) => ({
      klass,
      count: stats.count,
      repairTimeMs: stats.repair_time_ms,
      automaticPrompts: stats.automatic_prompts,
      humanPrompts: stats.human_prompts,
      resolved: stats.resolved,
    }));

  // scatter of (human prompts, repair time) per class aggregate is not the
  // plot the server regressed over; per-episode points live in /repairs.
  // The dashboard plots the regression line from the server fit and marks
  // the per-class aggregates for orientation.
  const points = errorRows.map((row) => ({ x: row.humanPrompts, y: row.repairTimeMs }));
  const xMax = Math.max(1, ...points.map((p) => p.x));
  const yMax = Math.max(1, ...points.map((p) => p.y));
  const placed = points.map((p) => ({
    ...p,
    px: (p.x / xMax) * PLOT_W,
    py: PLOT_H - (p.y / yMax) * PLOT_H,
  }));
  let line: MetricsView["scatter"]["line"] = null;
  let slopeLabel: string | null = null;
  if (report.regression) {
    const { slope, intercept } = report.regression;
    const y0 = intercept;
    const y1 = slope * xMax + intercept;
    line = {
      x1: 0,
      y1: PLOT_H - (y0 / yMax) * PLOT_H,
      x2: PLOT_W,
      y2: PLOT_H - (y1 / yMax) * PLOT_H,
    };
    slopeLabel = `slope ${report.regression.slope} · intercept ${report.regression.intercept} · r ${report.regression.r}`;
  }
  return {
    durationBars,
    originBars,
    shareLines,
    errorRows,
    scatter: { points: placed, line, slopeLabel },
    totals: { records: report.total_records, episodes: report.total_episodes },
  };
}

export function renderMetrics(view: MetricsView): string {
  const durations = view.durationBars
    .map(
      (b) => `
      <div class="bar-row"><span class="bar-label">${escapeHtml(b.label)}</span>
        <div class="bar" style="width:${b.widthPct}%"></div>
        <span class="bar-value">${formatDuration(b.ms)}</span></div>`,
    )
    .join("");
  const origins = view.originBars
    .map((row) => {
      const segments = row.segments
        .map(
          (s) =>
            `<div class="segment ${s.origin.toLowerCase()}" style="width:${s.widthPct}%"
              title="${escapeHtml(s.origin)}: ${s.count}">${s.count}</div>`,
        )
        .join("");
      return `<div class="bar-row"><span class="bar-label">${escapeHtml(row.stage)}</span>
        <div class="stacked">${segments}</div>
        <span class="bar-value">${row.total}</span></div>`;
    })
    .join("");
  const errors = view.errorRows
    .map(
      (r) => `<tr><td>${escapeHtml(r.klass)}</td><td>${r.count}</td>
        <td>${formatDuration(r.repairTimeMs)}</td><td>${r.automaticPrompts}</td>
        <td>${r.humanPrompts}</td><td>${r.resolved}</td></tr>`,
    )
    .join("");
  const dots = view.scatter.points
    .map((p) => `<circle cx="${p.px}" cy="${p.py}" r="4"><title>(${p.x}, ${p.y} ms)</title></circle>`)
    .join("");
  const line = view.scatter.line
    ? `<line x1="${view.scatter.line.x1}" y1="${view.scatter.line.y1}"
        x2="${view.scatter.line.x2}" y2="${view.scatter.line.y2}" class="fit"></line>`
    : "";
  const slope = view.scatter.slopeLabel
    ? `<p class="muted">${escapeHtml(view.scatter.slopeLabel)}</p>`
    : '<p class="muted">regression undefined (needs two distinct x values)</p>';
  return `
    <h2>Metrics</h2>
    <p class="muted">${view.totals.records} prompt records · ${view.totals.episodes} repair episodes</p>
    <h3>Stage durations</h3>${durations || '<p class="muted">none</p>'}
    <h3>Prompts by stage and origin</h3>${origins || '<p class="muted">none</p>'}
    <p>${view.shareLines.map(escapeHtml).join(" · ")}</p>
    <h3>Error classes</h3>
    <table class="kv"><thead><tr><th>class</th><th>count</th><th>repair time</th>
      <th>automatic</th><th>human</th><th>resolved</th></tr></thead>
    <tbody>${errors || ""}</tbody></table>
    <h3>Repair time vs human prompts</h3>
    <svg class="scatter" viewBox="0 0 ${PLOT_W} ${PLOT_H}">${dots}${line}</svg>
    ${slope}`;
}
