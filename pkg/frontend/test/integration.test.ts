/** Console parity against live workbench APIs.
 *
 * Spawns the demo builder (which drives the real CLI) for three project
 * variants, serves each over HTTP, and checks that every view renders the
 * server's values verbatim, that a human repair prompt increments the
 * episode's Human count by exactly one, and that approving an invalid
 * division surfaces the 409 findings.
 *
 * Run with: npm run test:integration
 */
import { type ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiError, WorkbenchClient } from "../src/api.js";
import {
  buildDivisionView,
  buildEpisodeRows,
  buildMetricsView,
  buildStatusBoard,
  buildTranscriptView,
  renderRepairs,
} from "../src/views.js";

const REPO_ROOT = resolve(__dirname, "../..");
const DEMO = join(REPO_ROOT, "demo/run_demo.py");
const PYTHON = process.env.PYTHON ?? "python3";

interface Server {
  proc: ChildProcess;
  client: WorkbenchClient;
  workdir: string;
}

const servers: Record<string, Server> = {};
const BASE_PORT = 48730 + (process.pid % 500);

async function waitForApi(client: WorkbenchClient, timeoutMs = 120_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      await client.getState();
      return;
    } catch {
      if (Date.now() > deadline) throw new Error(`API at ${client.baseUrl} never came up`);
      await new Promise((r) => setTimeout(r, 300));
    }
  }
}

async function startServer(variant: string, port: number): Promise<Server> {
  const workdir = mkdtempSync(join(tmpdir(), `console-${variant}-`));
  const proc = spawn(
    PYTHON,
    [DEMO, "--workdir", workdir, "--variant", variant, "--serve-port", String(port)],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  let stderr = "";
  proc.stderr?.on("data", (chunk: Buffer) => {
    stderr += chunk.toString();
  });
  proc.on("exit", (code) => {
    if (code !== null && code !== 0) {
      console.error(`demo ${variant} exited ${code}:\n${stderr}`);
    }
  });
  const client = new WorkbenchClient(`http://127.0.0.1:${port}`);
  await waitForApi(client);
  return { proc, client, workdir };
}

beforeAll(async () => {
  const variants = ["done", "repairing", "invalid-division"];
  const started = await Promise.all(
    variants.map((variant, i) => startServer(variant, BASE_PORT + i)),
  );
  variants.forEach((variant, i) => {
    servers[variant] = started[i]!;
  });
}, 300_000);

afterAll(() => {
  for (const server of Object.values(servers)) {
    server.proc.kill("SIGTERM");
    rmSync(server.workdir, { recursive: true, force: true });
  }
});

describe("status board parity", () => {
  it("renders the live state verbatim", async () => {
    const client = servers["done"]!.client;
    const state = await client.getState();
    const board = buildStatusBoard(state);
    expect(board.stage).toBe("Done");
    expect(board.projectId).toBe(state.project_id);
    expect(board.revision).toBe(state.revision);
    expect(board.artifacts.map((a) => a.path).sort()).toEqual(
      Object.values(state.artifact_index).sort(),
    );
  });
});

describe("division editor parity", () => {
  it("shows the approved division with its validation findings", async () => {
    const client = servers["done"]!.client;
    const payload = await client.getDivision();
    const view = buildDivisionView(payload);
    expect(view.approved).toBe(true);
    expect(view.canApprove).toBe(false);
    expect(view.modules.map((m) => m.name)).toEqual(
      payload.division.modules.map((m) => m.name),
    );
  });

  it("surfaces 409 findings when approving an invalid division", async () => {
    const client = servers["invalid-division"]!.client;
    const payload = await client.getDivision();
    const view = buildDivisionView(payload);
    expect(view.errors.length).toBeGreaterThan(0);
    expect(view.canApprove).toBe(false); // approve stays disabled

    const failure = await client.approveDivision("console-user").catch((e: ApiError) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect((failure as ApiError).status).toBe(409);
    const findings = (failure as ApiError).body.findings ?? [];
    expect(findings.some((f) => f.includes("ghost_module"))).toBe(true);
    // the view-model findings mirror the server's 409 findings
    for (const finding of findings) {
      expect(view.errors).toContain(finding);
    }
  });
});

describe("repair console parity", () => {
  it("human prompt increments the episode's Human count by exactly 1", async () => {
    const client = servers["repairing"]!.client;
    const before = await client.getRepairs();
    const open = before.episodes.find((e) => !e.resolved);
    expect(open).toBeDefined();
    const row = buildEpisodeRows([open!])[0]!;
    expect(row.canPrompt).toBe(true);
    expect(renderRepairs([row])).toContain(
      `<span class="human-count">${open!.human_prompt_count}</span>`,
    );

    const { episode } = await client.sendHumanPrompt(
      open!.error_id,
      "divide by the probability instead of multiplying",
    );
    expect(episode.human_prompt_count).toBe(open!.human_prompt_count + 1);
    expect(episode.resolved).toBe(true);

    const after = await client.getRepairs();
    const updated = after.episodes.find((e) => e.error_id === open!.error_id)!;
    expect(updated.human_prompt_count).toBe(open!.human_prompt_count + 1);
    expect((await client.getState()).stage).toBe("Integrated");
  });

  it("rejects an empty human prompt with the server's error", async () => {
    const client = servers["repairing"]!.client;
    const episodes = (await client.getRepairs()).episodes;
    const target = episodes[0]!;
    const failure = await client.sendHumanPrompt(target.error_id, "  ").catch((e) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect([400, 409]).toContain((failure as ApiError).status);
  });
});

describe("transcript browser parity", () => {
  it("lists exactly the server's records with their origins", async () => {
    const client = servers["done"]!.client;
    const payload = await client.getTranscripts();
    const view = buildTranscriptView(payload.sessions);
    const serverRecords = payload.sessions.reduce((n, s) => n + s.records.length, 0);
    expect(view.rows).toHaveLength(serverRecords);
    const serverOrigins = payload.sessions.flatMap((s) => s.records.map((r) => r.origin));
    expect(view.rows.map((r) => r.origin)).toEqual(serverOrigins);
  });
});

describe("metrics dashboard parity", () => {
  it("renders the server's numbers and regression unchanged", async () => {
    const client = servers["done"]!.client;
    const report = await client.getMetrics();
    const view = buildMetricsView(report);
    expect(view.totals.records).toBe(report.total_records);
    expect(view.totals.episodes).toBe(report.total_episodes);
    for (const bar of view.durationBars) {
      expect(bar.ms).toBe(report.stage_durations_ms[bar.label]);
    }
    for (const stageBar of view.originBars) {
      for (const segment of stageBar.segments) {
        expect(segment.count).toBe(report.prompt_counts[stageBar.stage]![segment.origin]);
      }
    }
    if (report.regression) {
      expect(view.scatter.slopeLabel).toContain(`slope ${report.regression.slope}`);
    } else {
      expect(view.scatter.line).toBeNull();
    }
  });
});
