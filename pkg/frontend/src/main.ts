/** Console shell: tab navigation, polling, and mutation wiring.
 *
 * The client is stateless; views re-render from fresh GET responses on a
 * poll cadence suited to a pipeline that moves in minutes, not
 * milliseconds. API errors are surfaced verbatim in the error strip.
 */

import { ApiError, WorkbenchClient } from "./api.js";
import { escapeHtml } from "./format.js";
import {
  buildDivisionView,
  buildEpisodeRows,
  buildMetricsView,
  buildStatusBoard,
  buildTranscriptView,
  renderDivision,
  renderMetrics,
  renderRepairs,
  renderStatusBoard,
  renderTranscripts,
} from "./views.js";

const POLL_MS = 2000;

type Tab = "status" | "division" | "repairs" | "transcripts" | "metrics";

function apiBase(): string {
  const override = new URLSearchParams(window.location.search).get("api");
  return override ?? `${window.location.protocol}//${window.location.hostname}:8765`;
}

const client = new WorkbenchClient(apiBase());

let activeTab: Tab = "status";
let stageFilter: string | null = null;
let lastRevision = -1;

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

function showError(message: string | null): void {
  const strip = el("error-strip");
  if (message === null) {
    strip.hidden = true;
    return;
  }
  strip.hidden = false;
  strip.innerHTML = escapeHtml(message);
}

function describeFailure(err: unknown): string {
  if (err instanceof ApiError) {
    const findings = err.body.findings ? ` — ${err.body.findings.join("; ")}` : "";
    return `${err.body.error} (${err.status}): ${err.body.detail}${findings}`;
  }
  return String(err);
}

async function render(): Promise<void> {
  const view = el("view");
  try {
    if (activeTab === "status") {
      view.innerHTML = renderStatusBoard(buildStatusBoard(await client.getState()));
    } else if (activeTab === "division") {
      view.innerHTML = renderDivision(buildDivisionView(await client.getDivision()));
      wireDivisionActions();
    } else if (activeTab === "repairs") {
      view.innerHTML = renderRepairs(buildEpisodeRows((await client.getRepairs()).episodes));
      wireRepairActions();
    } else if (activeTab === "transcripts") {
      const sessions = (await client.getTranscripts()).sessions;
      view.innerHTML = renderTranscripts(buildTranscriptView(sessions, stageFilter), stageFilter);
      wireTranscriptFilter();
    } else {
      view.innerHTML = renderMetrics(buildMetricsView(await client.getMetrics()));
    }
    showError(null);
  } catch (err) {
    showError(describeFailure(err));
  }
}

function wireDivisionActions(): void {
  const approve = document.getElementById("approve");
  approve?.addEventListener("click", async () => {
    const actor = (document.getElementById("actor") as HTMLInputElement).value;
    try {
      await client.approveDivision(actor);
      showError(null);
      await render();
    } catch (err) {
      showError(describeFailure(err));
    }
  });
  const refine = document.getElementById("refine");
  refine?.addEventListener("click", async () => {
    const feedback = (document.getElementById("feedback") as HTMLTextAreaElement).value;
    try {
      await client.refineDivision(feedback);
      showError(null);
      await render();
    } catch (err) {
      showError(describeFailure(err));
    }
  });
}

function wireRepairActions(): void {
  for (const button of document.querySelectorAll<HTMLButtonElement>(".human-prompt")) {
    button.addEventListener("click", async () => {
      const errorId = button.dataset.episode ?? "";
      const input = document.getElementById(`prompt-${errorId}`) as HTMLTextAreaElement;
      try {
        await client.sendHumanPrompt(errorId, input.value);
        showError(null);
        await render();
      } catch (err) {
        showError(describeFailure(err));
      }
    });
  }
}

function wireTranscriptFilter(): void {
  const select = document.getElementById("stage-filter") as HTMLSelectElement | null;
  select?.addEventListener("change", async () => {
    stageFilter = select.value || null;
    await render();
  });
}

function wireTabs(): void {
  for (const button of document.querySelectorAll<HTMLButtonElement>("nav button")) {
    button.addEventListener("click", async () => {
      activeTab = (button.dataset.tab ?? "status") as Tab;
      for (const other of document.querySelectorAll("nav button")) {
        other.classList.toggle("active", other === button);
      }
      await render();
    });
  }
}

async function poll(): Promise<void> {
  try {
    const state = await client.getState();
    el("stage-indicator").textContent = state.stage;
    if (state.revision !== lastRevision) {
      lastRevision = state.revision;
      await render();
    }
  } catch (err) {
    showError(describeFailure(err));
  }
}

wireTabs();
void render();
setInterval(() => void poll(), POLL_MS);
