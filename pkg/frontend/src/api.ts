/** Typed client for the workbench API. Every console action maps 1:1 to a
 * documented endpoint; errors carry the server's body verbatim. */

import type {
  ApiFailure,
  DivisionResponse,
  MetricsReport,
  ModuleArtifacts,
  ProjectState,
  RepairEpisode,
  RepairsResponse,
  TranscriptsResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ApiFailure,
  ) {
    super(`${body.error}: ${body.detail}`);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(`${base}${path}`, init);
  const body = await resp.json();
  if (!resp.ok) {
    throw new ApiError(resp.status, body as ApiFailure);
  }
  return body as T;
}

function post(payload: unknown): RequestInit {
  return {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
  };
}

export class WorkbenchClient {
  constructor(public readonly baseUrl: string) {}

  getState(): Promise<ProjectState> {
    return request(this.baseUrl, "/state");
  }

  getDivision(): Promise<DivisionResponse> {
    return request(this.baseUrl, "/division");
  }

  getModuleArtifacts(name: string): Promise<ModuleArtifacts> {
    return request(this.baseUrl, `/modules/${encodeURIComponent(name)}/artifacts`);
  }

  getTranscripts(): Promise<TranscriptsResponse> {
    return request(this.baseUrl, "/transcripts");
  }

  getRepairs(): Promise<RepairsResponse> {
    return request(this.baseUrl, "/repairs");
  }

  getMetrics(): Promise<MetricsReport> {
    return request(this.baseUrl, "/metrics");
  }

  approveDivision(actor: string): Promise<{ division: DivisionResponse["division"] }> {
    return request(this.baseUrl, "/division/approve", post({ actor }));
  }

  refineDivision(feedback: string): Promise<{ division: DivisionResponse["division"] }> {
    return request(this.baseUrl, "/division/refine", post({ feedback }));
  }

  sendHumanPrompt(errorId: string, text: string): Promise<{ episode: RepairEpisode }> {
    return request(
      this.baseUrl,
      `/repairs/${encodeURIComponent(errorId)}/human-prompt`,
      post({ text }),
    );
  }
}
