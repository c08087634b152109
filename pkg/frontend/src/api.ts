/** Thin typed client for the contestation service. All numbers shown in
 * the UI come through here; the client never derives influence values. */

import type {
  ExperimentSummary, FlipsetPayload, ModelInfo, PredictionRow, Session,
  TrainRequest, TrainResponse, WhatIfOutcome,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly detail: string | null = null,
  ) {
    super(message);
  }
}

async function toError(response: Response): Promise<ApiError> {
  let code = "error";
  let message = `${response.status} ${response.statusText}`;
  let detail: string | null = null;
  try {
    const body = await response.json();
    if (body && typeof body === "object") {
      code = body.code ?? code;
      message = body.message ?? message;
      detail = body.detail ?? null;
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(response.status, code, message, detail);
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      throw await toError(response);
    }
    return (await response.json()) as T;
  }

  listModels(): Promise<{ models: ModelInfo[] }> {
    return this.request("/models");
  }

  trainModel(body: TrainRequest): Promise<TrainResponse> {
    return this.request("/models", { method: "POST", body: JSON.stringify(body) });
  }

  listPredictions(modelId: string): Promise<{ predictions: PredictionRow[]; tau: number }> {
    return this.request(`/models/${modelId}/predictions`);
  }

  computeFlipset(
    modelId: string, testIndex: number, algorithm: string, maxPasses = 25,
  ): Promise<FlipsetPayload> {
    return this.request(`/models/${modelId}/flipset`, {
      method: "POST",
      body: JSON.stringify({ test_index: testIndex, algorithm, max_passes: maxPasses }),
    });
  }

  getExperiment(modelId: string): Promise<ExperimentSummary> {
    return this.request(`/models/${modelId}/experiment`);
  }

  createSession(modelId: string, testIndex: number): Promise<Session> {
    return this.request("/sessions", {
      method: "POST",
      body: JSON.stringify({ model_id: modelId, test_index: testIndex }),
    });
  }

  getSession(sessionId: string): Promise<Session> {
    return this.request(`/sessions/${sessionId}`);
  }

  patchDisputed(sessionId: string, add: number[], remove: number[]): Promise<{ disputed: number[] }> {
    return this.request(`/sessions/${sessionId}/disputed`, {
      method: "PATCH",
      body: JSON.stringify({ add, remove }),
    });
  }

  runWhatIf(sessionId: string): Promise<WhatIfOutcome> {
    return this.request(`/sessions/${sessionId}/whatif`, { method: "POST" });
  }
}
