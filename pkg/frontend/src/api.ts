/** Typed client for the review service HTTP API. */

export type Label = "call" | "noise" | "unlabeled";

export interface ClusterSummary {
  id: number;
  size: number;
  label: Label;
}

export interface ClusterSample {
  window_id: string;
  spectrogram_url: string;
  audio_url: string;
  recording_id: string;
  start_s: number;
}

export interface LabelMap {
  k: number;
  entries: Record<string, { label: Label; annotator: string; timestamp: number }>;
}

export interface PropagateSummary {
  assigned: number;
  unassigned: number;
}

export interface RecordingRow {
  recording_id: string;
  positive_window_count: number;
  verdict: "positive" | "negative";
}

export interface Metrics {
  tp: number;
  fp: number;
  fn: number;
  tn: number;
  accuracy: number;
  precision: number;
  recall: number;
  baseline_precision: number;
  precision_improvement: number;
  precision_defined: boolean;
}

export interface ProjectionPoint {
  window_id: string;
  x: number;
  y: number;
  cluster: number;
  corpus_role: "reference" | "field";
}

export interface ProjectState {
  stages: Record<string, boolean>;
  config: Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(base + path, init);
  const body = await res.json().catch(() => ({}));
  if (!res.ok) {
    throw new ApiError(res.status, body.code ?? "unknown", body.message ?? res.statusText);
  }
  return body as T;
}

/** All methods return server truth; the UI never computes metrics itself. */
export class ReviewApi {
  constructor(private base: string = "") {}

  project(): Promise<ProjectState> {
    return request(this.base, "/api/project");
  }

  clusters(): Promise<ClusterSummary[]> {
    return request(this.base, "/api/clusters");
  }

  samples(clusterId: number, n = 9, seed = 0): Promise<ClusterSample[]> {
    return request(this.base, `/api/clusters/${clusterId}/samples?n=${n}&seed=${seed}`);
  }

  setLabel(clusterId: number, label: "call" | "noise"): Promise<LabelMap> {
    return request(this.base, `/api/clusters/${clusterId}/label`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ label }),
    });
  }

  propagate(radius: number | null = null): Promise<PropagateSummary> {
    return request(this.base, "/api/propagate", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ radius }),
    });
  }

  recordings(): Promise<RecordingRow[]> {
    return request(this.base, "/api/recordings");
  }

  /** Resolves to null when the project has no ground truth (404 no-truth). */
  async metrics(): Promise<Metrics | null> {
    try {
      return await request<Metrics>(this.base, "/api/metrics");
    } catch (err) {
      if (err instanceof ApiError && err.code === "no-truth") return null;
      throw err;
    }
  }

  projection(method: "pca" | "umap" = "pca"): Promise<ProjectionPoint[]> {
    return request(this.base, `/api/projection?method=${method}`);
  }
}
