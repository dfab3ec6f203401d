/** Typed client for the manipulation service.
 *
 * Every method takes an optional AbortSignal so the caller can cancel a
 * pending request when the user resubmits. Server-side validation errors
 * (4xx) surface as ApiError with the server's detail message.
 */

export interface ModelInfo {
  mode: string;
  resolution: number;
  vocab_size: number;
  vocab_hash: string;
  max_length: number;
  checkpoint_id: string;
}

export interface WordHeatmap {
  word: string;
  image: string; // base64 PNG, grayscale
}

export interface ManipulateResult {
  image: string; // base64 PNG
  heatmaps: WordHeatmap[];
  checkpoint_id: string;
  timing_ms: number;
}

export interface InterpolateResult {
  frames: string[]; // base64 PNGs, first and last are the direct edits
  checkpoint_id: string;
  timing_ms: number;
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function post<T>(url: string, body: unknown, signal?: AbortSignal): Promise<T> {
  const response = await fetch(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
    signal,
  });
  if (!response.ok) {
    let detail = `${response.status}`;
    try {
      const payload = await response.json();
      detail = payload.detail ?? detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return response.json() as Promise<T>;
}

export class ServiceClient {
  constructor(private base: () => string) {}

  async health(signal?: AbortSignal): Promise<boolean> {
    try {
      const response = await fetch(`${this.base()}/healthz`, { signal });
      if (!response.ok) return false;
      const body = await response.json();
      return body.checkpoint_loaded === true;
    } catch {
      return false;
    }
  }

  modelInfo(signal?: AbortSignal): Promise<ModelInfo> {
    return fetch(`${this.base()}/model-info`, { signal }).then((r) => {
      if (!r.ok) throw new ApiError(r.status, `model-info failed: ${r.status}`);
      return r.json() as Promise<ModelInfo>;
    });
  }

  manipulate(image: string, description: string, signal?: AbortSignal): Promise<ManipulateResult> {
    return post<ManipulateResult>(
      `${this.base()}/manipulate`,
      { image, description, heatmaps: true },
      signal,
    );
  }

  interpolate(
    image: string,
    from: string,
    to: string,
    steps: number,
    signal?: AbortSignal,
  ): Promise<InterpolateResult> {
    return post<InterpolateResult>(
      `${this.base()}/interpolate`,
      { image, from_description: from, to_description: to, steps },
      signal,
    );
  }
}
