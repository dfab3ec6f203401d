import { ManipulateResult, ServiceClient, WordHeatmap } from "../src/api";
import { HistoryEntry } from "../src/session";

/** A manipulate result whose heatmap words mirror whitespace tokenization,
 * the same shape the real service produces for in-vocabulary text. */
export function fakeResult(description: string, image = "UkVTVUxU"): ManipulateResult {
  const heatmaps: WordHeatmap[] = description
    .split(/\s+/)
    .filter((w) => w !== "")
    .map((word) => ({ word, image: "SEVBVA==" }));
  return { image, heatmaps, checkpoint_id: "abc123", timing_ms: 42 };
}

export interface ScriptedCall {
  image: string;
  description: string;
  signal?: AbortSignal;
}

/** ServiceClient double whose manipulate() resolves when the test says so
 * and rejects with AbortError when its signal fires first. */
export class ScriptedClient {
  calls: ScriptedCall[] = [];
  interpolations = 0;
  private resolvers: Array<(r: ManipulateResult) => void> = [];

  manipulate(image: string, description: string, signal?: AbortSignal): Promise<ManipulateResult> {
    this.calls.push({ image, description, signal });
    return new Promise<ManipulateResult>((resolve, reject) => {
      this.resolvers.push(resolve);
      signal?.addEventListener("abort", () =>
        reject(new DOMException("aborted", "AbortError")),
      );
    });
  }

  /** Resolve the n-th pending manipulate call. */
  finish(index: number, result: ManipulateResult): void {
    this.resolvers[index](result);
  }

  interpolate(
    _image: string,
    from: string,
    to: string,
    steps: number,
  ): Promise<{ frames: string[]; checkpoint_id: string; timing_ms: number }> {
    this.interpolations += 1;
    const frames = Array.from({ length: steps }, (_, i) => `ZnJhbWUt${i}-${from}-${to}`);
    return Promise.resolve({ frames, checkpoint_id: "abc123", timing_ms: 7 });
  }
}

export function asClient(scripted: ScriptedClient): ServiceClient {
  return scripted as unknown as ServiceClient;
}

let counter = 0;

export function entryOf(description: string, words?: string[]): HistoryEntry {
  counter += 1;
  return Object.freeze({
    id: counter,
    sourceImage: "U1JD",
    description,
    resultImage: "UkVTVUxU",
    words: Object.freeze(words ?? description.split(/\s+/)),
    heatmaps: Object.freeze([]),
    timingMs: 1,
  }) as HistoryEntry;
}
