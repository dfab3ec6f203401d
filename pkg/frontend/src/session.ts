/** Editing-session state.
 *
 * History entries are frozen once created: a card that rendered never
 * changes retroactively. The session also enforces the one-in-flight rule:
 * starting a new request aborts the pending one, so responses can never
 * arrive out of order.
 */

import { ManipulateResult, ServiceClient, WordHeatmap } from "./api";

export interface HistoryEntry {
  readonly id: number;
  readonly sourceImage: string;
  readonly description: string;
  readonly resultImage: string;
  readonly words: readonly string[];
  readonly heatmaps: readonly WordHeatmap[];
  readonly timingMs: number;
}

export interface InterpolationPins {
  readonly a: HistoryEntry;
  readonly b: HistoryEntry;
}

export class SessionState {
  private entries: HistoryEntry[] = [];
  private nextId = 1;
  private inflight: AbortController | null = null;
  private pinA: HistoryEntry | null = null;
  private pinB: HistoryEntry | null = null;
  private sliderValue = 0;

  constructor(private client: ServiceClient) {}

  get history(): readonly HistoryEntry[] {
    return this.entries;
  }

  get slider(): number {
    return this.sliderValue;
  }

  set slider(value: number) {
    if (!Number.isFinite(value) || value < 0 || value > 1) {
      throw new RangeError(`slider position must be in [0, 1], got ${value}`);
    }
    this.sliderValue = value;
  }

  get pins(): InterpolationPins | null {
    return this.pinA && this.pinB ? { a: this.pinA, b: this.pinB } : null;
  }

  get busy(): boolean {
    return this.inflight !== null;
  }

  /** Submit a description for an image. A submission while another request
   * is pending cancels the pending one. Resolves to the appended entry. */
  async submit(sourceImage: string, description: string): Promise<HistoryEntry> {
    if (description.trim() === "") {
      throw new Error("description must not be empty");
    }
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    let result: ManipulateResult;
    try {
      result = await this.client.manipulate(sourceImage, description, controller.signal);
    } finally {
      if (this.inflight === controller) this.inflight = null;
    }
    const entry: HistoryEntry = Object.freeze({
      id: this.nextId++,
      sourceImage,
      description,
      resultImage: result.image,
      words: Object.freeze(result.heatmaps.map((h) => h.word)),
      heatmaps: Object.freeze(result.heatmaps),
      timingMs: result.timing_ms,
    });
    this.entries = [...this.entries, entry];
    return entry;
  }

  cancelPending(): void {
    this.inflight?.abort();
    this.inflight = null;
  }

  /** Pin an entry as an interpolation endpoint (slot "a" or "b"). */
  pin(slot: "a" | "b", entry: HistoryEntry): void {
    if (!this.entries.includes(entry)) {
      throw new Error("only history entries can be pinned");
    }
    if (slot === "a") this.pinA = entry;
    else this.pinB = entry;
  }

  unpin(slot: "a" | "b"): void {
    if (slot === "a") this.pinA = null;
    else this.pinB = null;
  }

  /** The slider is usable only when both pinned descriptions tokenize to
   * the same length under the service's tokenizer, as reported by the
   * heatmap word lists. */
  sliderEnabled(): boolean {
    return (
      this.pinA !== null &&
      this.pinB !== null &&
      this.pinA.words.length === this.pinB.words.length
    );
  }

  sliderDisabledReason(): string | null {
    if (!this.pinA || !this.pinB) return "pin two results to interpolate";
    if (this.pinA.words.length !== this.pinB.words.length) {
      return (
        `descriptions must tokenize to the same length ` +
        `(${this.pinA.words.length} vs ${this.pinB.words.length} words)`
      );
    }
    return null;
  }
}
