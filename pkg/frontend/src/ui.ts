/** DOM wiring for the editing studio.
 *
 * The app owns one SessionState and one FrameStore. All rendering flows
 * from those; no DOM node holds authoritative state beyond input widgets.
 */

import { ApiError, ServiceClient } from "./api";
import { baseUrl, setBaseUrl } from "./config";
import { renderGallery } from "./gallery";
import { drawOverlay } from "./heatmap";
import { HistoryEntry, SessionState } from "./session";
import { FrameStore, frameIndex, INTERPOLATION_STEPS } from "./slider";

export class StudioApp {
  readonly client: ServiceClient;
  readonly session: SessionState;
  readonly frames: FrameStore;

  private sourceImage: string | null = null;
  private selectedWord: string | null = null;
  private overlayOpacity = 0.6;
  private galleryPage = 0;
  private lastError: { message: string; retry: () => void } | null = null;

  constructor(private root: HTMLElement) {
    this.client = new ServiceClient(baseUrl);
    this.session = new SessionState(this.client);
    this.frames = new FrameStore(this.client);
  }

  mount(): void {
    this.root.innerHTML = `
      <header class="bar">
        <h1>wordbrush studio</h1>
        <label class="base-url">service
          <input id="base-url" type="text" value="${baseUrl()}" spellcheck="false">
        </label>
        <span id="health" class="health" title="service health">●</span>
      </header>
      <main>
        <section class="compose">
          <label class="upload">source image
            <input id="file" type="file" accept="image/*">
          </label>
          <img id="source" class="source" alt="" hidden>
          <textarea id="description" rows="2"
            placeholder="describe the change, e.g. &quot;the circle is blue&quot;"></textarea>
          <button id="submit" disabled>manipulate</button>
          <div id="error" class="error" hidden></div>
        </section>
        <section id="result" class="result"></section>
        <section class="interp">
          <h2>interpolation</h2>
          <div id="pins" class="pins">pin two results below</div>
          <input id="lambda" type="range" min="0" max="1" step="0.01" value="0" disabled>
          <div id="interp-frame" class="interp-frame"></div>
        </section>
        <section class="history">
          <h2>history</h2>
          <div id="gallery"></div>
          <nav class="pager">
            <button id="prev">previous</button>
            <span id="page"></span>
            <button id="next">next</button>
          </nav>
        </section>
      </main>`;
    this.wire();
    this.refreshHealth();
    this.renderHistory();
  }

  private element<T extends HTMLElement>(id: string): T {
    const node = this.root.querySelector<T>(`#${id}`);
    if (!node) throw new Error(`missing element #${id}`);
    return node;
  }

  private wire(): void {
    const urlInput = this.element<HTMLInputElement>("base-url");
    urlInput.addEventListener("change", () => {
      setBaseUrl(urlInput.value);
      urlInput.value = baseUrl();
      this.frames.clear();
      this.refreshHealth();
    });

    const file = this.element<HTMLInputElement>("file");
    file.addEventListener("change", () => {
      const picked = file.files?.[0];
      if (picked) this.loadSource(picked);
    });

    const description = this.element<HTMLTextAreaElement>("description");
    const submit = this.element<HTMLButtonElement>("submit");
    const updateSubmit = () => {
      submit.disabled = description.value.trim() === "" || this.sourceImage === null;
    };
    description.addEventListener("input", updateSubmit);
    submit.addEventListener("click", () => this.submit());
    updateSubmit();

    this.element<HTMLInputElement>("lambda").addEventListener("input", (event) => {
      const position = Number((event.target as HTMLInputElement).value);
      this.session.slider = position;
      void this.showInterpolationFrame(position);
    });

    this.element<HTMLButtonElement>("prev").addEventListener("click", () => {
      this.galleryPage -= 1;
      this.renderHistory();
    });
    this.element<HTMLButtonElement>("next").addEventListener("click", () => {
      this.galleryPage += 1;
      this.renderHistory();
    });
  }

  private async refreshHealth(): Promise<void> {
    const ok = await this.client.health();
    this.element<HTMLSpanElement>("health").className = ok ? "health ok" : "health down";
  }

  private loadSource(file: File): void {
    const reader = new FileReader();
    reader.onload = () => {
      const url = reader.result as string;
      const preview = this.element<HTMLImageElement>("source");
      preview.src = url;
      preview.hidden = false;
      this.sourceImage = url.split(",", 2)[1] ?? null;
      const description = this.element<HTMLTextAreaElement>("description");
      this.element<HTMLButtonElement>("submit").disabled =
        description.value.trim() === "" || this.sourceImage === null;
    };
    reader.readAsDataURL(file);
  }

  async submit(): Promise<void> {
    const description = this.element<HTMLTextAreaElement>("description").value;
    if (this.sourceImage === null || description.trim() === "") return;
    this.showError(null);
    const source = this.sourceImage;
    try {
      const entry = await this.session.submit(source, description);
      this.renderResult(entry);
      this.renderHistory();
    } catch (error) {
      if ((error as Error).name === "AbortError") return; // superseded
      const message =
        error instanceof ApiError ? error.message : `service unreachable: ${error}`;
      this.showError({ message, retry: () => void this.submit() });
    }
  }

  private showError(state: { message: string; retry: () => void } | null): void {
    this.lastError = state;
    const box = this.element<HTMLDivElement>("error");
    box.hidden = state === null;
    box.textContent = "";
    if (!state) return;
    const text = document.createElement("span");
    text.textContent = state.message;
    const retry = document.createElement("button");
    retry.textContent = "retry";
    retry.addEventListener("click", state.retry);
    box.append(text, retry);
  }

  get errorMessage(): string | null {
    return this.lastError?.message ?? null;
  }

  private renderResult(entry: HistoryEntry): void {
    const panel = this.element<HTMLElement>("result");
    panel.innerHTML = `
      <div class="pair">
        <figure><img src="data:image/png;base64,${entry.sourceImage}" alt="original">
          <figcaption>original</figcaption></figure>
        <figure class="overlay-holder">
          <img src="data:image/png;base64,${entry.resultImage}" alt="${entry.description}">
          <canvas id="overlay" class="overlay"></canvas>
          <figcaption>${entry.description} · ${entry.timingMs.toFixed(0)} ms</figcaption>
        </figure>
      </div>
      <div id="words" class="words"></div>
      <label class="opacity">overlay opacity
        <input id="opacity" type="range" min="0" max="100" value="${this.overlayOpacity * 100}">
      </label>
      <div class="pin-buttons">
        <button id="pin-a">pin as A</button>
        <button id="pin-b">pin as B</button>
      </div>`;

    const words = this.element<HTMLDivElement>("words");
    for (const heatmap of entry.heatmaps) {
      const chip = document.createElement("button");
      chip.className = "word-chip";
      chip.textContent = heatmap.word;
      chip.addEventListener("click", () => {
        this.selectedWord = this.selectedWord === heatmap.word ? null : heatmap.word;
        void this.paintOverlay(entry);
        for (const other of words.children) other.classList.remove("active");
        if (this.selectedWord) chip.classList.add("active");
      });
      words.appendChild(chip);
    }

    this.element<HTMLInputElement>("opacity").addEventListener("input", (event) => {
      this.overlayOpacity = Number((event.target as HTMLInputElement).value) / 100;
      void this.paintOverlay(entry);
    });

    this.element<HTMLButtonElement>("pin-a").addEventListener("click", () => this.pin("a", entry));
    this.element<HTMLButtonElement>("pin-b").addEventListener("click", () => this.pin("b", entry));
  }

  private async paintOverlay(entry: HistoryEntry): Promise<void> {
    const canvas = this.element<HTMLCanvasElement>("overlay");
    const selected = entry.heatmaps.find((h) => h.word === this.selectedWord);
    if (!selected) {
      canvas.getContext("2d")?.clearRect(0, 0, canvas.width, canvas.height);
      return;
    }
    await drawOverlay(canvas, selected.image, this.overlayOpacity);
  }

  private pin(slot: "a" | "b", entry: HistoryEntry): void {
    this.session.pin(slot, entry);
    const pins = this.session.pins;
    const label = this.element<HTMLDivElement>("pins");
    const slider = this.element<HTMLInputElement>("lambda");
    if (!pins) {
      label.textContent = `pinned ${slot.toUpperCase()}: "${entry.description}" — pin the other endpoint`;
      slider.disabled = true;
      return;
    }
    label.textContent = `A: "${pins.a.description}" ↔ B: "${pins.b.description}"`;
    const reason = this.session.sliderDisabledReason();
    slider.disabled = reason !== null;
    slider.title = reason ?? "drag to sweep between the pinned descriptions";
    if (reason === null) void this.showInterpolationFrame(this.session.slider);
  }

  private async showInterpolationFrame(position: number): Promise<void> {
    const pins = this.session.pins;
    if (!pins || !this.session.sliderEnabled()) return;
    const frames = await this.frames.frames(
      pins.a.sourceImage,
      pins.a.description,
      pins.b.description,
      INTERPOLATION_STEPS,
    );
    const frame = frames[frameIndex(position, frames.length)];
    const holder = this.element<HTMLDivElement>("interp-frame");
    holder.innerHTML = `<img src="data:image/png;base64,${frame}" alt="interpolation frame">`;
  }

  private renderHistory(): void {
    const container = this.element<HTMLDivElement>("gallery");
    const view = renderGallery(container, this.session.history, this.galleryPage);
    this.galleryPage = view.page;
    this.element<HTMLSpanElement>("page").textContent =
      `page ${view.page + 1} of ${view.pageCount}`;
    this.element<HTMLButtonElement>("prev").disabled = view.page === 0;
    this.element<HTMLButtonElement>("next").disabled = view.page >= view.pageCount - 1;
  }
}
