/** History comparison grid: fixed page size of eight cards. */

import { HistoryEntry } from "./session";

export const PAGE_SIZE = 8;

export interface GalleryPage {
  entries: readonly HistoryEntry[];
  page: number;       // zero-based
  pageCount: number;
}

export function pageCount(total: number): number {
  return Math.max(1, Math.ceil(total / PAGE_SIZE));
}

export function paginate(entries: readonly HistoryEntry[], page: number): GalleryPage {
  const pages = pageCount(entries.length);
  const clamped = Math.min(Math.max(page, 0), pages - 1);
  const start = clamped * PAGE_SIZE;
  return {
    entries: entries.slice(start, start + PAGE_SIZE),
    page: clamped,
    pageCount: pages,
  };
}

/** Render one page of history into a grid element. Returns the rendered
 * page so callers can wire pagination controls. */
export function renderGallery(
  container: HTMLElement,
  entries: readonly HistoryEntry[],
  page: number,
): GalleryPage {
  container.textContent = "";
  if (entries.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty-state";
    empty.textContent = "No results yet. Submit a description to start comparing.";
    container.appendChild(empty);
    return { entries: [], page: 0, pageCount: 1 };
  }
  const view = paginate(entries, page);
  const grid = document.createElement("div");
  grid.className = "gallery-grid";
  for (const entry of view.entries) {
    const cell = document.createElement("figure");
    cell.className = "gallery-cell";
    const img = document.createElement("img");
    img.src = `data:image/png;base64,${entry.resultImage}`;
    img.alt = entry.description;
    const caption = document.createElement("figcaption");
    caption.textContent = entry.description;
    cell.append(img, caption);
    grid.appendChild(cell);
  }
  container.appendChild(grid);
  return view;
}
