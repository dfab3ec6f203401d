/** Service base URL resolution.
 *
 * Priority: runtime override saved in localStorage, then the build-time
 * VITE_WORDBRUSH_URL variable, then the local default. The override exists
 * so one built bundle can point at different service instances.
 */

export const STORAGE_KEY = "wordbrush.baseUrl";
export const DEFAULT_URL = "http://localhost:8765";

export function baseUrl(): string {
  try {
    const stored = window.localStorage.getItem(STORAGE_KEY);
    if (stored) return stored.replace(/\/+$/, "");
  } catch {
    // storage can be unavailable (private mode); fall through
  }
  const built = import.meta.env?.VITE_WORDBRUSH_URL as string | undefined;
  return (built ?? DEFAULT_URL).replace(/\/+$/, "");
}

export function setBaseUrl(url: string): void {
  const trimmed = url.trim();
  if (trimmed === "") {
    window.localStorage.removeItem(STORAGE_KEY);
  } else {
    window.localStorage.setItem(STORAGE_KEY, trimmed.replace(/\/+$/, ""));
  }
}
