/** Heatmap overlay compositing.
 *
 * The service returns one grayscale map per word. The overlay tints the map
 * and scales its alpha by both the local intensity and the user's opacity
 * setting, so cold regions stay transparent at any opacity. The pixel math
 * lives in a pure function; the canvas wrapper is browser-only glue.
 */

export interface Tint {
  r: number;
  g: number;
  b: number;
}

export const OVERLAY_TINT: Tint = { r: 255, g: 64, b: 32 };

/** Convert grayscale RGBA pixels into tinted overlay pixels in place.
 * `opacity` is in [0, 1]; intensity comes from the red channel since the
 * source is grayscale. */
export function tintPixels(pixels: Uint8ClampedArray, opacity: number, tint: Tint = OVERLAY_TINT): void {
  if (!(opacity >= 0 && opacity <= 1)) {
    throw new RangeError(`opacity must be in [0, 1], got ${opacity}`);
  }
  for (let i = 0; i < pixels.length; i += 4) {
    const intensity = pixels[i] / 255;
    pixels[i] = tint.r;
    pixels[i + 1] = tint.g;
    pixels[i + 2] = tint.b;
    pixels[i + 3] = Math.round(255 * intensity * opacity);
  }
}

/** Draw a base64 grayscale heatmap onto a canvas as a tinted overlay. */
export async function drawOverlay(
  canvas: HTMLCanvasElement,
  heatmapBase64: string,
  opacity: number,
): Promise<void> {
  const image = await loadImage(`data:image/png;base64,${heatmapBase64}`);
  canvas.width = image.naturalWidth;
  canvas.height = image.naturalHeight;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d canvas context unavailable");
  ctx.drawImage(image, 0, 0);
  const data = ctx.getImageData(0, 0, canvas.width, canvas.height);
  tintPixels(data.data, opacity);
  ctx.putImageData(data, 0, 0);
}

export function loadImage(src: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const image = new Image();
    image.onload = () => resolve(image);
    image.onerror = () => reject(new Error("image failed to decode"));
    image.src = src;
  });
}
