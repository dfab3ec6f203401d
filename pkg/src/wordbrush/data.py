"""Caption corpora: the documented on-disk layout for bird/flower style
datasets, plus a deterministic synthetic shapes corpus for desk-scale runs.

On-disk layout (shared by all datasets)::

    root/
      images/<id>.png          one image per item
      captions/<id>.txt        exactly 10 captions, one per line
      splits/<split>.txt       newline-delimited image ids
      labels.txt               "<id>\t<class>" per line
      masks/<id>.png           synthetic corpus only: 0/255 object mask
      manifest.json            synthetic corpus only: generation record

The synthetic corpus renders one flat-colored shape per image on a smooth
dark background, with the mask exactly covering the rendered pixels, so a
nearest-palette-color read of the masked region recovers the label exactly.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .errors import DataError

COLOR_RGB = {
    "red": (230, 40, 40),
    "green": (40, 200, 60),
    "blue": (50, 80, 230),
    "yellow": (235, 220, 50),
    "purple": (160, 60, 200),
    "white": (245, 245, 245),
}
COLOR_NAMES = tuple(COLOR_RGB)
SHAPE_NAMES = ("square", "circle", "triangle")
BACKGROUND_STYLES = ("flat", "vgrad", "hgrad")

CAPTION_TEMPLATES = (
    "the {shape} is {color}",
    "a {color} {shape}",
    "this {shape} is {color}",
    "the {color} {shape}",
    "a {shape} colored {color}",
    "the {shape} looks {color}",
    "a {color} colored {shape}",
    "there is a {color} {shape}",
    "the {shape} in the picture is {color}",
    "one {color} {shape} is shown",
)

CAPTIONS_PER_IMAGE = 10


@dataclass
class CaptionedImage:
    image_id: str
    image: torch.Tensor           # (3, S, S) float32 in [-1, 1]
    captions: list[str]
    label: str
    mask: np.ndarray | None = None      # (S, S) bool, synthetic corpus only
    shape: str | None = None
    color: str | None = None
    split: str | None = None

    def __post_init__(self):
        if len(self.captions) != CAPTIONS_PER_IMAGE:
            raise DataError(
                f"{self.image_id}: expected {CAPTIONS_PER_IMAGE} captions, "
                f"got {len(self.captions)}"
            )


def normalize_image(pixels: np.ndarray) -> torch.Tensor:
    """uint8 (H, W, 3) -> float32 (3, H, W) in [-1, 1]."""
    arr = np.asarray(pixels, dtype=np.float32) / 127.5 - 1.0
    return torch.from_numpy(arr).permute(2, 0, 1).contiguous()


def denormalize_image(image: torch.Tensor) -> np.ndarray:
    """float (3, H, W) in [-1, 1] -> uint8 (H, W, 3), rounded and clipped."""
    arr = image.detach().cpu().float().permute(1, 2, 0).numpy()
    return np.clip(np.rint((arr + 1.0) * 127.5), 0, 255).astype(np.uint8)


def to_display_range(image: torch.Tensor) -> torch.Tensor:
    """[-1, 1] -> [0, 1] without quantization."""
    return (image + 1.0) / 2.0


# ---------------------------------------------------------------------------
# synthetic corpus
# ---------------------------------------------------------------------------

@dataclass
class SyntheticSpec:
    canvas: int = 64
    shapes: tuple = SHAPE_NAMES
    colors: tuple = COLOR_NAMES
    backgrounds: tuple = BACKGROUND_STYLES
    templates: tuple = CAPTION_TEMPLATES
    min_area: float = 0.20
    max_area: float = 0.50
    margin: int = 2
    test_every: int = 5   # every k-th item goes to the test split

    def class_names(self):
        return [f"{c} {s}" for s in self.shapes for c in self.colors]


def _shape_mask(shape, frac, rng, spec: SyntheticSpec) -> np.ndarray:
    s = spec.canvas
    ys, xs = np.mgrid[0:s, 0:s]
    if shape == "square":
        half = np.sqrt(frac * s * s) / 2.0
        cx, cy = _center(rng, s, half, half, spec.margin)
        return (np.abs(xs - cx) <= half) & (np.abs(ys - cy) <= half)
    if shape == "circle":
        r = np.sqrt(frac * s * s / np.pi)
        cx, cy = _center(rng, s, r, r, spec.margin)
        return (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
    if shape == "triangle":
        aspect = rng.uniform(0.8, 1.3)
        base = np.sqrt(2.0 * frac * s * s / aspect)
        height = aspect * base
        cx, cy = _center(rng, s, base / 2.0, height / 2.0, spec.margin)
        ax, ay = cx, cy - height / 2.0
        bx, by = cx - base / 2.0, cy + height / 2.0
        qx, qy = cx + base / 2.0, cy + height / 2.0
        d1 = (bx - ax) * (ys - ay) - (by - ay) * (xs - ax)
        d2 = (qx - bx) * (ys - by) - (qy - by) * (xs - bx)
        d3 = (ax - qx) * (ys - qy) - (ay - qy) * (xs - qx)
        return ((d1 >= 0) & (d2 >= 0) & (d3 >= 0)) | ((d1 <= 0) & (d2 <= 0) & (d3 <= 0))
    raise ValueError(f"unknown shape {shape!r}")


class _DoesNotFit(Exception):
    pass


def _center(rng, s, half_w, half_h, margin):
    lo_x, hi_x = margin + half_w, s - margin - half_w
    lo_y, hi_y = margin + half_h, s - margin - half_h
    if lo_x > hi_x or lo_y > hi_y:
        raise _DoesNotFit
    return rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y)


def _background(style, rng, s) -> np.ndarray:
    base = rng.uniform(25, 70)
    tint = rng.uniform(-12, 12, size=3)
    if style == "flat":
        plane = np.full((s, s), base, dtype=np.float64)
    else:
        lo, hi = sorted(rng.uniform(15, 85, size=2))
        ramp = np.linspace(lo, hi, s)
        plane = np.tile(ramp[:, None] if style == "vgrad" else ramp[None, :], (1, s) if style == "vgrad" else (s, 1))
    rgb = plane[:, :, None] + tint[None, None, :]
    return np.clip(rgb, 10, 90)


def _render_item(index, rng, spec: SyntheticSpec):
    shape = spec.shapes[rng.integers(len(spec.shapes))]
    color = spec.colors[rng.integers(len(spec.colors))]
    style = spec.backgrounds[rng.integers(len(spec.backgrounds))]
    s = spec.canvas

    mask = None
    for _ in range(50):
        frac = rng.uniform(spec.min_area + 0.02, spec.max_area - 0.02)
        try:
            candidate = _shape_mask(shape, frac, rng, spec)
        except _DoesNotFit:
            continue
        realized = candidate.mean()
        if spec.min_area <= realized <= spec.max_area:
            mask = candidate
            break
    if mask is None:
        raise DataError(f"could not place a {shape} within the area bounds")

    pixels = _background(style, rng, s)
    pixels[mask] = np.asarray(COLOR_RGB[color], dtype=np.float64)
    pixels = np.rint(pixels).astype(np.uint8)

    captions = [t.format(shape=shape, color=color) for t in spec.templates]
    split = "test" if (index + 1) % spec.test_every == 0 else "train"
    return CaptionedImage(
        image_id=f"synth_{index:05d}",
        image=normalize_image(pixels),
        captions=captions,
        label=f"{color} {shape}",
        mask=mask,
        shape=shape,
        color=color,
        split=split,
    )


def color_oracle(image: torch.Tensor, mask: np.ndarray) -> str:
    """Dominant color of the masked region: nearest palette entry to the
    mask-mean RGB. ``image`` is a (3, H, W) tensor in [-1, 1]."""
    pixels = denormalize_image(image).astype(np.float64)
    if mask.sum() == 0:
        raise DataError("empty mask")
    mean_rgb = pixels[mask].mean(axis=0)
    names = list(COLOR_RGB)
    dists = [np.linalg.norm(mean_rgb - np.asarray(COLOR_RGB[n], dtype=np.float64)) for n in names]
    return names[int(np.argmin(dists))]


def synth_generate(n: int, seed: int, spec: SyntheticSpec | None = None):
    """Render ``n`` captioned shape images, deterministically under ``seed``.

    Returns (items, oracle) where oracle(image, mask) names the dominant
    masked color.
    """
    if n < 2:
        raise DataError("need at least 2 items")
    spec = spec or SyntheticSpec()
    rng = np.random.default_rng(seed)
    items = [_render_item(i, rng, spec) for i in range(n)]
    return items, color_oracle


# ---------------------------------------------------------------------------
# on-disk layout
# ---------------------------------------------------------------------------

def write_corpus(items: list[CaptionedImage], root, spec: SyntheticSpec | None = None,
                 seed: int | None = None):
    """Materialize items into the documented layout. Output is byte-stable
    for a fixed item list."""
    root = Path(root)
    for sub in ("images", "captions", "splits"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    has_masks = any(it.mask is not None for it in items)
    if has_masks:
        (root / "masks").mkdir(exist_ok=True)

    splits: dict[str, list[str]] = {}
    labels = []
    manifest_items = {}
    for it in items:
        Image.fromarray(denormalize_image(it.image)).save(root / "images" / f"{it.image_id}.png")
        (root / "captions" / f"{it.image_id}.txt").write_text(
            "\n".join(it.captions) + "\n", encoding="utf-8"
        )
        if it.mask is not None:
            Image.fromarray((it.mask * 255).astype(np.uint8)).save(
                root / "masks" / f"{it.image_id}.png"
            )
        splits.setdefault(it.split or "train", []).append(it.image_id)
        labels.append(f"{it.image_id}\t{it.label}")
        manifest_items[it.image_id] = {
            "label": it.label, "shape": it.shape, "color": it.color, "split": it.split,
        }

    for split, ids in splits.items():
        (root / "splits" / f"{split}.txt").write_text("\n".join(ids) + "\n", encoding="utf-8")
    (root / "labels.txt").write_text("\n".join(labels) + "\n", encoding="utf-8")
    if spec is not None:
        manifest = {
            "canvas": spec.canvas,
            "shapes": list(spec.shapes),
            "colors": {k: list(v) for k, v in COLOR_RGB.items() if k in spec.colors},
            "backgrounds": list(spec.backgrounds),
            "templates": list(spec.templates),
            "seed": seed,
            "count": len(items),
            "items": manifest_items,
        }
        (root / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


VALIDATION_SPLITS = {"cub": ("train", "test"), "oxford102": ("train", "val", "test"),
                     "synth": ("train", "test")}


def load_split(root, dataset: str, split: str, resolution: int | None = None,
               training: bool = False) -> list[CaptionedImage]:
    """Load one split from the documented layout.

    ``resolution`` resizes the shortest side to resolution+16 and center-crops
    (eval) or leaves the extra border for the training-time random crop.
    """
    if dataset not in VALIDATION_SPLITS:
        raise DataError(f"unknown dataset {dataset!r}")
    if split not in VALIDATION_SPLITS[dataset]:
        raise DataError(f"dataset {dataset!r} has no {split!r} split")
    root = Path(root)
    split_file = root / "splits" / f"{split}.txt"
    if not split_file.exists():
        raise DataError(f"missing split list: {split_file}")
    ids = [line for line in split_file.read_text(encoding="utf-8").splitlines() if line]

    labels = {}
    labels_file = root / "labels.txt"
    if labels_file.exists():
        for line in labels_file.read_text(encoding="utf-8").splitlines():
            if line:
                image_id, _, label = line.partition("\t")
                labels[image_id] = label

    items = []
    for image_id in ids:
        image_path = root / "images" / f"{image_id}.png"
        caption_path = root / "captions" / f"{image_id}.txt"
        if not image_path.exists():
            raise DataError(f"missing image: {image_path}")
        if not caption_path.exists():
            raise DataError(f"missing captions: {caption_path}")
        pil = Image.open(image_path).convert("RGB")
        if resolution is not None and pil.size != (resolution, resolution):
            pil = _resize_for(pil, resolution, training)
        captions = [c for c in caption_path.read_text(encoding="utf-8").splitlines() if c]
        mask = None
        mask_path = root / "masks" / f"{image_id}.png"
        if mask_path.exists():
            mask = np.asarray(Image.open(mask_path).convert("L")) > 127
        items.append(CaptionedImage(
            image_id=image_id,
            image=normalize_image(np.asarray(pil)),
            captions=captions,
            label=labels.get(image_id, ""),
            mask=mask,
            split=split,
        ))
    return items


def _resize_for(pil: Image.Image, resolution: int, training: bool) -> Image.Image:
    short = min(pil.size)
    scale = (resolution + 16) / short
    resized = pil.resize(
        (max(1, round(pil.width * scale)), max(1, round(pil.height * scale))),
        Image.BILINEAR,
    )
    if training:
        return resized  # random crop happens in augmentation
    left = (resized.width - resolution) // 2
    top = (resized.height - resolution) // 2
    return resized.crop((left, top, left + resolution, top + resolution))


def build_vocabulary(items: list[CaptionedImage]):
    from .text import Vocabulary

    return Vocabulary.build(c for it in items for c in it.captions)
