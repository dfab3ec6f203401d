"""Measurement machinery: per-pixel reconstruction losses, human-study rank
aggregation with a chi-square independence test, text interpolation sweeps,
per-word attention heatmaps, and a label-entropy probe that shows why
classifier confidence drops on manipulated images."""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from scipy.special import gammaincc
from torch import nn

from .data import CaptionedImage, to_display_range
from .errors import DataError

# ---------------------------------------------------------------------------
# pixel losses
# ---------------------------------------------------------------------------

def pixel_losses(model, items: list[CaptionedImage], caption_index: int = 0,
                 batch_size: int = 32) -> tuple[float, float]:
    """Mean per-pixel (L1, L2) between each image and its positive-pair
    reconstruction, in the [0, 1] display range, averaged over the split.

    ``model`` is anything with ``manipulate_batch(images, descriptions)``, or
    a plain callable ``(image, caption) -> image``.
    """
    if not items:
        raise DataError("empty split")
    total_l1, total_l2, count = 0.0, 0.0, 0
    with torch.no_grad():
        for start in range(0, len(items), batch_size):
            chunk = items[start:start + batch_size]
            images = torch.stack([it.image for it in chunk])
            captions = [it.captions[caption_index] for it in chunk]
            if hasattr(model, "manipulate_batch"):
                outputs = model.manipulate_batch(images, captions)
            else:
                outputs = torch.stack([model(it.image, c) for it, c in zip(chunk, captions)])
            diff = to_display_range(outputs) - to_display_range(images)
            total_l1 += float(diff.abs().sum())
            total_l2 += float((diff ** 2).sum())
            count += diff.numel()
    return total_l1 / count, total_l2 / count


def masked_l1(a: torch.Tensor, b: torch.Tensor, mask: np.ndarray,
              outside: bool = True) -> float:
    """Display-range L1 restricted to (the complement of) a boolean mask."""
    region = torch.from_numpy(~mask if outside else mask)
    diff = (to_display_range(a) - to_display_range(b)).abs()
    selected = diff[:, region]
    if selected.numel() == 0:
        raise DataError("selected region is empty")
    return float(selected.mean())


# ---------------------------------------------------------------------------
# ranking study aggregation
# ---------------------------------------------------------------------------

@dataclass
class RankingTable:
    """Complete per-response rankings: each response lists every method,
    best first."""

    methods: list[str]
    responses: list[list[str]]

    def __post_init__(self):
        want = sorted(self.methods)
        for i, resp in enumerate(self.responses):
            if sorted(resp) != want:
                raise DataError(f"response {i} is not a complete permutation: {resp}")


def rank_aggregate(table: RankingTable) -> dict[str, float]:
    """Arithmetic mean rank position per method (1 = best; lower is better)."""
    if not table.responses:
        raise DataError("no responses to aggregate")
    totals = {m: 0.0 for m in table.methods}
    for resp in table.responses:
        for position, method in enumerate(resp, start=1):
            totals[method] += position
    return {m: totals[m] / len(table.responses) for m in table.methods}


def rank_contingency(table: RankingTable) -> np.ndarray:
    """Method x rank counts matrix from the raw responses."""
    k = len(table.methods)
    counts = np.zeros((k, k), dtype=np.int64)
    index = {m: i for i, m in enumerate(table.methods)}
    for resp in table.responses:
        for position, method in enumerate(resp):
            counts[index[method], position] += 1
    return counts


@dataclass
class ChiSquareResult:
    statistic: float
    dof: int
    p_value: float


def chi_square_independence(counts) -> ChiSquareResult:
    """Pearson independence test on a contingency table. The p-value is the
    upper tail of the chi-square distribution, computed through the
    regularized incomplete gamma function."""
    table = np.asarray(counts, dtype=np.float64)
    if table.ndim != 2 or table.shape[0] < 2 or table.shape[1] < 2:
        raise DataError("need a table with at least 2 rows and 2 columns")
    if (table < 0).any():
        raise DataError("counts must be nonnegative")
    row = table.sum(axis=1, keepdims=True)
    col = table.sum(axis=0, keepdims=True)
    total = table.sum()
    if total <= 0:
        raise DataError("empty table")
    expected = row @ col / total
    if (expected <= 0).any():
        raise DataError("zero expected cell count; pool sparse categories")
    statistic = float(((table - expected) ** 2 / expected).sum())
    dof = (table.shape[0] - 1) * (table.shape[1] - 1)
    p_value = float(gammaincc(dof / 2.0, statistic / 2.0))
    return ChiSquareResult(statistic=statistic, dof=dof, p_value=p_value)


# ---------------------------------------------------------------------------
# interpolation and heatmaps
# ---------------------------------------------------------------------------

def interpolate_text(manipulator, image: torch.Tensor, description_a: str,
                     description_b: str, steps: int) -> list[torch.Tensor]:
    """Images along the linear path between two same-length descriptions."""
    return manipulator.interpolate(image, description_a, description_b, steps)


@dataclass
class HeatmapSet:
    """One map per word at image resolution, each max-normalized to [0, 1]."""

    words: list[str]
    maps: torch.Tensor   # (L, S, S)

    def __post_init__(self):
        if self.maps.dim() != 3 or self.maps.size(0) != len(self.words):
            raise DataError("need exactly one map per word")


def attention_heatmaps(manipulator, image: torch.Tensor, description: str,
                       scale: int = 0) -> HeatmapSet:
    """Per-word heatmaps from one attention map (0 = deepest scale), each
    column reshaped to its feature grid, bilinearly upsampled to image size,
    and max-normalized."""
    _, alphas, words = manipulator.attention(image, description)
    if not 0 <= scale < len(alphas):
        raise DataError(f"scale {scale} out of range, model has {len(alphas)}")
    alpha = alphas[scale]                       # (N, Lmax)
    n = alpha.size(0)
    side = int(round(math.sqrt(n)))
    size = image.shape[-1]
    maps = []
    for j in range(len(words)):
        grid = alpha[:, j].reshape(1, 1, side, side)
        up = F.interpolate(grid, size=(size, size), mode="bilinear", align_corners=False)
        up = up[0, 0]
        peak = float(up.max())
        maps.append(up / peak if peak > 0 else up)
    return HeatmapSet(words=words, maps=torch.stack(maps))


def mask_contrast(heatmap: torch.Tensor, mask: np.ndarray) -> float:
    """Mean heat inside the mask over mean heat outside it."""
    m = torch.from_numpy(mask)
    inside = float(heatmap[m].mean())
    outside = float(heatmap[~m].mean())
    if outside == 0.0:
        return math.inf
    return inside / outside


def save_heatmap_grid(image: torch.Tensor, heatmaps: HeatmapSet, path):
    """Export the source image plus one labeled grayscale panel per word."""
    from PIL import Image, ImageDraw

    from .data import denormalize_image

    size = image.shape[-1]
    banner = 12
    panels = [Image.fromarray(denormalize_image(image))]
    for j in range(len(heatmaps.words)):
        arr = (heatmaps.maps[j].numpy() * 255).astype(np.uint8)
        panels.append(Image.fromarray(arr).convert("RGB"))
    grid = Image.new("RGB", (size * len(panels), size + banner), "black")
    draw = ImageDraw.Draw(grid)
    for i, panel in enumerate(panels):
        grid.paste(panel, (i * size, banner))
        label = "input" if i == 0 else heatmaps.words[i - 1]
        draw.text((i * size + 2, 1), label, fill="white")
    grid.save(path)


def save_frame_strip(frames: list[torch.Tensor], path):
    """Export an interpolation sweep as one horizontal strip."""
    from PIL import Image

    from .data import denormalize_image

    size = frames[0].shape[-1]
    strip = Image.new("RGB", (size * len(frames), size))
    for i, frame in enumerate(frames):
        strip.paste(Image.fromarray(denormalize_image(frame)), (i * size, 0))
    strip.save(path)


# ---------------------------------------------------------------------------
# label-entropy probe
# ---------------------------------------------------------------------------

class LabelClassifier(nn.Module):
    """Small convolutional classifier over a corpus's class set, used only to
    probe label distributions of generated images."""

    def __init__(self, class_names: list[str], channels=(16, 32, 64)):
        super().__init__()
        self.class_names = list(class_names)
        layers, prev = [], 3
        for ch in channels:
            layers += [nn.Conv2d(prev, ch, 3, stride=2, padding=1),
                       nn.BatchNorm2d(ch), nn.ReLU(inplace=True)]
            prev = ch
        self.body = nn.Sequential(*layers)
        self.head = nn.Linear(prev, len(self.class_names))

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        feats = self.body(images).mean(dim=(2, 3))
        return self.head(feats)


def train_label_classifier(items: list[CaptionedImage], epochs: int = 60,
                           batch_size: int = 64, lr: float = 2e-3,
                           seed: int = 0) -> LabelClassifier:
    class_names = sorted({it.label for it in items})
    if len(class_names) < 2:
        raise DataError("need at least two classes")
    torch.manual_seed(seed)
    clf = LabelClassifier(class_names)
    opt = torch.optim.Adam(clf.parameters(), lr=lr)
    images = torch.stack([it.image for it in items])
    labels = torch.tensor([class_names.index(it.label) for it in items])
    rng = np.random.default_rng(seed)
    clf.train()
    for _ in range(epochs):
        order = rng.permutation(len(items))
        for start in range(0, len(items), batch_size):
            idx = torch.from_numpy(order[start:start + batch_size])
            opt.zero_grad(set_to_none=True)
            loss = F.cross_entropy(clf(images[idx]), labels[idx])
            loss.backward()
            opt.step()
    clf.eval()
    return clf


@dataclass
class ProbeResult:
    class_names: list[str]
    distributions: np.ndarray    # (N, C)
    entropies_nats: np.ndarray   # (N,)

    @property
    def entropies_bits(self) -> np.ndarray:
        return self.entropies_nats / math.log(2.0)

    @property
    def mean_entropy(self) -> float:
        return float(self.entropies_nats.mean())


def shannon_entropy(dist: np.ndarray) -> float:
    """Entropy in nats with the 0 log 0 = 0 convention."""
    p = np.asarray(dist, dtype=np.float64)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def label_entropy_probe(classifier: LabelClassifier, images: torch.Tensor,
                        class_names: list[str] | None = None) -> ProbeResult:
    """Per-image class distributions and Shannon entropies under the
    classifier; low entropy means a confident, clean label."""
    if class_names is not None and list(class_names) != classifier.class_names:
        raise DataError("classifier classes do not match the corpus classes")
    classifier.eval()
    with torch.no_grad():
        probs = torch.softmax(classifier(images), dim=1).numpy().astype(np.float64)
    entropies = np.array([shannon_entropy(row) for row in probs])
    return ProbeResult(
        class_names=classifier.class_names,
        distributions=probs,
        entropies_nats=entropies,
    )


# ---------------------------------------------------------------------------
# reporting
# ---------------------------------------------------------------------------

def format_metrics_table(metrics: dict) -> str:
    width = max(len(k) for k in metrics)
    lines = [f"{k:<{width}}  {v:.6f}" if isinstance(v, float) else f"{k:<{width}}  {v}"
             for k, v in metrics.items()]
    return "\n".join(lines)


def write_metrics(metrics: dict, path):
    Path(path).write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
