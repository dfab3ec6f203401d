"""Two-headed discriminator: an unconditional realism score from pooled deep
features, and a conditional image-text matching score that aggregates
per-word local matching with attention over regions and over words.

Convolutions are bias-free and the input layer carries no batchnorm.
"""

import math
from dataclasses import dataclass

import torch
import torch.nn as nn

from .errors import NumericalFailure, ShapeError
from .generator import conv3x3


@dataclass
class ScorePair:
    """Sigmoid scores in (0, 1); ``cond`` is None when no description was
    supplied. Tensors are (B,)."""

    uncond: torch.Tensor
    cond: torch.Tensor | None = None


class Discriminator(nn.Module):
    def __init__(self, word_width, channels=(64, 128, 256, 512), match_gain=10.0):
        super().__init__()
        if len(channels) != 4:
            raise ValueError("discriminator expects a 4-stage channel plan")
        if match_gain <= 0:
            raise ValueError("match_gain must be positive")
        self.channels = tuple(channels)
        c1, c2, c3, c4 = channels
        slope = 0.2
        # no batchnorm on the input layer
        self.stage1 = nn.Sequential(conv3x3(3, c1, stride=2), nn.LeakyReLU(slope, inplace=True))
        self.stage2 = nn.Sequential(conv3x3(c1, c2, stride=2), nn.BatchNorm2d(c2),
                                    nn.LeakyReLU(slope, inplace=True))
        self.stage3 = nn.Sequential(conv3x3(c2, c3, stride=2), nn.BatchNorm2d(c3),
                                    nn.LeakyReLU(slope, inplace=True))
        self.stage4 = nn.Sequential(conv3x3(c3, c4, stride=2), nn.BatchNorm2d(c4),
                                    nn.LeakyReLU(slope, inplace=True))
        self.uncond_head = nn.Linear(c4, 1, bias=False)
        self.word_proj = nn.Linear(word_width, c3, bias=False)
        self.word_importance = nn.Linear(c3, 1, bias=False)
        self.scale = 1.0 / math.sqrt(c3)
        # gains on the cosine matching surface; without them the sigmoid
        # operates in its flat region and the matching head learns far too
        # slowly to steer the generator. Both are learned; match_gain's
        # starting point is configurable because small models want a softer
        # initial matching surface.
        self.attn_gain = nn.Parameter(torch.tensor(4.0))
        self.match_gain = nn.Parameter(torch.tensor(float(match_gain)))

    def features(self, image):
        if image.dim() != 4 or image.size(1) != 3:
            raise ShapeError(f"expected (B, 3, S, S) image, got {tuple(image.shape)}")
        x = self.stage1(image)
        x = self.stage2(x)
        local = self.stage3(x)   # intermediate features for word matching
        deep = self.stage4(local)
        return local, deep

    def unconditional(self, deep):
        pooled = deep.mean(dim=(2, 3))
        return torch.sigmoid(self.uncond_head(pooled).squeeze(1))

    def conditional(self, local, words, lengths=None):
        """Match local features against projected words.

        Per word: sigmoid matching scores over regions, aggregated with a
        softmax over regions; word scores are then averaged with softmax
        importance weights. The result stays strictly inside (0, 1).
        """
        if words.dim() != 3:
            raise ShapeError(f"expected (B, D, L) words, got {tuple(words.shape)}")
        if words.size(0) != local.size(0):
            raise ShapeError("batch size mismatch between image and words")
        b, c, h, w = local.shape
        flat = local.reshape(b, c, h * w)
        projected = self.word_proj(words.transpose(1, 2))          # (B, L, C)
        sim = torch.bmm(
            nn.functional.normalize(projected, dim=2, eps=1e-8),
            nn.functional.normalize(flat, dim=1, eps=1e-8),
        )                                                          # (B, L, N) in [-1, 1]

        region_attn = torch.softmax(sim * self.attn_gain, dim=2)
        word_scores = (region_attn * torch.sigmoid(sim * self.match_gain)).sum(dim=2)

        importance = self.word_importance(projected).squeeze(2) * self.scale  # (B, L)
        if lengths is not None:
            mask = torch.arange(words.size(2), device=words.device)[None, :] >= lengths.to(
                words.device
            )[:, None]
            importance = importance.masked_fill(mask, float("-inf"))
        weights = torch.softmax(importance, dim=1)
        return (weights * word_scores).sum(dim=1)

    def forward(self, image, words=None, lengths=None) -> ScorePair:
        local, deep = self.features(image)
        uncond = self.unconditional(deep)
        cond = None if words is None else self.conditional(local, words, lengths)
        return ScorePair(uncond=uncond, cond=cond)


def score(discriminator, image, words=None, lengths=None) -> ScorePair:
    """Score an image (and optionally a description) with NaN guarding."""
    pair = discriminator(image, words, lengths)
    if not torch.isfinite(pair.uncond).all():
        raise NumericalFailure("unconditional score is non-finite")
    if pair.cond is not None and not torch.isfinite(pair.cond).all():
        raise NumericalFailure("conditional score is non-finite")
    return pair
