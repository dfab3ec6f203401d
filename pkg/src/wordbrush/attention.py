"""Word-region attention: bilinear projection, per-region softmax over words,
and the word-context features injected into the generator.

Shapes follow the image-feature convention (channels M, locations N = H*W)
and the word convention (width D, words L). The projection maps words into
the channel space of the feature scale it serves, so each scale owns its own
projection matrix.
"""

import struct

import numpy as np
import torch
import torch.nn as nn

from .errors import ShapeError

NEG_INF = float("-inf")


def project_words(words: torch.Tensor, proj: torch.Tensor) -> torch.Tensor:
    """Project a (D, L) word matrix into channel space with a (M, D) matrix.

    Column j of the result equals proj @ w_j.
    """
    if proj.dim() != 2 or words.dim() != 2:
        raise ShapeError("project_words expects 2-D matrices")
    if proj.size(1) != words.size(0):
        raise ShapeError(
            f"projection width {proj.size(1)} != word feature width {words.size(0)}"
        )
    return proj @ words


def attention_weights(features: torch.Tensor, projected: torch.Tensor) -> torch.Tensor:
    """Per-region softmax over words of the region/word inner products.

    features: (M, N) image features, projected: (M, L) projected words.
    Returns (N, L) with nonnegative rows summing to one. Logits are shifted
    by their per-region maximum before exponentiation for stability.
    """
    if features.dim() != 2 or projected.dim() != 2:
        raise ShapeError("attention_weights expects 2-D matrices")
    if features.size(0) != projected.size(0):
        raise ShapeError(
            f"channel mismatch: features {features.size(0)} vs words {projected.size(0)}"
        )
    logits = features.t() @ projected  # (N, L)
    logits = logits - logits.amax(dim=1, keepdim=True)
    weights = torch.exp(logits)
    return weights / weights.sum(dim=1, keepdim=True)


def word_context_features(
    features: torch.Tensor, words: torch.Tensor, proj: torch.Tensor
) -> torch.Tensor:
    """Per-region convex combination of projected words, weighted by attention.

    Returns (M, N): column i is sum_j alpha_ij * w'_j.
    """
    projected = project_words(words, proj)
    alpha = attention_weights(features, projected)
    return projected @ alpha.t()


class WordAttention(nn.Module):
    """Attention block for one feature scale: owns the projection into that
    scale's channel space and computes batched word-context features.

    Masked positions (beyond each sequence's length) receive zero weight.
    """

    def __init__(self, channels: int, word_width: int):
        super().__init__()
        self.channels = channels
        self.word_width = word_width
        self.proj = nn.Linear(word_width, channels, bias=False)

    def forward(self, features: torch.Tensor, words: torch.Tensor, lengths=None):
        """features: (B, M, H, W); words: (B, D, L); lengths: optional (B,).

        Returns (context, alpha): context is (B, M, H, W), alpha is (B, N, L).
        """
        if features.dim() != 4:
            raise ShapeError(f"expected (B, M, H, W) features, got {tuple(features.shape)}")
        if words.dim() != 3:
            raise ShapeError(f"expected (B, D, L) words, got {tuple(words.shape)}")
        if features.size(0) != words.size(0):
            raise ShapeError("batch size mismatch between features and words")
        if features.size(1) != self.channels:
            raise ShapeError(
                f"feature channels {features.size(1)} != projection output {self.channels}"
            )
        if words.size(1) != self.word_width:
            raise ShapeError(
                f"word width {words.size(1)} != projection input {self.word_width}"
            )
        b, m, h, w = features.shape
        n = h * w
        flat = features.reshape(b, m, n)
        projected = self.proj(words.transpose(1, 2)).transpose(1, 2)  # (B, M, L)

        logits = torch.bmm(flat.transpose(1, 2), projected)  # (B, N, L)
        if lengths is not None:
            mask = torch.arange(words.size(2), device=logits.device)[None, :] >= lengths.to(
                logits.device
            )[:, None]
            logits = logits.masked_fill(mask[:, None, :], NEG_INF)
        logits = logits - logits.amax(dim=2, keepdim=True)
        alpha = torch.softmax(logits, dim=2)

        context = torch.bmm(projected, alpha.transpose(1, 2))  # (B, M, N)
        return context.reshape(b, m, h, w), alpha


_HEADER = struct.Struct("<4I")


def save_attention_map(alpha, height: int, width: int, path):
    """Write one (N, L) attention map as the binary exchange format:
    a 16-byte header of little-endian uint32 (N, L, H, W) followed by the
    row-major float32 weights."""
    arr = np.asarray(
        alpha.detach().cpu().numpy() if isinstance(alpha, torch.Tensor) else alpha,
        dtype=np.float32,
    )
    if arr.ndim != 2:
        raise ShapeError("attention map must be 2-D (regions x words)")
    n, l = arr.shape
    if n != height * width:
        raise ShapeError(f"region count {n} != {height}x{width}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(n, l, height, width))
        fh.write(np.ascontiguousarray(arr).tobytes())


def load_attention_map(path):
    """Read the binary exchange format back; returns (alpha (N, L), H, W)."""
    with open(path, "rb") as fh:
        n, l, height, width = _HEADER.unpack(fh.read(_HEADER.size))
        data = np.frombuffer(fh.read(), dtype=np.float32)
    if data.size != n * l:
        raise ShapeError(f"payload holds {data.size} floats, header promises {n * l}")
    return data.reshape(n, l).copy(), height, width
