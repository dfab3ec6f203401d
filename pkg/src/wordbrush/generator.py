"""Encoder-decoder generators.

Two variants share one image encoder design:

* single: word-context features are computed once at the deepest feature map,
  concatenated with it, and pushed through residual blocks and the decoder.
* multi: word-context features are computed at every pyramid scale and fused
  walking up the pyramid (concat -> conv -> nearest-neighbour upsample); the
  final hidden state is concatenated with the shallow encoder feature before
  the residual blocks.

All convolutions are bias-free and the output layer carries no batchnorm.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn

from .attention import WordAttention
from .errors import NumericalFailure, ShapeError

SUPPORTED_SIZES = (64, 128, 256)


def conv3x3(in_ch, out_ch, stride=1):
    return nn.Conv2d(in_ch, out_ch, kernel_size=3, stride=stride, padding=1, bias=False)


def upscale():
    return nn.Upsample(scale_factor=2, mode="nearest")


@dataclass
class FeaturePyramid:
    """Per-scale feature maps, shallowest first; ``levels[-1]`` is the deepest
    (smallest) map that seeds the attention chain. ``skip`` is the half-
    resolution encoder feature reused before the residual stack in multi mode.
    """

    levels: list[torch.Tensor]
    skip: torch.Tensor

    @property
    def deepest(self) -> torch.Tensor:
        return self.levels[-1]


class ImageEncoder(nn.Module):
    """Stack of stride-2 convolutions; the last ``scales`` outputs form the
    feature pyramid. ``extra_conv`` inserts one stride-1 convolution after the
    first stage (the relocated residual convolution used in multi mode)."""

    def __init__(self, channels=(64, 128, 256, 512), scales=3, extra_conv=False):
        super().__init__()
        if len(channels) != scales + 1:
            raise ValueError(f"need {scales + 1} channel counts for {scales} scales")
        self.scales = scales
        self.channels = tuple(channels)
        stages = []
        in_ch = 3
        for i, out_ch in enumerate(channels):
            stage = [conv3x3(in_ch, out_ch, stride=2), nn.BatchNorm2d(out_ch), nn.ReLU(inplace=True)]
            if i == 0 and extra_conv:
                stage += [conv3x3(out_ch, out_ch), nn.BatchNorm2d(out_ch), nn.ReLU(inplace=True)]
            stages.append(nn.Sequential(*stage))
            in_ch = out_ch
        self.stages = nn.ModuleList(stages)

    def forward(self, image: torch.Tensor) -> FeaturePyramid:
        if image.dim() != 4 or image.size(1) != 3:
            raise ShapeError(f"expected (B, 3, S, S) image, got {tuple(image.shape)}")
        if image.size(2) != image.size(3):
            raise ShapeError(f"image must be square, got {image.size(2)}x{image.size(3)}")
        if image.size(2) not in SUPPORTED_SIZES:
            raise ShapeError(f"unsupported size {image.size(2)}, want one of {SUPPORTED_SIZES}")
        feats = []
        x = image
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return FeaturePyramid(levels=feats[-self.scales:], skip=feats[0])


class ResidualBlock(nn.Module):
    """Pre-activation residual block; ``single_conv`` drops the second
    convolution (its partner lives in the encoder in multi mode)."""

    def __init__(self, channels, single_conv=False):
        super().__init__()
        layers = [nn.BatchNorm2d(channels), nn.ReLU(inplace=True), conv3x3(channels, channels)]
        if not single_conv:
            layers += [nn.BatchNorm2d(channels), nn.ReLU(inplace=True), conv3x3(channels, channels)]
        self.body = nn.Sequential(*layers)

    def forward(self, x):
        return x + self.body(x)


class AttnFusion(nn.Module):
    """One fusion step: word-context features of the current scale are
    concatenated channel-wise with the previous hidden state, convolved, and
    nearest-neighbour upsampled x2."""

    def __init__(self, feature_channels, hidden_channels, out_channels, word_width):
        super().__init__()
        self.attn = WordAttention(feature_channels, word_width)
        self.fuse = nn.Sequential(
            conv3x3(feature_channels + hidden_channels, out_channels),
            nn.BatchNorm2d(out_channels),
            nn.ReLU(inplace=True),
            upscale(),
        )

    def forward(self, h_prev, features, words, lengths=None):
        if h_prev.shape[2:] != features.shape[2:]:
            raise ShapeError(
                f"hidden state {tuple(h_prev.shape[2:])} does not align with "
                f"features {tuple(features.shape[2:])}"
            )
        context, alpha = self.attn(features, words, lengths)
        h = self.fuse(torch.cat([context, h_prev], dim=1))
        return h, alpha


def _decoder(in_ch, plan):
    """Nearest-neighbour upsample + conv pairs following ``plan`` channel
    counts, finished by a batchnorm-free output convolution and tanh."""
    layers = []
    for out_ch in plan:
        layers += [upscale(), conv3x3(in_ch, out_ch), nn.BatchNorm2d(out_ch), nn.ReLU(inplace=True)]
        in_ch = out_ch
    layers += [conv3x3(in_ch, 3), nn.Tanh()]
    return nn.Sequential(*layers)


class SingleScaleGenerator(nn.Module):
    mode = "single"

    def __init__(self, word_width, channels=(64, 128, 256, 512), scales=3, num_res_blocks=4):
        super().__init__()
        self.scales = scales
        self.channels = tuple(channels)
        self.encoder = ImageEncoder(channels, scales)
        deep = channels[-1]
        self.attn = WordAttention(deep, word_width)
        self.res_blocks = nn.Sequential(*[ResidualBlock(2 * deep) for _ in range(num_res_blocks)])
        plan = list(reversed(channels[:-1])) + [channels[0] // 2]
        self.decoder = _decoder(2 * deep, plan)

    def forward(self, image, words, lengths=None, return_attention=False):
        pyramid = self.encoder(image)
        deepest = pyramid.deepest
        context, alpha = self.attn(deepest, words, lengths)
        h = self.res_blocks(torch.cat([deepest, context], dim=1))
        out = self.decoder(h)
        if return_attention:
            return out, [alpha]
        return out


class MultiScaleGenerator(nn.Module):
    mode = "multi"

    def __init__(self, word_width, channels=(64, 128, 256, 512), scales=3,
                 num_res_blocks=4, move_last_res_conv=True):
        super().__init__()
        self.scales = scales
        self.channels = tuple(channels)
        self.move_last_res_conv = move_last_res_conv
        self.encoder = ImageEncoder(channels, scales, extra_conv=move_last_res_conv)

        pyramid_ch = list(channels[-scales:])       # V_m .. V_1 channel counts
        deep_first = list(reversed(pyramid_ch))     # V_1 .. V_m
        self.deep_attn = WordAttention(deep_first[0], word_width)
        self.h0_up = upscale()
        fusions = []
        h_ch = deep_first[0]
        for feat_ch in deep_first[1:]:
            fusions.append(AttnFusion(feat_ch, h_ch, feat_ch, word_width))
            h_ch = feat_ch
        self.fusions = nn.ModuleList(fusions)

        res_ch = h_ch + channels[0]  # final hidden state + shallow encoder feature
        blocks = [ResidualBlock(res_ch) for _ in range(num_res_blocks)]
        if move_last_res_conv:
            blocks[-1] = ResidualBlock(res_ch, single_conv=True)
        self.res_blocks = nn.Sequential(*blocks)
        self.decoder = _decoder(res_ch, [channels[0]])

    def forward(self, image, words, lengths=None, return_attention=False):
        pyramid = self.encoder(image)
        deep_first = list(reversed(pyramid.levels))  # V_1 .. V_m

        context, alpha = self.deep_attn(deep_first[0], words, lengths)
        attentions = [alpha]
        h = self.h0_up(context)
        for fusion, features in zip(self.fusions, deep_first[1:]):
            h, alpha = fusion(h, features, words, lengths)
            attentions.append(alpha)

        h = torch.cat([h, pyramid.skip], dim=1)
        out = self.decoder(self.res_blocks(h))
        if return_attention:
            return out, attentions
        return out


def build_generator(mode, word_width, channels=(64, 128, 256, 512), scales=3,
                    num_res_blocks=4, move_last_res_conv=True):
    if mode == "single":
        return SingleScaleGenerator(word_width, channels, scales, num_res_blocks)
    if mode == "multi":
        return MultiScaleGenerator(word_width, channels, scales, num_res_blocks,
                                   move_last_res_conv)
    raise ValueError(f"unknown generator mode {mode!r}")


def encode_image(image: torch.Tensor, generator) -> FeaturePyramid:
    """Run only the encoder half; images must be normalized to [-1, 1]."""
    return generator.encoder(image)


def generate(generator, image, words, lengths=None, return_attention=False):
    """Forward pass with a NaN guard; propagates ShapeError from submodules."""
    result = generator(image, words, lengths, return_attention=return_attention)
    out = result[0] if return_attention else result
    if not torch.isfinite(out).all():
        raise NumericalFailure("generator produced non-finite output")
    return result


def init_gan_weights(module: torch.nn.Module):
    """DCGAN-style initialization applied via ``model.apply``."""
    if isinstance(module, nn.Conv2d):
        nn.init.normal_(module.weight, 0.0, 0.02)
    elif isinstance(module, nn.BatchNorm2d):
        nn.init.normal_(module.weight, 1.0, 0.02)
        nn.init.zeros_(module.bias)
