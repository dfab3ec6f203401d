"""Adversarial and reconstruction objectives.

The discriminator maximizes

    E[log D(I)] + E[log(1 - D(G(I,T^)))]
    + g1 * E[log D(I,T)] + g1 * E[log(1 - D(G(I,T^),T^))]

so its minimized loss is the negation of that sum. The generator minimizes

    -( E[log D(G(I,T^))] + g1 * E[log D(G(I,T^),T^)] ) + g2 * L_R

where L_R is the mean absolute reconstruction error of positive pairs. Both
adversarial terms are taken over generated images: a term over real images
alone carries no generator gradient. Scores are clamped away from {0, 1} by
EPS before any logarithm.
"""

import json
from dataclasses import asdict, dataclass

import torch

from .discriminator import ScorePair
from .errors import NumericalFailure, ShapeError

EPS = 1e-7


@dataclass
class LossWeights:
    """gamma1 balances conditional vs unconditional terms; gamma2 weights the
    reconstruction loss (2 for single mode, 3 for multi mode by default)."""

    gamma1: float = 10.0
    gamma2: float = 2.0

    def __post_init__(self):
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ValueError("loss weights must be nonnegative")

    @classmethod
    def for_mode(cls, mode: str, gamma1: float = 10.0) -> "LossWeights":
        return cls(gamma1=gamma1, gamma2=2.0 if mode == "single" else 3.0)


@dataclass
class LossReport:
    """Per-step loss breakdown. The four d_* entries are the expectation
    terms of the discriminator objective before negation; g_uncond / g_cond
    are the generator's adversarial log terms; recon is the raw mean absolute
    error in the [-1, 1] training range."""

    d_total: float
    d_real_uncond: float
    d_fake_uncond: float
    d_real_cond: float
    d_fake_cond: float
    g_total: float
    g_uncond: float
    g_cond: float
    recon: float
    gamma1: float
    gamma2: float

    def as_dict(self):
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "LossReport":
        return cls(**json.loads(line))


def _checked_log(scores: torch.Tensor, name: str) -> torch.Tensor:
    if not torch.isfinite(scores).all():
        raise NumericalFailure(f"{name} scores are non-finite")
    return torch.log(scores.clamp(EPS, 1.0 - EPS))


def _checked_log1m(scores: torch.Tensor, name: str) -> torch.Tensor:
    if not torch.isfinite(scores).all():
        raise NumericalFailure(f"{name} scores are non-finite")
    return torch.log1p(-scores.clamp(EPS, 1.0 - EPS))


def discriminator_loss(real: ScorePair, fake: ScorePair, weights: LossWeights) -> torch.Tensor:
    """Negated discriminator objective (a scalar to minimize)."""
    objective = _checked_log(real.uncond, "real unconditional").mean()
    objective = objective + _checked_log1m(fake.uncond, "fake unconditional").mean()
    if real.cond is None or fake.cond is None:
        raise ShapeError("discriminator loss needs conditional scores on both sides")
    objective = objective + weights.gamma1 * _checked_log(real.cond, "real conditional").mean()
    objective = objective + weights.gamma1 * _checked_log1m(fake.cond, "fake conditional").mean()
    return -objective


def generator_loss(fake: ScorePair, recon: torch.Tensor, weights: LossWeights) -> torch.Tensor:
    """Adversarial generator loss plus weighted reconstruction."""
    if fake.cond is None:
        raise ShapeError("generator loss needs the conditional score of generated images")
    adversarial = _checked_log(fake.uncond, "fake unconditional").mean()
    adversarial = adversarial + weights.gamma1 * _checked_log(fake.cond, "fake conditional").mean()
    return -adversarial + weights.gamma2 * recon


def reconstruction_loss(image: torch.Tensor, reconstructed: torch.Tensor) -> torch.Tensor:
    """Mean absolute per-element difference; mean (not sum) keeps the weight
    resolution-independent."""
    if image.shape != reconstructed.shape:
        raise ShapeError(
            f"shape mismatch {tuple(image.shape)} vs {tuple(reconstructed.shape)}"
        )
    return (image - reconstructed).abs().mean()


def displayed_reconstruction(recon_value: float) -> float:
    """Convert a [-1, 1]-range L1 value to the [0, 1] display range."""
    return recon_value / 2.0


def build_report(real: ScorePair, fake: ScorePair, d_total: torch.Tensor,
                 g_fake: ScorePair, recon: torch.Tensor, g_total: torch.Tensor,
                 weights: LossWeights) -> LossReport:
    """Assemble the per-step record from the tensors already computed."""
    with torch.no_grad():
        return LossReport(
            d_total=float(d_total.detach()),
            d_real_uncond=float(_checked_log(real.uncond, "real unconditional").mean()),
            d_fake_uncond=float(_checked_log1m(fake.uncond, "fake unconditional").mean()),
            d_real_cond=float(_checked_log(real.cond, "real conditional").mean()),
            d_fake_cond=float(_checked_log1m(fake.cond, "fake conditional").mean()),
            g_total=float(g_total.detach()),
            g_uncond=float(_checked_log(g_fake.uncond, "fake unconditional").mean()),
            g_cond=float(_checked_log(g_fake.cond, "fake conditional").mean()),
            recon=float(recon.detach()),
            gamma1=weights.gamma1,
            gamma2=weights.gamma2,
        )
