"""Adversarial training: alternating discriminator/generator updates with
mismatched-description sampling, reconstruction on matched pairs, and a
stepwise-decayed adaptive-moment schedule.

All data-side randomness (epoch order, caption choice, mismatch partners,
augmentation draws) comes from one numpy generator carried in TrainState, so
a saved state replays the exact trajectory. Parameter initialization is
seeded separately through torch.
"""

import json
import logging
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data import CaptionedImage, build_vocabulary
from .discriminator import Discriminator, score
from .errors import DataError, InsufficientData, ShapeError
from .generator import SUPPORTED_SIZES, build_generator, init_gan_weights
from .losses import LossReport, LossWeights, build_report, discriminator_loss, generator_loss, reconstruction_loss
from .text import DEFAULT_MAX_LENGTH, TextEncoder, TokenSequence, Vocabulary, batch_tokens, tokenize

logger = logging.getLogger(__name__)


@dataclass
class TrainingConfig:
    mode: str = "multi"
    resolution: int = 128
    scales: int = 3
    channels: tuple = (64, 128, 256, 512)
    num_res_blocks: int = 4
    embed_dim: int = 300
    text_hidden: int = 128
    max_length: int = DEFAULT_MAX_LENGTH
    epochs: int = 600
    batch_size: int | None = None   # resolved by resolution when unset
    lr: float = 2e-4
    lr_d: float | None = None       # discriminator step size; None = lr
    match_gain: float = 10.0        # initial sharpness of the word matching score
    beta1: float = 0.5
    beta2: float = 0.999
    decay_every: int = 100
    decay_factor: float = 0.5
    weights: LossWeights | None = None
    seed: int = 0
    flip: bool = True
    crop: bool = True
    checkpoint_every: int = 50
    grad_clip: float | None = None

    def __post_init__(self):
        if self.mode not in ("single", "multi"):
            raise ValueError(f"mode must be 'single' or 'multi', got {self.mode!r}")
        if self.resolution not in SUPPORTED_SIZES:
            raise ValueError(f"resolution {self.resolution} not in {SUPPORTED_SIZES}")
        if self.batch_size is None:
            self.batch_size = 128 if self.resolution <= 128 else 32
        for name in ("epochs", "batch_size", "decay_every", "checkpoint_every",
                     "scales", "max_length", "embed_dim", "text_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.lr <= 0 or not (0 < self.decay_factor <= 1):
            raise ValueError("lr must be positive and decay_factor in (0, 1]")
        if self.lr_d is not None and self.lr_d <= 0:
            raise ValueError("lr_d must be positive when set")
        if self.match_gain <= 0:
            raise ValueError("match_gain must be positive")
        if self.epochs >= self.decay_every and self.epochs % self.decay_every != 0:
            raise ValueError("decay_every must divide epochs evenly")
        if self.weights is None:
            self.weights = LossWeights.for_mode(self.mode)
        self.channels = tuple(self.channels)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = list(self.channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingConfig":
        d = dict(d)
        if isinstance(d.get("weights"), dict):
            d["weights"] = LossWeights(**d["weights"])
        return cls(**d)


def effective_lr(config: TrainingConfig, epoch_index: int,
                 discriminator: bool = False) -> float:
    """Step size for a zero-based epoch index under the halving schedule."""
    base = (config.lr_d or config.lr) if discriminator else config.lr
    return base * config.decay_factor ** (epoch_index // config.decay_every)


@dataclass
class TrainState:
    config: TrainingConfig
    vocab: Vocabulary
    text_encoder: TextEncoder
    generator: nn.Module
    discriminator: Discriminator
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    rng: np.random.Generator
    epoch: int = 0
    step: int = 0


def build_state(config: TrainingConfig, vocab: Vocabulary) -> TrainState:
    torch.manual_seed(config.seed)
    text_encoder = TextEncoder(len(vocab), config.embed_dim, config.text_hidden)
    generator = build_generator(
        config.mode, text_encoder.width, channels=config.channels,
        scales=config.scales, num_res_blocks=config.num_res_blocks,
    )
    discriminator = Discriminator(text_encoder.width, channels=config.channels,
                                  match_gain=config.match_gain)
    generator.apply(init_gan_weights)
    discriminator.apply(init_gan_weights)
    opt_g = torch.optim.Adam(
        list(generator.parameters()) + list(text_encoder.parameters()),
        lr=config.lr, betas=(config.beta1, config.beta2),
    )
    opt_d = torch.optim.Adam(
        discriminator.parameters(), lr=config.lr_d or config.lr,
        betas=(config.beta1, config.beta2),
    )
    return TrainState(
        config=config, vocab=vocab, text_encoder=text_encoder, generator=generator,
        discriminator=discriminator, opt_g=opt_g, opt_d=opt_d,
        rng=np.random.default_rng(config.seed),
    )


def _mismatch_index(n: int, current: int, rng: np.random.Generator) -> int:
    j = int(rng.integers(n - 1))
    return j + 1 if j >= current else j


def sample_mismatch(items: list[CaptionedImage], current: int, rng: np.random.Generator) -> str:
    """A caption drawn uniformly from the items other than ``current``."""
    if len(items) < 2:
        raise InsufficientData("mismatch sampling needs at least 2 items")
    partner = items[_mismatch_index(len(items), current, rng)]
    return partner.captions[int(rng.integers(len(partner.captions)))]


def horizontal_flip(image: torch.Tensor) -> torch.Tensor:
    return torch.flip(image, dims=[-1])


def augment(image: torch.Tensor, rng: np.random.Generator, target: int,
            flip: bool = True, crop: bool = True) -> torch.Tensor:
    """Random horizontal flip (p=0.5) then random crop to ``target``."""
    if image.dim() != 3:
        raise ShapeError(f"expected (3, H, W), got {tuple(image.shape)}")
    h, w = image.shape[1:]
    if h < target or w < target:
        raise ShapeError(f"image {h}x{w} smaller than crop target {target}")
    if flip and rng.random() < 0.5:
        image = horizontal_flip(image)
    if crop:
        dy = int(rng.integers(h - target + 1))
        dx = int(rng.integers(w - target + 1))
        image = image[:, dy:dy + target, dx:dx + target]
    return image


def _tokenize_corpus(items: list[CaptionedImage], vocab: Vocabulary,
                     max_length: int) -> list[list[TokenSequence]]:
    return [[tokenize(c, vocab, max_length) for c in it.captions] for it in items]


def make_batch(items: list[CaptionedImage], cache: list[list[TokenSequence]],
               indices, state: TrainState) -> dict:
    """Assemble one training batch; every random draw comes from state.rng."""
    cfg, rng = state.config, state.rng
    images, seqs, mis_seqs = [], [], []
    for i in indices:
        i = int(i)
        seqs.append(cache[i][int(rng.integers(len(cache[i])))])
        j = _mismatch_index(len(items), i, rng)
        mis_seqs.append(cache[j][int(rng.integers(len(cache[j])))])
        images.append(augment(items[i].image, rng, cfg.resolution, cfg.flip, cfg.crop))
    tokens, lengths = batch_tokens(seqs)
    mis_tokens, mis_lengths = batch_tokens(mis_seqs)
    return {
        "images": torch.stack(images),
        "tokens": tokens, "lengths": lengths,
        "mis_tokens": mis_tokens, "mis_lengths": mis_lengths,
    }


def _clip(params, limit):
    total = torch.nn.utils.clip_grad_norm_(params, limit)
    if total > limit:
        logger.warning("gradient norm %.3f clipped to %.3f", float(total), limit)


def train_step(batch: dict, state: TrainState) -> LossReport:
    """One discriminator update on the negated matching-aware objective, then
    one generator update including reconstruction on the matched pair."""
    cfg = state.config
    te, gen, disc = state.text_encoder, state.generator, state.discriminator
    te.train(), gen.train(), disc.train()
    images = batch["images"]

    words = te(batch["tokens"], batch["lengths"])
    mis_words = te(batch["mis_tokens"], batch["mis_lengths"])
    fake = gen(images, mis_words, batch["mis_lengths"])

    state.opt_d.zero_grad(set_to_none=True)
    real_pair = score(disc, images, words.detach(), batch["lengths"])
    fake_pair = score(disc, fake.detach(), mis_words.detach(), batch["mis_lengths"])
    d_loss = discriminator_loss(real_pair, fake_pair, cfg.weights)
    d_loss.backward()
    if cfg.grad_clip:
        _clip(disc.parameters(), cfg.grad_clip)
    state.opt_d.step()

    state.opt_g.zero_grad(set_to_none=True)
    fake_pair_g = score(disc, fake, mis_words, batch["mis_lengths"])
    recon = reconstruction_loss(gen(images, words, batch["lengths"]), images)
    g_loss = generator_loss(fake_pair_g, recon, cfg.weights)
    g_loss.backward()
    if cfg.grad_clip:
        _clip(list(gen.parameters()) + list(te.parameters()), cfg.grad_clip)
    state.opt_g.step()

    state.step += 1
    return build_report(real_pair, fake_pair, d_loss, fake_pair_g, recon, g_loss, cfg.weights)


def epoch_batches(n: int, batch_size: int, rng: np.random.Generator):
    """Shuffled index batches covering every item once (ceil(n/b) batches)."""
    order = rng.permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def append_loss_record(handle, epoch: int, step: int, report: LossReport):
    record = {"epoch": epoch, "step": step, **report.as_dict()}
    handle.write(json.dumps(record, sort_keys=True) + "\n")
    handle.flush()


def read_loss_log(path) -> list[dict]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [json.loads(line) for line in lines if line]


def run_training(config: TrainingConfig, items: list[CaptionedImage], out_dir,
                 vocab: Vocabulary | None = None, resume=None,
                 log_name: str = "losses.jsonl") -> list[Path]:
    """Train to config.epochs, checkpointing every ``checkpoint_every`` epochs
    and always at the end. Returns the checkpoint paths written."""
    from .checkpoint import restore_train_state, save_checkpoint

    if len(items) < 2:
        raise InsufficientData("training needs at least 2 items")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if vocab is None:
        vocab = build_vocabulary(items)

    if resume is not None:
        state = restore_train_state(resume, vocab)
        frozen = ("mode", "resolution", "scales", "channels", "num_res_blocks",
                  "embed_dim", "text_hidden", "max_length")
        saved, wanted = state.config.as_dict(), config.as_dict()
        changed = [f for f in frozen if saved[f] != wanted[f]]
        if changed:
            raise DataError(
                f"resume config changes model structure: {', '.join(changed)}"
            )
        state.config = config  # the caller owns the schedule (epochs, lr, decay)
    else:
        state = build_state(config, vocab)

    (out_dir / "config.json").write_text(
        json.dumps(config.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    cache = _tokenize_corpus(items, vocab, config.max_length)

    written = []
    with open(out_dir / log_name, "a", encoding="utf-8") as log:
        for epoch in range(state.epoch, config.epochs):
            for group in state.opt_g.param_groups:
                group["lr"] = effective_lr(config, epoch)
            for group in state.opt_d.param_groups:
                group["lr"] = effective_lr(config, epoch, discriminator=True)
            for indices in epoch_batches(len(items), config.batch_size, state.rng):
                batch = make_batch(items, cache, indices, state)
                report = train_step(batch, state)
                append_loss_record(log, epoch + 1, state.step, report)
            state.epoch = epoch + 1
            last = state.epoch == config.epochs
            if state.epoch % config.checkpoint_every == 0 or last:
                path = out_dir / f"checkpoint_epoch{state.epoch:04d}.pt"
                save_checkpoint(path, state)
                written.append(path)
                logger.info("epoch %d: wrote %s", state.epoch, path.name)
    return written
