"""Checkpoint archives: one file holding every named parameter array plus a
manifest (mode, scale count, channel plan, vocabulary hash, config snapshot)
and enough optimizer/random-stream state to resume a run bit-for-bit.

Inference refuses archives whose vocabulary hash does not match the loaded
vocabulary; silently remapping word indices would scramble the text input.
"""

import hashlib
import json
import os
from pathlib import Path

import torch

from .errors import DataError
from .text import Vocabulary

FORMAT_VERSION = 1


def checkpoint_digest(state) -> str:
    """Deterministic id over mode, progress, and every parameter byte."""
    h = hashlib.sha256()
    h.update(f"{state.config.mode}:{state.epoch}:{state.step}".encode())
    for module in (state.text_encoder, state.generator, state.discriminator):
        sd = module.state_dict()
        for key in sorted(sd):
            h.update(key.encode())
            h.update(sd[key].detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()[:16]


def save_checkpoint(path, state) -> str:
    """Write the archive atomically (temp file + rename) and return its id."""
    path = Path(path)
    cfg = state.config
    manifest = {
        "format": FORMAT_VERSION,
        "checkpoint_id": checkpoint_digest(state),
        "mode": cfg.mode,
        "scales": cfg.scales,
        "channels": list(cfg.channels),
        "resolution": cfg.resolution,
        "embed_dim": cfg.embed_dim,
        "text_hidden": cfg.text_hidden,
        "word_width": state.text_encoder.width,
        "vocab_hash": state.vocab.content_hash(),
        "vocab_size": len(state.vocab),
        "epoch": state.epoch,
        "step": state.step,
    }
    payload = {
        "manifest": manifest,
        "config": cfg.as_dict(),
        "config_text": json.dumps(cfg.as_dict(), indent=2, sort_keys=True),
        "models": {
            "text_encoder": state.text_encoder.state_dict(),
            "generator": state.generator.state_dict(),
            "discriminator": state.discriminator.state_dict(),
        },
        "optimizers": {
            "g": state.opt_g.state_dict(),
            "d": state.opt_d.state_dict(),
        },
        "rng": {
            "numpy": state.rng.bit_generator.state,
            "torch": torch.get_rng_state(),
        },
    }
    tmp = path.with_name(path.name + ".tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)
    return manifest["checkpoint_id"]


def load_checkpoint(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing checkpoint: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise DataError(f"unreadable checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or "manifest" not in payload:
        raise DataError(f"{path} is not a checkpoint archive")
    return payload


def _check_vocab(manifest: dict, vocab: Vocabulary):
    want, have = manifest.get("vocab_hash"), vocab.content_hash()
    if want != have:
        raise DataError(
            f"vocabulary hash mismatch: checkpoint expects {want}, loaded {have}"
        )


def restore_train_state(source, vocab: Vocabulary):
    """Rebuild a full TrainState (models, optimizer moments, random streams,
    progress counters) from an archive path or loaded payload."""
    from .training import TrainingConfig, build_state
    import numpy as np

    payload = source if isinstance(source, dict) else load_checkpoint(source)
    _check_vocab(payload["manifest"], vocab)
    config = TrainingConfig.from_dict(payload["config"])
    state = build_state(config, vocab)
    state.text_encoder.load_state_dict(payload["models"]["text_encoder"])
    state.generator.load_state_dict(payload["models"]["generator"])
    state.discriminator.load_state_dict(payload["models"]["discriminator"])
    state.opt_g.load_state_dict(payload["optimizers"]["g"])
    state.opt_d.load_state_dict(payload["optimizers"]["d"])
    rng = np.random.default_rng()
    rng.bit_generator.state = payload["rng"]["numpy"]
    state.rng = rng
    torch.set_rng_state(payload["rng"]["torch"])
    state.epoch = payload["manifest"]["epoch"]
    state.step = payload["manifest"]["step"]
    return state


def load_for_inference(source, vocab: Vocabulary):
    """(text_encoder, generator, manifest) in eval mode, vocab hash enforced."""
    from .training import TrainingConfig, build_state

    payload = source if isinstance(source, dict) else load_checkpoint(source)
    _check_vocab(payload["manifest"], vocab)
    config = TrainingConfig.from_dict(payload["config"])
    state = build_state(config, vocab)
    state.text_encoder.load_state_dict(payload["models"]["text_encoder"])
    state.generator.load_state_dict(payload["models"]["generator"])
    state.text_encoder.eval()
    state.generator.eval()
    for p in state.text_encoder.parameters():
        p.requires_grad_(False)
    for p in state.generator.parameters():
        p.requires_grad_(False)
    return state.text_encoder, state.generator, payload["manifest"]
