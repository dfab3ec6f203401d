"""Command-line entry points: train | eval | manipulate | interpolate |
heatmap | synth | serve. Usage problems exit 2 (argparse), runtime failures
exit 1 with a diagnostic on stderr."""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .data import (SyntheticSpec, denormalize_image, load_split, normalize_image,
                   synth_generate, write_corpus)
from .errors import WordbrushError
from .evaluate import (attention_heatmaps, format_metrics_table, label_entropy_probe,
                       pixel_losses, save_frame_strip, save_heatmap_grid,
                       train_label_classifier, write_metrics)
from .inference import load_manipulator
from .text import Vocabulary
from .training import TrainingConfig, run_training

logger = logging.getLogger(__name__)

ENV_PREFIX = "WORDBRUSH_"


def _env(name, default=None):
    return os.environ.get(ENV_PREFIX + name, default)


def _load_items(args, split: str, training: bool = False):
    if args.dataset == "synth" and args.data_root is None:
        items, _ = synth_generate(args.n, args.seed)
        return [it for it in items if it.split == split]
    if args.data_root is None:
        raise WordbrushError("--data-root is required for on-disk datasets")
    return load_split(args.data_root, args.dataset, split,
                      resolution=args.resolution, training=training)


def _read_image(path: str, resolution: int | None) -> torch.Tensor:
    pil = Image.open(path).convert("RGB")
    if resolution is not None and pil.size != (resolution, resolution):
        short = min(pil.size)
        scale = resolution / short
        pil = pil.resize((max(resolution, round(pil.width * scale)),
                          max(resolution, round(pil.height * scale))), Image.BILINEAR)
        left = (pil.width - resolution) // 2
        top = (pil.height - resolution) // 2
        pil = pil.crop((left, top, left + resolution, top + resolution))
    return normalize_image(np.asarray(pil))


def _write_image(image: torch.Tensor, path: str):
    Image.fromarray(denormalize_image(image)).save(path)


def _add_model_flags(p: argparse.ArgumentParser):
    p.add_argument("--checkpoint", required=_env("CHECKPOINT") is None,
                   default=_env("CHECKPOINT"))
    p.add_argument("--vocab", required=_env("VOCAB") is None, default=_env("VOCAB"))


def _add_data_flags(p: argparse.ArgumentParser):
    p.add_argument("--dataset", choices=("synth", "cub", "oxford102"), default="synth")
    p.add_argument("--data-root", default=None)
    p.add_argument("--n", type=int, default=500, help="synthetic corpus size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=int, default=64)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wordbrush",
                                     description="Edit images with natural-language descriptions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run adversarial training")
    _add_data_flags(p)
    p.add_argument("--mode", choices=("single", "multi"), default="multi")
    p.add_argument("--epochs", type=int, default=600)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--channels", default="64,128,256,512")
    p.add_argument("--embed-dim", type=int, default=300)
    p.add_argument("--text-hidden", type=int, default=128)
    p.add_argument("--max-length", type=int, default=20)
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--lr-d", type=float, default=None,
                   help="separate discriminator step size (default: --lr)")
    p.add_argument("--gamma1", type=float, default=None)
    p.add_argument("--gamma2", type=float, default=None)
    p.add_argument("--match-gain", type=float, default=10.0,
                   help="initial sharpness of the word matching score")
    p.add_argument("--checkpoint-every", type=int, default=50)
    p.add_argument("--grad-clip", type=float, default=None)
    p.add_argument("--no-flip", action="store_true")
    p.add_argument("--no-crop", action="store_true")
    p.add_argument("--resume", default=None)
    p.add_argument("--out", default="wordbrush-run")

    p = sub.add_parser("eval", help="pixel losses (and optional entropy probe) on a split")
    _add_model_flags(p)
    _add_data_flags(p)
    p.add_argument("--split", default="test")
    p.add_argument("--entropy-probe", action="store_true")
    p.add_argument("--metrics-out", default=None)

    p = sub.add_parser("manipulate", help="edit one image from a description")
    _add_model_flags(p)
    p.add_argument("--image", required=True)
    p.add_argument("--description", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--heatmap-grid", default=None)

    p = sub.add_parser("interpolate", help="sweep between two descriptions")
    _add_model_flags(p)
    p.add_argument("--image", required=True)
    p.add_argument("--from-description", required=True)
    p.add_argument("--to-description", required=True)
    p.add_argument("--steps", type=int, default=5)
    p.add_argument("--out", required=True, help="path for the frame strip image")
    p.add_argument("--frames-dir", default=None, help="also write individual frames here")

    p = sub.add_parser("heatmap", help="per-word attention heatmaps for one image")
    _add_model_flags(p)
    p.add_argument("--image", required=True)
    p.add_argument("--description", required=True)
    p.add_argument("--out", required=True, help="path for the heatmap grid image")
    p.add_argument("--scale", type=int, default=0, help="0 = deepest attention scale")
    p.add_argument("--raw-dir", default=None, help="also dump raw maps + words here")

    p = sub.add_parser("synth", help="materialize the synthetic shapes corpus")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="start the HTTP inference service")
    _add_model_flags(p)
    p.add_argument("--host", default=_env("HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=int(_env("PORT", "8765")))
    p.add_argument("--max-payload-bytes", type=int,
                   default=int(_env("MAX_PAYLOAD", str(8 * 1024 * 1024))))
    return parser


def _cmd_train(args) -> int:
    from .losses import LossWeights

    items = _load_items(args, "train", training=True)
    weights = None
    if args.gamma1 is not None or args.gamma2 is not None:
        base = LossWeights.for_mode(args.mode)
        weights = LossWeights(
            gamma1=args.gamma1 if args.gamma1 is not None else base.gamma1,
            gamma2=args.gamma2 if args.gamma2 is not None else base.gamma2,
        )
    config = TrainingConfig(
        mode=args.mode, resolution=args.resolution,
        channels=tuple(int(c) for c in args.channels.split(",")),
        embed_dim=args.embed_dim, text_hidden=args.text_hidden,
        max_length=args.max_length, epochs=args.epochs, batch_size=args.batch_size,
        lr=args.lr, lr_d=args.lr_d, match_gain=args.match_gain,
        weights=weights, seed=args.seed,
        flip=not args.no_flip, crop=not args.no_crop,
        checkpoint_every=args.checkpoint_every, grad_clip=args.grad_clip,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from .data import build_vocabulary

    vocab = build_vocabulary(items)
    vocab.save(out / "vocab.txt")
    written = run_training(config, items, out, vocab=vocab, resume=args.resume)
    for path in written:
        print(path)
    return 0


def _cmd_eval(args) -> int:
    m = load_manipulator(args.checkpoint, args.vocab)
    items = _load_items(args, args.split)
    l1, l2 = pixel_losses(m, items)
    metrics = {"split": args.split, "items": len(items), "l1": l1, "l2": l2}
    if args.entropy_probe:
        train_items = _load_items(args, "train")
        clf = train_label_classifier(train_items, seed=args.seed)
        recons = torch.stack([m.reconstruct(it.image, it.captions[0]) for it in items])
        reals = torch.stack([it.image for it in items])
        metrics["entropy_recon_nats"] = label_entropy_probe(clf, recons).mean_entropy
        metrics["entropy_real_nats"] = label_entropy_probe(clf, reals).mean_entropy
    print(format_metrics_table(metrics))
    if args.metrics_out:
        write_metrics(metrics, args.metrics_out)
    return 0


def _cmd_manipulate(args) -> int:
    m = load_manipulator(args.checkpoint, args.vocab)
    image = _read_image(args.image, m.resolution)
    output = m.manipulate(image, args.description)
    _write_image(output, args.out)
    print(args.out)
    if args.heatmap_grid:
        hm = attention_heatmaps(m, image, args.description)
        save_heatmap_grid(image, hm, args.heatmap_grid)
        print(args.heatmap_grid)
    return 0


def _cmd_interpolate(args) -> int:
    m = load_manipulator(args.checkpoint, args.vocab)
    image = _read_image(args.image, m.resolution)
    frames = m.interpolate(image, args.from_description, args.to_description, args.steps)
    save_frame_strip(frames, args.out)
    print(args.out)
    if args.frames_dir:
        frames_dir = Path(args.frames_dir)
        frames_dir.mkdir(parents=True, exist_ok=True)
        for i, frame in enumerate(frames):
            _write_image(frame, frames_dir / f"frame_{i:02d}.png")
        print(frames_dir)
    return 0


def _cmd_heatmap(args) -> int:
    from .attention import save_attention_map

    m = load_manipulator(args.checkpoint, args.vocab)
    image = _read_image(args.image, m.resolution)
    hm = attention_heatmaps(m, image, args.description, scale=args.scale)
    save_heatmap_grid(image, hm, args.out)
    print(args.out)
    if args.raw_dir:
        raw = Path(args.raw_dir)
        raw.mkdir(parents=True, exist_ok=True)
        _, alphas, words = m.attention(image, args.description)
        alpha = alphas[args.scale]
        side = int(round(alpha.size(0) ** 0.5))
        save_attention_map(alpha[:, :len(words)], side, side, raw / "attention.bin")
        (raw / "words.txt").write_text("\n".join(words) + "\n", encoding="utf-8")
        print(raw)
    return 0


def _cmd_synth(args) -> int:
    spec = SyntheticSpec()
    items, _ = synth_generate(args.n, args.seed, spec)
    write_corpus(items, args.out, spec=spec, seed=args.seed)
    print(args.out)
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    m = load_manipulator(args.checkpoint, args.vocab)
    serve(m, host=args.host, port=args.port, max_payload_bytes=args.max_payload_bytes)
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "manipulate": _cmd_manipulate,
    "interpolate": _cmd_interpolate,
    "heatmap": _cmd_heatmap,
    "synth": _cmd_synth,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except WordbrushError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
