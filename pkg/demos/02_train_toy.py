"""Train a small multi-scale model on the synthetic corpus.

Five epochs by default so the script finishes in about a minute on a
laptop CPU; pass --epochs 30 to reach editing quality. The run directory
holds config.json, losses.jsonl, vocab.txt, and checkpoints.
"""

import argparse
from pathlib import Path

import torch

from wordbrush import TrainingConfig, build_vocabulary, read_loss_log, run_training, synth_generate

torch.set_num_threads(max(1, torch.get_num_threads()))

parser = argparse.ArgumentParser()
parser.add_argument("--epochs", type=int, default=5)
parser.add_argument("--out", default="demo-run")
args = parser.parse_args()

items, _ = synth_generate(500, seed=11)
train_items = [it for it in items if it.split == "train"]
vocab = build_vocabulary(items)

config = TrainingConfig(
    mode="multi",
    resolution=64,
    channels=(16, 32, 64, 128),
    embed_dim=32,
    text_hidden=16,
    max_length=10,
    epochs=args.epochs,
    batch_size=32,
    lr=2e-3,
    match_gain=3.0,
    seed=4,
    checkpoint_every=max(1, args.epochs // 2),
)

out = Path(args.out)
out.mkdir(parents=True, exist_ok=True)
vocab.save(out / "vocab.txt")

print(f"training {config.mode} mode for {config.epochs} epochs "
      f"on {len(train_items)} items...")
checkpoints = run_training(config, train_items, out, vocab=vocab)

records = read_loss_log(out / "losses.jsonl")
by_epoch = {}
for r in records:
    by_epoch.setdefault(r["epoch"], []).append(r)
for epoch, rows in by_epoch.items():
    recon = sum(r["recon"] for r in rows) / len(rows) / 2  # display-range L1
    d = sum(r["d_total"] for r in rows) / len(rows)
    g = sum(r["g_total"] for r in rows) / len(rows)
    print(f"  epoch {epoch:2d}: recon L1 {recon:.3f}  d {d:.2f}  g {g:.2f}")

print("checkpoints:")
for path in checkpoints:
    print("  ", path)
