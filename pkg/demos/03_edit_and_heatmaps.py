"""Edit held-out images with new color words and visualize word attention.

Needs a checkpoint from 02_train_toy.py (or any training run on the
synthetic corpus). Writes side-by-side edits and per-word heatmap grids.
"""

import argparse
from pathlib import Path

from PIL import Image

from wordbrush import (Manipulator, attention_heatmaps, build_vocabulary, color_oracle,
                       denormalize_image, mask_contrast, save_heatmap_grid, synth_generate)
from wordbrush.text import Vocabulary

parser = argparse.ArgumentParser()
parser.add_argument("--run", default="demo-run")
parser.add_argument("--out", default="demo-edits")
args = parser.parse_args()

run = Path(args.run)
checkpoint = sorted(run.glob("checkpoint_*.pt"))[-1]
vocab = Vocabulary.load(run / "vocab.txt")
m = Manipulator.from_checkpoint(checkpoint, vocab)
print(f"loaded {checkpoint.name} ({m.mode} mode, {m.resolution}px)")

items, oracle = synth_generate(500, seed=11)
held_out = [it for it in items if it.split == "test"]

out = Path(args.out)
out.mkdir(parents=True, exist_ok=True)

requests = [
    (held_out[0], "blue"),
    (held_out[1], "yellow"),
    (held_out[2], "red"),
]
for item, target in requests:
    description = f"the {item.shape} is {target}"
    edited = m.manipulate(item.image, description)
    got = oracle(edited, item.mask)
    pair = Image.new("RGB", (2 * 64 + 4, 64), "white")
    pair.paste(Image.fromarray(denormalize_image(item.image)), (0, 0))
    pair.paste(Image.fromarray(denormalize_image(edited)), (68, 0))
    name = f"{item.image_id}_{target}.png"
    pair.save(out / name)
    print(f"{item.label:16s} + '{description}' -> oracle says {got:8s} ({name})")

# per-word attention at the deepest scale; the color word should sit on the
# object, filler words elsewhere
item = held_out[0]
description = item.captions[0]
heat = attention_heatmaps(m, item.image, description)
save_heatmap_grid(item.image, heat, out / "heatmaps.png")
contrast = mask_contrast(heat.maps[heat.words.index(item.color)], item.mask)
print(f"\nheatmap grid for '{description}' -> {out}/heatmaps.png")
print(f"color-word mask contrast: {contrast:.2f} (>1 means attention sits on the object)")
