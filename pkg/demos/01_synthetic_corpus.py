"""Render the synthetic shapes corpus and poke at what's in it.

Writes a small corpus to ./demo-corpus and a contact sheet of the first
dozen items so you can eyeball the shapes, colors, and backgrounds.
"""

from collections import Counter
from pathlib import Path

import numpy as np
from PIL import Image

from wordbrush import SyntheticSpec, denormalize_image, synth_generate, write_corpus

OUT = Path("demo-corpus")

spec = SyntheticSpec()
items, oracle = synth_generate(120, seed=7, spec=spec)

print(f"rendered {len(items)} items at {spec.canvas}x{spec.canvas}")
print("shape counts:", dict(Counter(it.shape for it in items)))
print("color counts:", dict(Counter(it.color for it in items)))
print("splits:      ", dict(Counter(it.split for it in items)))

# every caption names the shape and the color; the first template is the
# canonical one the evaluation tooling uses
sample = items[0]
print(f"\n{sample.image_id}: {sample.label}")
for caption in sample.captions[:3]:
    print("  ", caption)

# the oracle reads the dominant masked color back out of the pixels
hits = sum(oracle(it.image, it.mask) == it.color for it in items)
print(f"\noracle agreement on clean renders: {hits}/{len(items)}")

# object area stays within a fifth and a half of the canvas by construction
fracs = [it.mask.mean() for it in items]
print(f"object area fraction: min {min(fracs):.2f} max {max(fracs):.2f}")

write_corpus(items, OUT, spec=spec, seed=7)
print(f"\nwrote corpus to {OUT}/")

tiles = [Image.fromarray(denormalize_image(it.image)) for it in items[:12]]
sheet = Image.new("RGB", (4 * spec.canvas, 3 * spec.canvas))
for i, tile in enumerate(tiles):
    sheet.paste(tile, ((i % 4) * spec.canvas, (i // 4) * spec.canvas))
sheet.save(OUT / "contact_sheet.png")
print(f"contact sheet at {OUT}/contact_sheet.png")
