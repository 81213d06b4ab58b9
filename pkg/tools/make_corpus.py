"""Regenerate the bundled image corpora from scikit-image sample images.

    python tools/make_corpus.py

Writes 100 RGB 32x32 crops to src/visualmixer/data/natural/ and 20 grayscale
24x24 crops to src/visualmixer/data/attack/. Crop positions come from a fixed
seed so the output is reproducible.
"""

from pathlib import Path

import numpy as np
from PIL import Image
from skimage import data

ROOT = Path(__file__).resolve().parents[1] / "src" / "visualmixer" / "data"
RGB_SOURCES = ["astronaut", "coffee", "chelsea", "rocket", "immunohistochemistry", "hubble_deep_field", "retina"]
GRAY_SOURCES = ["camera", "coins", "moon", "clock", "cell", "brick"]


def _downscale(arr, factor):
    im = Image.fromarray(arr)
    return np.asarray(im.resize((im.width // factor, im.height // factor), Image.LANCZOS))


def _crops(arrays, n, size, gen):
    out = []
    while len(out) < n:
        a = arrays[len(out) % len(arrays)]
        y = int(gen.integers(0, a.shape[0] - size + 1))
        x = int(gen.integers(0, a.shape[1] - size + 1))
        crop = a[y:y + size, x:x + size]
        if crop.std() < 4:  # skip flat sky / background patches
            continue
        out.append(crop)
    return out


def main():
    gen = np.random.default_rng(2024)
    rgb = [_downscale(getattr(data, name)(), 4 if name != "retina" else 8) for name in RGB_SOURCES]
    gray = [_downscale(getattr(data, name)(), 4) for name in GRAY_SOURCES]
    for sub, arrays, n, size in (("natural", rgb, 100, 32), ("attack", gray, 20, 24)):
        d = ROOT / sub
        d.mkdir(parents=True, exist_ok=True)
        for old in d.glob("*.png"):
            old.unlink()
        for i, crop in enumerate(_crops(arrays, n, size, gen)):
            Image.fromarray(np.ascontiguousarray(crop)).save(d / f"{sub}_{i:03d}.png")


if __name__ == "__main__":
    main()
