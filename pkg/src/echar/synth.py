"""Seeded synthetic scene-text images with glyph- and word-level ground truth."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import imgproc
from .font import CHARSET, render_text

BACKGROUNDS = ("flat", "gradient", "noise")


@dataclass
class SynthImage:
    image: np.ndarray
    words: list[tuple[str, tuple[int, int, int, int]]]
    glyph_boxes: list[tuple[int, int, int, int]]
    glyph_labels: np.ndarray  # 0 = background, k = k-th glyph (1-based)
    background: str
    blur: float


def _background(rng, kind, shape, level):
    h, w = shape
    if kind == "flat":
        return np.full(shape, float(level))
    if kind == "gradient":
        theta = rng.uniform(0, 2 * np.pi)
        yy, xx = np.mgrid[0:h, 0:w]
        t = (np.cos(theta) * xx + np.sin(theta) * yy)
        t = (t - t.min()) / max(np.ptp(t), 1e-9)
        return level - 35 + 70 * t
    if kind == "noise":
        return np.full(shape, float(level))
    raise ValueError(kind)


def make_image(rng: np.random.Generator, shape=(240, 320), background: str | None = None,
               blur: float | None = None, blur_fraction: float = 0.3,
               n_words: int | None = None, text: str | None = None) -> SynthImage:
    """Render one image: 1-2 short words on a flat, gradient or noisy ground."""
    h, w = shape
    kind = background or BACKGROUNDS[int(rng.integers(len(BACKGROUNDS)))]
    if blur is None:
        blur = float(rng.uniform(0.6, 1.2)) if rng.random() < blur_fraction else 0.0
    dark_text = bool(rng.random() < 0.5)
    if dark_text:
        bg_level = int(rng.integers(170, 216))
        ink = int(rng.integers(20, bg_level - 110))
    else:
        bg_level = int(rng.integers(40, 86))
        ink = int(rng.integers(bg_level + 110, 236))
    base = _background(rng, kind, shape, bg_level)
    labels = np.zeros(shape, dtype=np.int32)
    words, glyph_boxes, taken = [], [], []
    count = n_words if n_words is not None else int(rng.integers(1, 3))
    for _ in range(count):
        s = text if text is not None else "".join(
            rng.choice(list(CHARSET), size=int(rng.integers(3, 7))))
        scale = int(rng.integers(3, 8))
        mask, boxes = render_text(s, scale)
        mh, mw = mask.shape
        if mh >= h - 4 or mw >= w - 4:
            continue
        for _try in range(100):
            x = int(rng.integers(2, w - mw - 1))
            y = int(rng.integers(2, h - mh - 1))
            pad = mh
            if all(x + mw + pad <= tx or tx + tw + pad <= x or y + mh + pad <= ty or ty + th + pad <= y
                   for tx, ty, tw, th in taken):
                break
        else:
            continue
        taken.append((x, y, mw, mh))
        for gx, gy, gw, gh in boxes:
            k = len(glyph_boxes) + 1
            sub = mask[gy:gy + gh, gx:gx + gw]
            labels[y + gy:y + gy + gh, x + gx:x + gx + gw][sub] = k
            glyph_boxes.append((x + gx, y + gy, gw, gh))
        words.append((s, (x, y, mw, mh)))
    img = np.where(labels > 0, float(ink), base)
    if blur > 0:
        img = ndimage.gaussian_filter(img, blur, mode="nearest")
    if kind == "noise":
        img = img + rng.normal(0, 10, shape)
    img = np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
    return SynthImage(img, words, glyph_boxes, labels, kind, float(blur))


def image_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def generate(count: int, seed: int, **kw) -> list[SynthImage]:
    return [make_image(image_rng(seed, i), **kw) for i in range(count)]


def write_corpus(out_dir, count: int, seed: int = 0, **kw) -> list[str]:
    """Write ``img_NNNN.png`` files plus ``gt_words.txt`` and ``gt_glyphs.txt``.

    Both ground-truth files use the generic ``image_id x y w h`` line format.
    Returns the image ids.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ids, wlines, glines = [], [], []
    for i in range(count):
        sample = make_image(image_rng(seed, i), **kw)
        iid = f"img_{i:04d}"
        imgproc.save_gray(sample.image, out / f"{iid}.png")
        ids.append(iid)
        wlines += [f"{iid} {x} {y} {w} {h}" for _, (x, y, w, h) in sample.words]
        glines += [f"{iid} {x} {y} {w} {h}" for x, y, w, h in sample.glyph_boxes]
    (out / "gt_words.txt").write_text("".join(line + "\n" for line in wlines))
    (out / "gt_glyphs.txt").write_text("".join(line + "\n" for line in glines))
    return ids
