"""Low-level raster operations shared by every stage of the detector.

Images are numpy arrays in row-major order with the origin at the top-left
corner: ``img[y, x]``.  A gray image is a 2-D ``uint8`` array, a binary mask
is a 2-D ``bool`` array of the same shape, and a 256-bin histogram is a 1-D
integer array.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numba
from PIL import Image
from scipy import ndimage

from .errors import DegenerateError, DimensionError, ParameterError

BT601 = (0.299, 0.587, 0.114)

_STRUCT = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


def check_gray(img) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 2:
        raise DimensionError(f"expected a 2-D gray image, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise DimensionError(f"zero-dimension image {img.shape}")
    if img.dtype != np.uint8:
        if img.size and (img.min() < 0 or img.max() > 255):
            raise DimensionError("gray values must lie in [0, 255]")
        img = img.astype(np.uint8)
    return img


def to_grayscale(rgb) -> np.ndarray:
    """BT.601 luma of an ``(H, W, 3)`` raster, rounded half up."""
    rgb = np.asarray(rgb)
    if rgb.ndim == 2:
        return check_gray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] < 3:
        raise DimensionError(f"expected (H, W, 3) raster, got {rgb.shape}")
    if rgb.shape[0] < 1 or rgb.shape[1] < 1:
        raise DimensionError(f"zero-dimension image {rgb.shape}")
    c = rgb[..., :3].astype(np.float64)
    y = BT601[0] * c[..., 0] + BT601[1] * c[..., 1] + BT601[2] * c[..., 2]
    return np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)


def load_gray(path) -> np.ndarray:
    """Decode a PNG/JPEG file into a gray image."""
    with Image.open(Path(path)) as im:
        if im.mode == "L":
            return check_gray(np.array(im))
        return to_grayscale(np.array(im.convert("RGB")))


def save_gray(img: np.ndarray, path) -> None:
    Image.fromarray(check_gray(img), mode="L").save(Path(path), format="PNG")


def histogram256(values) -> np.ndarray:
    values = np.asarray(values, dtype=np.uint8).ravel()
    return np.bincount(values, minlength=256).astype(np.int64)


@dataclass(frozen=True)
class GradientField:
    magnitude: np.ndarray
    orientation: np.ndarray  # radians in [0, 2*pi)
    gx: np.ndarray
    gy: np.ndarray


def sobel_gradients(img) -> GradientField:
    """3x3 Sobel gradients with replicated-edge padding.

    ``gx`` grows to the right and ``gy`` grows downwards, so a dark-to-bright
    step from left to right has orientation 0.
    """
    f = np.pad(check_gray(img).astype(np.float64), 1, mode="edge")
    gx = (f[:-2, 2:] + 2 * f[1:-1, 2:] + f[2:, 2:]) - (f[:-2, :-2] + 2 * f[1:-1, :-2] + f[2:, :-2])
    gy = (f[2:, :-2] + 2 * f[2:, 1:-1] + f[2:, 2:]) - (f[:-2, :-2] + 2 * f[:-2, 1:-1] + f[:-2, 2:])
    mag = np.hypot(gx, gy)
    ori = np.mod(np.arctan2(gy, gx), 2 * np.pi)
    ori[mag == 0] = 0.0
    # mod can round 2*pi - tiny up to exactly 2*pi
    ori[ori >= 2 * np.pi] = 0.0
    return GradientField(mag, ori, gx, gy)


def gradient_magnitude_u8(img) -> np.ndarray:
    """Sobel magnitude rescaled so the strongest edge maps to 255."""
    mag = sobel_gradients(img).magnitude
    top = mag.max()
    if top <= 0:
        return np.zeros(mag.shape, dtype=np.uint8)
    return np.clip(np.floor(mag * (255.0 / top) + 0.5), 0, 255).astype(np.uint8)


def default_canny_thresholds(magnitude: np.ndarray) -> tuple[float, float]:
    """High = Otsu level of the magnitude histogram, low = 0.4 * high."""
    top = float(magnitude.max())
    if top <= 0:
        return 0.0, 0.0
    scaled = np.floor(magnitude * (255.0 / top)).astype(np.uint8)
    try:
        t = otsu_threshold(histogram256(scaled))
    except DegenerateError:
        t = 0
    high = (t + 1) * top / 255.0
    return 0.4 * high, high


def canny(img, low: float | None = None, high: float | None = None,
          grad: GradientField | None = None) -> np.ndarray:
    """Canny edge map over Sobel gradients (no pre-smoothing).

    Thresholds are in raw Sobel magnitude units.  When omitted they are
    derived with :func:`default_canny_thresholds`.
    """
    if (low is None) != (high is None):
        raise ParameterError("give both canny thresholds or neither")
    if low is not None and not 0 <= low <= high:
        raise ParameterError(f"need 0 <= low <= high, got low={low} high={high}")
    g = grad if grad is not None else sobel_gradients(img)
    mag = g.magnitude
    if low is None:
        low, high = default_canny_thresholds(mag)
    if not np.any(mag > 0):
        return np.zeros(mag.shape, dtype=bool)

    # non-maximum suppression along the gradient, quantised to 4 directions;
    # ties keep the pixel on the positive side so plateaus stay 1 px wide
    ang = np.mod(g.orientation, np.pi)
    sector = (np.floor((ang + np.pi / 8) / (np.pi / 4)).astype(np.int64)) % 4
    p = np.pad(mag, 1, mode="constant")
    h, w = mag.shape
    offsets = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}
    keep = np.zeros(mag.shape, dtype=bool)
    for s, (dy, dx) in offsets.items():
        fwd = p[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
        bwd = p[1 - dy:1 - dy + h, 1 - dx:1 - dx + w]
        sel = sector == s
        keep |= sel & (mag > fwd) & (mag >= bwd)
    nms = keep & (mag > 0)

    strong = nms & (mag >= high)
    weak = nms & (mag >= low)
    labels, n = ndimage.label(weak, structure=_STRUCT[8])
    if n == 0:
        return np.zeros(mag.shape, dtype=bool)
    hit = np.zeros(n + 1, dtype=bool)
    hit[labels[strong]] = True
    hit[0] = False
    return hit[labels]


def otsu_threshold(hist) -> int:
    """Level ``t`` maximising between-class variance for classes ``<= t`` / ``> t``.

    Computed in exact integer arithmetic; ties go to the smallest ``t``.
    Raises :class:`DegenerateError` when every sample falls in one bin.
    """
    hist = np.asarray(hist, dtype=np.int64)
    if hist.shape != (256,):
        raise ParameterError("histogram must have 256 bins")
    if np.any(hist < 0):
        raise ParameterError("negative histogram count")
    total = int(hist.sum())
    if total <= 0:
        raise ParameterError("empty histogram")
    if np.count_nonzero(hist) < 2:
        raise DegenerateError("histogram has a single occupied level")
    counts = hist.tolist()
    grand = sum(i * c for i, c in enumerate(counts))
    best_t, best_num, best_den = 0, 0, 1
    n = s = 0
    for t in range(255):
        n += counts[t]
        s += t * counts[t]
        if n == 0 or n == total:
            continue
        num = (total * s - grand * n) ** 2
        den = n * (total - n)
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def binarize(img, t: int, polarity: str) -> np.ndarray:
    """``dark`` marks pixels ``<= t``; ``bright`` marks pixels ``> t``."""
    img = np.asarray(img)
    if not 0 <= t <= 255:
        raise ParameterError(f"threshold {t} outside [0, 255]")
    if polarity == "dark":
        return img <= t
    if polarity == "bright":
        return img > t
    raise ParameterError(f"unknown polarity {polarity!r}")


def label_components(mask, connectivity: int = 8) -> tuple[np.ndarray, int]:
    if connectivity not in _STRUCT:
        raise ParameterError("connectivity must be 4 or 8")
    return ndimage.label(np.asarray(mask, dtype=bool), structure=_STRUCT[connectivity])


def connected_components(mask, connectivity: int = 8) -> list[np.ndarray]:
    """Maximal connected pixel sets as sorted flat indices.

    Components come out ordered by their smallest flat index, which is the
    order in which ``ndimage.label`` assigns labels.
    """
    labels, n = label_components(mask, connectivity)
    if n == 0:
        return []
    flat = labels.ravel()
    idx = np.flatnonzero(flat)
    order = np.argsort(flat[idx], kind="stable")
    idx = idx[order]
    bounds = np.searchsorted(flat[idx], np.arange(1, n + 2))
    return [idx[bounds[k]:bounds[k + 1]] for k in range(n)]


def _zs_table(step: int) -> np.ndarray:
    """Deletion verdict for each 8-bit neighbourhood code (bit k = P(k+2), clockwise from north)."""
    lut = np.zeros(256, dtype=np.bool_)
    for code in range(256):
        p = [(code >> k) & 1 for k in range(8)]
        b = sum(p)
        a = sum(1 for k in range(8) if p[k] == 0 and p[(k + 1) % 8] == 1)
        p2, p4, p6, p8 = p[0], p[2], p[4], p[6]
        if step == 0:
            ok = not (p2 and p4 and p6) and not (p4 and p6 and p8)
        else:
            ok = not (p2 and p4 and p8) and not (p2 and p6 and p8)
        lut[code] = 2 <= b <= 6 and a == 1 and ok
    return lut


_ZS_LUT = np.stack([_zs_table(0), _zs_table(1)])
_ZS_DY = np.array([-1, -1, 0, 1, 1, 1, 0, -1])
_ZS_DX = np.array([0, 1, 1, 1, 0, -1, -1, -1])


@numba.njit(cache=True)
def _zs_thin(m, lut, dy, dx):
    h, w = m.shape
    ky = np.empty(h * w, np.int64)
    kx = np.empty(h * w, np.int64)
    changed = True
    while changed:
        changed = False
        for step in range(2):
            n = 0
            for y in range(h):
                for x in range(w):
                    if not m[y, x]:
                        continue
                    code = 0
                    for k in range(8):
                        yy = y + dy[k]
                        xx = x + dx[k]
                        if 0 <= yy < h and 0 <= xx < w and m[yy, xx]:
                            code |= 1 << k
                    if lut[step, code]:
                        ky[n] = y
                        kx[n] = x
                        n += 1
            for i in range(n):
                m[ky[i], kx[i]] = False
            if n:
                changed = True
    return m


def skeletonize(mask) -> np.ndarray:
    """Zhang-Suen thinning; pixels outside the raster count as background."""
    m = np.asarray(mask, dtype=bool).copy()
    if not m.any():
        return m
    return _zs_thin(m, _ZS_LUT, _ZS_DY, _ZS_DX)


def distance_to_boundary(mask) -> np.ndarray:
    """Euclidean distance from each marked pixel to the nearest unmarked one.

    The raster exterior counts as unmarked, so a lone pixel gets distance 1.
    """
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        return np.zeros(m.shape, dtype=np.float64)
    d = ndimage.distance_transform_edt(np.pad(m, 1))
    return d[1:-1, 1:-1]
