"""Stroke width transform and skeleton-based stroke statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from . import imgproc
from .errors import DegenerateError, ParameterError

# rays are accepted when the far gradient is within this angle of -g_p
OPPOSITE_TOL = math.pi / 6


@numba.njit(cache=True)
def _cast_rays(edges, gx, gy, sign, max_len, cos_tol):
    h, w = edges.shape
    swt = np.full((h, w), np.inf, np.float32)
    # accepted rays, stored flat: ray_ptr[k]..ray_ptr[k+1] into ray_pix
    ray_pix = np.empty(h * w * 8 + 16, np.int64)
    ray_ptr = np.zeros(h * w + 1, np.int64)
    nray = 0
    npix = 0
    buf = np.empty(int(max_len) + 4, np.int64)
    for y in range(h):
        for x in range(w):
            if not edges[y, x]:
                continue
            mx = gx[y, x]
            my = gy[y, x]
            norm = math.sqrt(mx * mx + my * my)
            if norm == 0.0:
                continue
            dx = sign * mx / norm
            dy = sign * my / norm
            fx = x + 0.5
            fy = y + 0.5
            cx = x
            cy = y
            n = 0
            buf[n] = y * w + x
            n += 1
            ok = False
            while True:
                fx += dx * 0.2
                fy += dy * 0.2
                nx = int(math.floor(fx))
                ny = int(math.floor(fy))
                if nx == cx and ny == cy:
                    continue
                if nx != cx and ny != cy:
                    # diagonal step: do not slip between two 8-connected edge pixels
                    if 0 <= ny < h and 0 <= cx < w and edges[ny, cx]:
                        nx = cx
                    elif 0 <= cy < h and 0 <= nx < w and edges[cy, nx]:
                        ny = cy
                cx = nx
                cy = ny
                if nx < 0 or ny < 0 or nx >= w or ny >= h:
                    break
                if n >= buf.size:
                    break
                buf[n] = ny * w + nx
                n += 1
                if edges[ny, nx]:
                    qx = gx[ny, nx]
                    qy = gy[ny, nx]
                    qn = math.sqrt(qx * qx + qy * qy)
                    if qn > 0.0:
                        # cosine between g_q and -g_p
                        c = -(mx * qx + my * qy) / (norm * qn)
                        if c >= cos_tol:
                            ok = True
                    break
            if not ok:
                continue
            ex = buf[n - 1] % w
            ey = buf[n - 1] // w
            length = math.sqrt((ex - x) ** 2 + (ey - y) ** 2)
            if length > max_len:
                continue
            if npix + n > ray_pix.size:
                continue
            for k in range(n):
                p = buf[k]
                py = p // w
                px = p - py * w
                if length < swt[py, px]:
                    swt[py, px] = length
                ray_pix[npix + k] = p
            npix += n
            nray += 1
            ray_ptr[nray] = npix
    # second pass: cap every ray at its median width
    vals = np.empty(buf.size, np.float32)
    for r in range(nray):
        a = ray_ptr[r]
        b = ray_ptr[r + 1]
        m = b - a
        for k in range(m):
            p = ray_pix[a + k]
            vals[k] = swt[p // w, p % w]
        med = np.median(vals[:m])
        for k in range(m):
            p = ray_pix[a + k]
            py = p // w
            px = p - py * w
            if swt[py, px] > med:
                swt[py, px] = med
    return swt


def swt(img, direction: str = "dark_on_light", edges: np.ndarray | None = None) -> np.ndarray:
    """Per-pixel stroke width, ``inf`` where no stroke was found.

    ``dark_on_light`` traces rays against the gradient (into dark strokes),
    ``light_on_dark`` along it.
    """
    img = imgproc.check_gray(img)
    if direction == "dark_on_light":
        sign = -1.0
    elif direction == "light_on_dark":
        sign = 1.0
    else:
        raise ParameterError(f"unknown direction {direction!r}")
    grad = imgproc.sobel_gradients(img)
    if edges is None:
        edges = imgproc.canny(img, grad=grad)
    h, w = img.shape
    max_len = 1.5 * math.hypot(h, w)
    return _cast_rays(np.ascontiguousarray(edges, dtype=np.bool_), grad.gx, grad.gy,
                      sign, max_len, math.cos(OPPOSITE_TOL))


def swt_letter_components(swt_map, ratio: float = 3.0, min_pixels: int = 10,
                          max_var_ratio: float = 0.5, ar_min: float = 0.1,
                          ar_max: float = 10.0) -> list[np.ndarray]:
    """Group neighbouring stroke pixels of similar width into letter candidates.

    Neighbours (8-connectivity) join when the larger width is at most
    ``ratio`` times the smaller.  Components survive when they have at least
    ``min_pixels`` pixels, width variance at most ``max_var_ratio * mean``
    and a bounding-box aspect ratio in ``[ar_min, ar_max]``.  Returns flat
    index arrays ordered by their smallest index.
    """
    s = np.asarray(swt_map, dtype=np.float64)
    h, w = s.shape
    finite = np.isfinite(s)
    if not finite.any():
        return []
    idx = np.arange(h * w).reshape(h, w)
    rows, cols = [], []
    for dy, dx in ((0, 1), (1, 0), (1, 1), (1, -1)):
        y0, y1 = 0, h - dy
        x0, x1 = max(0, -dx), w - max(0, dx)
        a = s[y0:y1, x0:x1]
        b = s[y0 + dy:y1 + dy, x0 + dx:x1 + dx]
        ok = np.isfinite(a) & np.isfinite(b)
        ok &= np.maximum(a, b) <= ratio * np.minimum(a, b)
        rows.append(idx[y0:y1, x0:x1][ok])
        cols.append(idx[y0 + dy:y1 + dy, x0 + dx:x1 + dx][ok])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    g = sparse.coo_matrix((np.ones(r.size, dtype=np.int8), (r, c)), shape=(h * w, h * w))
    _, lab = csgraph.connected_components(g, directed=False)
    flat_f = np.flatnonzero(finite.ravel())
    labs = lab[flat_f]
    order = np.lexsort((flat_f, labs))
    flat_f, labs = flat_f[order], labs[order]
    cuts = np.flatnonzero(np.diff(labs)) + 1
    out = []
    vals = s.ravel()
    for comp in np.split(flat_f, cuts):
        if comp.size < min_pixels:
            continue
        widths = vals[comp]
        if widths.var() > max_var_ratio * widths.mean():
            continue
        ys, xs = np.divmod(comp, w)
        ar = (xs.max() - xs.min() + 1) / (ys.max() - ys.min() + 1)
        if not ar_min <= ar <= ar_max:
            continue
        out.append(comp)
    out.sort(key=lambda a: int(a[0]))
    return out


@dataclass(frozen=True)
class StrokeStats:
    widths: np.ndarray
    mean: float
    variance: float
    mode: float
    min: float
    max: float
    sw_measure: float
    norm_mode: float
    norm_deviation: float

    @classmethod
    def from_widths(cls, widths, height: int, width: int) -> "StrokeStats":
        widths = np.asarray(widths, dtype=np.float64)
        if widths.size == 0:
            raise DegenerateError("no stroke widths")
        mean = float(widths.mean())
        var = float(widths.var())
        rounded = np.floor(widths + 0.5).astype(np.int64)
        vals, counts = np.unique(rounded, return_counts=True)
        mode = float(vals[np.argmax(counts)])  # unique() is sorted: smallest wins ties
        lo, hi = float(widths.min()), float(widths.max())
        # rounding can push the mode just outside [min, max]
        mode = min(max(mode, lo), hi)
        scale = math.sqrt(height * width)
        return cls(widths, mean, var, mode, lo, hi, var / mean ** 2,
                   mode / scale, (hi - lo) / scale)


def region_stroke_stats(mask, height: int | None = None, width: int | None = None) -> StrokeStats:
    """Stroke statistics read off the skeleton of ``mask``.

    The mask is sampled at half-pixel resolution; the distance from a
    skeleton pixel to the nearest background pixel there is the stroke
    half-width in original pixels doubled, i.e. the full width.  This makes
    both odd and even integer widths come out exact on straight strokes.
    ``height``/``width`` default to the mask's tight bounding box.
    """
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        raise DegenerateError("empty region")
    ys, xs = np.nonzero(m)
    m = m[ys.min():ys.max() + 1, xs.min():xs.max() + 1]
    if height is None or width is None:
        height, width = m.shape
    up = np.repeat(np.repeat(m, 2, axis=0), 2, axis=1)
    skel = imgproc.skeletonize(up)
    if not skel.any():
        raise DegenerateError("empty skeleton")
    dist = imgproc.distance_to_boundary(up)
    return StrokeStats.from_widths(dist[skel], height, width)


def write_pfm(swt_map, path) -> None:
    """Dump a stroke-width map as a little-endian grayscale PFM.

    Unassigned pixels are written as 0.
    """
    a = np.asarray(swt_map, dtype=np.float32)
    a = np.where(np.isfinite(a), a, 0).astype("<f4")
    h, w = a.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(a[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"Pf":
            raise ValueError("not a grayscale PFM")
        w, h = map(int, fh.readline().split())
        scale = float(fh.readline())
        dt = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(w * h * 4), dtype=dt)
    return data.reshape(h, w)[::-1].astype(np.float32)
