"""Slow, obviously-correct reference implementations used by the tests."""
from collections import deque
from fractions import Fraction
import math

import numpy as np


def otsu_exhaustive(hist):
    """Smallest t maximising between-class variance, in exact rationals."""
    hist = [int(v) for v in hist]
    total = sum(hist)
    best, best_t = None, None
    for t in range(256):
        w0 = sum(hist[:t + 1])
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        m0 = Fraction(sum(i * hist[i] for i in range(t + 1)), w0)
        m1 = Fraction(sum(i * hist[i] for i in range(t + 1, 256)), w1)
        v = Fraction(w0 * w1, total * total) * (m0 - m1) ** 2
        if best is None or v > best:
            best, best_t = v, t
    return best_t


def flood_components(mask, connectivity=8):
    """BFS flood fill; components as sorted flat-index lists, ordered by first pixel."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    if connectivity == 8:
        steps = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if dy or dx]
    else:
        steps = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    seen = np.zeros_like(mask)
    out = []
    for y in range(h):
        for x in range(w):
            if not mask[y, x] or seen[y, x]:
                continue
            comp = []
            q = deque([(y, x)])
            seen[y, x] = True
            while q:
                cy, cx = q.popleft()
                comp.append(cy * w + cx)
                for dy, dx in steps:
                    ny, nx = cy + dy, cx + dx
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        q.append((ny, nx))
            out.append(sorted(comp))
    return out


def level_sets(img, connectivity=8):
    """All distinct connected components of {img <= t} over every t, as frozensets."""
    out = set()
    for t in range(256):
        for comp in flood_components(img <= t, connectivity):
            out.add(frozenset(comp))
    return out


def brute_distance(mask):
    """Euclidean distance from each marked pixel to the nearest unmarked pixel centre.

    Pixels outside the raster count as unmarked.
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    pad = np.zeros((h + 2, w + 2), dtype=bool)
    pad[1:-1, 1:-1] = mask
    bg = np.argwhere(~pad)
    out = np.zeros((h, w))
    for y, x in np.argwhere(mask):
        d = bg - np.array([y + 1, x + 1])
        out[y, x] = math.sqrt(float((d * d).sum(axis=1).min()))
    return out


def raster_iou(a, b, size=None):
    """IoU of two (x, y, w, h) rects by painting both on a pixel grid."""
    size = size or max(a[0] + a[2], b[0] + b[2], a[1] + a[3], b[1] + b[3]) + 1
    ma = np.zeros((size, size), dtype=bool)
    mb = np.zeros((size, size), dtype=bool)
    ma[a[1]:a[1] + a[3], a[0]:a[0] + a[2]] = True
    mb[b[1]:b[1] + b[3], b[0]:b[0] + b[2]] = True
    return (ma & mb).sum() / (ma | mb).sum()


def orientation_votes(patch, bins=9):
    """Per-pixel loop: centred differences, unsigned angle, linear split between bin centres.

    Returns an (h, w, bins) array of each pixel's votes.
    """
    p = np.pad(np.asarray(patch, dtype=np.float64), 1, mode="edge")
    h, w = np.asarray(patch).shape
    out = np.zeros((h, w, bins))
    for y in range(h):
        for x in range(w):
            gx = p[y + 1, x + 2] - p[y + 1, x]
            gy = p[y + 2, x + 1] - p[y, x + 1]
            m = math.hypot(gx, gy)
            if m == 0:
                continue
            a = math.atan2(gy, gx) % math.pi
            if a >= math.pi:
                a = 0.0
            pos = a / (math.pi / bins)
            lo = int(math.floor(pos))
            f = pos - lo
            out[y, x, lo % bins] += m * (1 - f)
            out[y, x, (lo + 1) % bins] += m * f
    return out


def orientation_hist_loop(patch, bins=9):
    return orientation_votes(patch, bins).sum(axis=(0, 1))


def hog_loop(patch, cell=8, bins=9, clip=0.2, eps=1e-6):
    """Cells from per-pixel votes, 2x2 blocks (1 along a one-cell axis), L2-Hys."""
    v = orientation_votes(patch, bins)
    h, w = v.shape[:2]
    cy, cx = h // cell, w // cell
    cells = np.array([[v[i * cell:(i + 1) * cell, j * cell:(j + 1) * cell].sum(axis=(0, 1))
                       for j in range(cx)] for i in range(cy)])
    by, bx = min(2, cy), min(2, cx)
    out = []
    for i in range(cy - by + 1):
        for j in range(cx - bx + 1):
            b = cells[i:i + by, j:j + bx].ravel()
            n = math.sqrt(float(b @ b))
            if n > 0:
                b = np.minimum(b / math.sqrt(n * n + eps * eps), clip)
                n = math.sqrt(float(b @ b))
                b = b / math.sqrt(n * n + eps * eps)
            out.append(b)
    return np.concatenate(out)


def zhang_suen_loop(mask):
    """Textbook two-subiteration Zhang-Suen with explicit neighbour loops."""
    m = np.pad(np.asarray(mask, dtype=np.uint8), 1)
    h, w = m.shape
    while True:
        changed = False
        for step in (0, 1):
            kill = []
            for y in range(1, h - 1):
                for x in range(1, w - 1):
                    if not m[y, x]:
                        continue
                    P = [m[y - 1, x], m[y - 1, x + 1], m[y, x + 1], m[y + 1, x + 1],
                         m[y + 1, x], m[y + 1, x - 1], m[y, x - 1], m[y - 1, x - 1]]
                    B = sum(P)
                    A = sum(1 for k in range(8) if P[k] == 0 and P[(k + 1) % 8] == 1)
                    p2, p4, p6, p8 = P[0], P[2], P[4], P[6]
                    if step == 0:
                        ok = p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0
                    else:
                        ok = p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0
                    if 2 <= B <= 6 and A == 1 and ok:
                        kill.append((y, x))
            for y, x in kill:
                m[y, x] = 0
            changed |= bool(kill)
        if not changed:
            return m[1:-1, 1:-1].astype(bool)
