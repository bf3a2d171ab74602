"""Component tree, MSER selection and the edge-enhanced variant.

The tree is built with a union-find sweep over pixels sorted by gray level.
A node is a connected component of ``{p : img(p) <= t}`` that differs from
every component at lower levels; it lives for thresholds
``t in [level, parent.level - 1]`` and its pixel set is constant there.
Bright regions are dark regions of the inverted image.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import ndimage

from . import imgproc
from .errors import ParameterError

_NB8 = np.array([(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)], dtype=np.int64)
_NB4 = np.array([(-1, 0), (0, -1), (0, 1), (1, 0)], dtype=np.int64)


@numba.njit(cache=True)
def _find(parent, p):
    while parent[p] != p:
        parent[p] = parent[parent[p]]
        p = parent[p]
    return p


@numba.njit(cache=True)
def _build_tree(flat, order, width, nbrs):
    n = flat.size
    parent = np.full(n, -1, np.int64)
    size = np.zeros(n, np.int64)
    cur = np.full(n, -1, np.int64)  # node id per root; -2 = touched this level
    pixel_node = np.empty(n, np.int64)
    node_level = np.empty(n, np.int64)
    node_area = np.empty(n, np.int64)
    node_parent = np.full(n, -1, np.int64)
    node_rep = np.empty(n, np.int64)
    pending = np.empty(n, np.int64)
    height = n // width
    nnodes = 0
    i = 0
    while i < n:
        v = flat[order[i]]
        j = i
        while j < n and flat[order[j]] == v:
            j += 1
        npending = 0
        for k in range(i, j):
            p = order[k]
            parent[p] = p
            size[p] = 1
            cur[p] = -2
            y = p // width
            x = p - y * width
            for m in range(nbrs.shape[0]):
                yy = y + nbrs[m, 0]
                xx = x + nbrs[m, 1]
                if yy < 0 or yy >= height or xx < 0 or xx >= width:
                    continue
                q = yy * width + xx
                if parent[q] < 0:
                    continue
                rp = _find(parent, p)
                rq = _find(parent, q)
                if rp == rq:
                    continue
                if cur[rp] >= 0:
                    pending[npending] = cur[rp]
                    npending += 1
                if cur[rq] >= 0:
                    pending[npending] = cur[rq]
                    npending += 1
                if size[rp] < size[rq] or (size[rp] == size[rq] and rq < rp):
                    rp, rq = rq, rp
                parent[rq] = rp
                size[rp] += size[rq]
                cur[rp] = -2
                cur[rq] = -2
        for k in range(i, j):
            p = order[k]
            r = _find(parent, p)
            if cur[r] == -2:
                node_level[nnodes] = v
                node_area[nnodes] = size[r]
                node_rep[nnodes] = r
                cur[r] = nnodes
                nnodes += 1
            pixel_node[p] = cur[r]
        for m in range(npending):
            o = pending[m]
            node_parent[o] = cur[_find(parent, node_rep[o])]
        i = j
    return (node_level[:nnodes].copy(), node_area[:nnodes].copy(),
            node_parent[:nnodes].copy(), pixel_node)


@numba.njit(cache=True)
def _largest_child(area, parent):
    n = area.size
    best = np.full(n, -1, np.int64)
    for c in range(n):
        p = parent[c]
        if p < 0:
            continue
        b = best[p]
        if b < 0 or area[c] > area[b]:
            best[p] = c
    return best


@numba.njit(cache=True)
def _preorder(parent, first_child, next_sibling):
    n = parent.size
    pos = np.empty(n, np.int64)
    stack = np.empty(n, np.int64)
    k = 0
    for root in range(n - 1, -1, -1):
        if parent[root] >= 0:
            continue
        top = 0
        stack[0] = root
        top = 1
        while top > 0:
            top -= 1
            u = stack[top]
            pos[u] = k
            k += 1
            c = first_child[u]
            while c >= 0:
                stack[top] = c
                top += 1
                c = next_sibling[c]
    return pos


@numba.njit(cache=True)
def _variation(level, area, parent, largest_child, delta, max_level):
    """Smallest (|R(t+d)| - |R(t-d)|) / |R(t)| over each node's lifetime."""
    n = level.size
    out = np.empty(n, np.float64)
    for u in range(n):
        lo = level[u]
        hi = level[parent[u]] - 1 if parent[u] >= 0 else max_level
        best = np.inf
        for t in range(lo, hi + 1):
            a = u
            while parent[a] >= 0 and level[parent[a]] <= t + delta:
                a = parent[a]
            if t - delta >= lo:
                below = area[u]
            else:
                c = largest_child[u]
                while c >= 0 and level[c] > t - delta:
                    c = largest_child[c]
                below = area[c] if c >= 0 else 0
            q = (area[a] - below) / area[u]
            if q < best:
                best = q
                if q == 0.0:
                    break
        out[u] = best
    return out


@dataclass
class ComponentTree:
    """Extremal regions of one polarity, children before parents.

    ``level`` is expressed in the swept image: for ``polarity == "bright"``
    that is the inverted image ``255 - img``.
    """

    shape: tuple[int, int]
    polarity: str
    level: np.ndarray
    area: np.ndarray
    parent: np.ndarray
    pixel_order: np.ndarray
    start: np.ndarray
    _children: list | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.level.size

    def pixels(self, node: int) -> np.ndarray:
        s = self.start[node]
        return np.sort(self.pixel_order[s:s + self.area[node]])

    def mask(self, node: int) -> np.ndarray:
        m = np.zeros(self.shape[0] * self.shape[1], dtype=bool)
        m[self.pixels(node)] = True
        return m.reshape(self.shape)

    def children(self, node: int) -> list[int]:
        if self._children is None:
            kids: list[list[int]] = [[] for _ in range(len(self))]
            for c, p in enumerate(self.parent.tolist()):
                if p >= 0:
                    kids[p].append(c)
            self._children = kids
        return self._children[node]

    def alive_at(self, t: int) -> np.ndarray:
        """Ids of nodes whose lifetime contains threshold ``t``."""
        plev = np.where(self.parent >= 0, self.level[np.maximum(self.parent, 0)], 256)
        return np.flatnonzero((self.level <= t) & (plev > t))


def component_tree(img, polarity: str = "dark", connectivity: int = 8) -> ComponentTree:
    img = imgproc.check_gray(img)
    if polarity == "dark":
        swept = img
    elif polarity == "bright":
        swept = 255 - img
    else:
        raise ParameterError(f"unknown polarity {polarity!r}")
    return _tree_of(swept, polarity, connectivity)


def _tree_of(swept: np.ndarray, polarity: str, connectivity: int) -> ComponentTree:
    h, w = swept.shape
    flat = np.ascontiguousarray(swept, dtype=np.uint8).ravel()
    order = np.argsort(flat, kind="stable").astype(np.int64)
    nbrs = _NB8 if connectivity == 8 else _NB4
    level, area, parent, pixel_node = _build_tree(flat, order, w, nbrs)

    n = level.size
    first_child = np.full(n, -1, np.int64)
    next_sibling = np.full(n, -1, np.int64)
    # reverse id order so siblings come out in ascending id order
    for c in range(n - 1, -1, -1):
        p = parent[c]
        if p >= 0:
            next_sibling[c] = first_child[p]
            first_child[p] = c
    pos = _preorder(parent, first_child, next_sibling)
    key = pos[pixel_node]
    pixel_order = np.argsort(key, kind="stable").astype(np.int64)
    counts = np.bincount(key, minlength=n)
    offsets = np.concatenate(([0], np.cumsum(counts)[:-1]))
    start = offsets[pos]
    return ComponentTree((h, w), polarity, level, area, parent, pixel_order, start)


@dataclass(frozen=True)
class MserParams:
    delta: int = 5
    min_area: int = 30
    max_area: float = 0.2  # <= 1 means a fraction of the image area
    max_variation: float = 0.5
    min_diversity: float = 0.33

    def __post_init__(self):
        if self.delta < 1:
            raise ParameterError("delta must be >= 1")
        if self.min_area <= 0 or self.max_variation <= 0:
            raise ParameterError("min_area and max_variation must be positive")
        if not 0 <= self.min_diversity <= 1:
            raise ParameterError("min_diversity must lie in [0, 1]")

    def area_bounds(self, image_area: int) -> tuple[int, float]:
        hi = self.max_area * image_area if self.max_area <= 1 else self.max_area
        return self.min_area, hi


@dataclass
class Region:
    """One extremal region, stored as a mask cropped to its bounding box."""

    mask: np.ndarray
    bbox: tuple[int, int, int, int]  # x, y, w, h
    polarity: str
    variation: float = 0.0
    _skeleton_length: int | None = field(default=None, repr=False)

    @property
    def area(self) -> int:
        return int(self.mask.sum())

    @property
    def aspect_ratio(self) -> float:
        return self.bbox[2] / self.bbox[3]

    @property
    def skeleton_length(self) -> int:
        if self._skeleton_length is None:
            self._skeleton_length = int(imgproc.skeletonize(self.mask).sum())
        return self._skeleton_length

    def pixels(self) -> tuple[np.ndarray, np.ndarray]:
        """Absolute ``(ys, xs)`` coordinates."""
        ys, xs = np.nonzero(self.mask)
        return ys + self.bbox[1], xs + self.bbox[0]

    def full_mask(self, shape) -> np.ndarray:
        m = np.zeros(shape, dtype=bool)
        x, y, w, h = self.bbox
        m[y:y + h, x:x + w] = self.mask
        return m

    @classmethod
    def from_flat(cls, flat_idx: np.ndarray, width: int, polarity: str, variation: float = 0.0):
        ys, xs = np.divmod(flat_idx, width)
        x0, y0 = int(xs.min()), int(ys.min())
        w, h = int(xs.max()) - x0 + 1, int(ys.max()) - y0 + 1
        m = np.zeros((h, w), dtype=bool)
        m[ys - y0, xs - x0] = True
        return cls(m, (x0, y0, w, h), polarity, float(variation))


def node_variation(tree: ComponentTree, delta: int) -> np.ndarray:
    lc = _largest_child(tree.area, tree.parent)
    return _variation(tree.level, tree.area, tree.parent, lc, int(delta), 255)


def select_msers(tree: ComponentTree, params: MserParams) -> list[Region]:
    """Maximally stable nodes of ``tree`` as regions.

    A node qualifies when its variation is a local minimum along the tree
    (no larger than its parent's or any child's), lies in the area bounds and
    does not exceed ``max_variation``.  Near-duplicate nested nodes, whose
    areas differ by less than ``min_diversity`` of the larger one, collapse to
    the more stable of the two; that step ignores ``max_variation`` so that
    loosening the cap can only add regions.
    """
    n = len(tree)
    if n == 0:
        return []
    var = node_variation(tree, params.delta)
    area = tree.area
    parent = tree.parent
    lo, hi = params.area_bounds(tree.shape[0] * tree.shape[1])

    local = np.isfinite(var) & (area >= lo) & (area <= hi)
    has_p = parent >= 0
    local[has_p] &= var[has_p] <= var[parent[has_p]]
    kids = np.flatnonzero(has_p)
    child_ok = np.ones(n, dtype=bool)
    bad = var[kids] < var[parent[kids]]
    np.logical_and.at(child_ok, parent[kids[bad]], False)
    local &= child_ok

    cand = np.flatnonzero(local)
    if cand.size == 0:
        return []
    # greedy dedup: most stable first, then smaller area, then id
    order = cand[np.lexsort((cand, area[cand], var[cand]))]
    accepted = np.zeros(n, dtype=bool)
    blocked = np.zeros(n, dtype=bool)
    d = params.min_diversity
    plist = parent.tolist()
    alist = area.tolist()
    kept = []
    for u in order.tolist():
        if blocked[u]:
            continue
        a = plist[u]
        dup = False
        while a >= 0 and (alist[a] - alist[u]) < d * alist[a]:
            if accepted[a]:
                dup = True
                break
            a = plist[a]
        if dup:
            continue
        accepted[u] = True
        kept.append(u)
        a = plist[u]
        while a >= 0 and (alist[a] - alist[u]) < d * alist[a]:
            blocked[a] = True
            a = plist[a]

    kept = [u for u in sorted(kept) if var[u] <= params.max_variation]
    w = tree.shape[1]
    return [Region.from_flat(tree.pixels(u), w, tree.polarity, var[u]) for u in kept]


def enhance(img, polarity: str, blend: float = 0.25) -> np.ndarray:
    """Image swept for ``polarity`` with gradient amplitude blended in.

    Gradient amplitude is added only on the surround side of each edge
    (pixels at or above their 3x3 mean in the swept image), so a blurred
    boundary becomes a ridge just outside the glyph instead of eating into
    it.
    """
    img = imgproc.check_gray(img)
    if not 0 <= blend <= 1:
        raise ParameterError("blend must lie in [0, 1]")
    base = img.astype(np.float64) if polarity == "dark" else 255.0 - img
    if blend == 0:
        return base.astype(np.uint8)
    grad = imgproc.gradient_magnitude_u8(img).astype(np.float64)
    outer = base >= ndimage.uniform_filter(base, 3, mode="nearest")
    out = (1 - blend) * base + blend * grad * outer
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def mser_regions(img, params: MserParams | None = None, blend: float = 0.0,
                 polarities=("bright", "dark"), connectivity: int = 8) -> list[Region]:
    """Regions of both polarities; ``blend=0`` is plain intensity MSER."""
    params = params or MserParams()
    img = imgproc.check_gray(img)
    out: list[Region] = []
    for pol in polarities:
        swept = enhance(img, pol, blend)
        out.extend(select_msers(_tree_of(swept, pol, connectivity), params))
    return out


def emser_regions(img, params: MserParams | None = None, blend: float = 0.25,
                  connectivity: int = 8) -> list[Region]:
    return mser_regions(img, params, blend=blend, connectivity=connectivity)


@dataclass(frozen=True)
class GeometryLimits:
    ar_min: float = 0.1
    ar_max: float = 10.0
    area_min: int = 30
    area_max: float = 0.2  # <= 1 means a fraction of the image area
    sk_min: int = 5
    sk_max: float = 0.5  # <= 1 means a fraction of the image diagonal

    def resolve(self, shape) -> "GeometryLimits":
        h, w = shape
        amax = self.area_max * h * w if self.area_max <= 1 else self.area_max
        smax = self.sk_max * float(np.hypot(h, w)) if self.sk_max <= 1 else self.sk_max
        return GeometryLimits(self.ar_min, self.ar_max, self.area_min, amax, self.sk_min, smax)


def geometric_filter(regions: list[Region], limits: GeometryLimits, shape=None) -> list[Region]:
    """Keep regions whose aspect ratio, area and skeleton length are in range.

    Fractional ``area_max``/``sk_max`` need the image ``shape`` to resolve.
    """
    if shape is not None:
        limits = limits.resolve(shape)
    out = []
    for r in regions:
        if not limits.ar_min <= r.aspect_ratio <= limits.ar_max:
            continue
        if not limits.area_min <= r.area <= limits.area_max:
            continue
        if not limits.sk_min <= r.skeleton_length <= limits.sk_max:
            continue
        out.append(r)
    return out
