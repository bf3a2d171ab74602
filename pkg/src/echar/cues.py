"""Characterness cues: HOG, PHOG, gray-level entropy and the cue vector."""
from __future__ import annotations

import math
from dataclasses import asdict, astuple, dataclass, fields

import numpy as np

from . import imgproc
from .errors import DegenerateError, ParameterError
from .strokes import StrokeStats


def _gradients(patch) -> tuple[np.ndarray, np.ndarray]:
    """Centered-difference magnitude and unsigned orientation in [0, pi)."""
    f = np.pad(np.asarray(patch, dtype=np.float64), 1, mode="edge")
    gx = f[1:-1, 2:] - f[1:-1, :-2]
    gy = f[2:, 1:-1] - f[:-2, 1:-1]
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), np.pi)
    ang[ang >= np.pi] = 0.0
    return mag, ang


def _vote(mag, ang, bins):
    """Split each magnitude linearly between the two nearest bin centres.

    Bin ``k`` is centred on ``k * pi / bins`` so orientation 0 lands wholly
    in bin 0.
    """
    pos = ang / (np.pi / bins)
    lo = np.floor(pos).astype(np.int64)
    frac = pos - lo
    lo %= bins
    hi = (lo + 1) % bins
    return lo, hi, mag * (1 - frac), mag * frac


def orientation_histogram(patch, bins: int = 9) -> np.ndarray:
    mag, ang = _gradients(patch)
    lo, hi, wl, wh = _vote(mag.ravel(), ang.ravel(), bins)
    return np.bincount(lo, wl, bins) + np.bincount(hi, wh, bins)


def _cell_histograms(mag, ang, ys, xs, bins):
    """Histograms for the grid given by row edges ``ys`` and column edges ``xs``."""
    lo, hi, wl, wh = _vote(mag, ang, bins)
    ry = np.searchsorted(ys, np.arange(mag.shape[0]), side="right") - 1
    rx = np.searchsorted(xs, np.arange(mag.shape[1]), side="right") - 1
    ny, nx = len(ys) - 1, len(xs) - 1
    valid = (ry[:, None] >= 0) & (ry[:, None] < ny) & (rx[None, :] >= 0) & (rx[None, :] < nx)
    cell = (ry[:, None] * nx + rx[None, :])
    cell = np.where(valid, cell, 0)
    n = ny * nx * bins
    out = (np.bincount((cell * bins + lo)[valid], wl[valid], n)
           + np.bincount((cell * bins + hi)[valid], wh[valid], n))
    return out.reshape(ny, nx, bins)


@dataclass(frozen=True)
class HogDescriptor:
    values: np.ndarray
    cells_x: int
    cells_y: int
    bins: int
    n_blocks: int

    @property
    def energy(self) -> float:
        """Root-mean-square block norm, in [0, 1].

        Rounded to 9 decimals: every block with gradient content normalises
        to unit length, and float noise around 1.0 must not order candidates.
        """
        if self.n_blocks == 0:
            return 0.0
        return round(float(np.linalg.norm(self.values) / math.sqrt(self.n_blocks)), 9)


def _l2hys(v, clip=0.2, eps=1e-6):
    n = math.sqrt(float(v @ v))
    if n == 0:
        return v
    v = np.minimum(v / math.sqrt(n * n + eps * eps), clip)
    n = math.sqrt(float(v @ v))
    return v / math.sqrt(n * n + eps * eps) if n > 0 else v


def hog(patch, cell: int = 8, bins: int = 9) -> HogDescriptor:
    """Dalal-Triggs style HOG: unsigned bins, 2x2-cell blocks, L2-Hys.

    Grids with a single cell along an axis fall back to 1-cell blocks on
    that axis.
    """
    patch = np.asarray(patch, dtype=np.float64)
    h, w = patch.shape
    if cell < 1 or bins < 1:
        raise ParameterError("cell and bins must be positive")
    if h < cell or w < cell:
        raise ParameterError(f"patch {patch.shape} smaller than one {cell}px cell")
    cy, cx = h // cell, w // cell
    mag, ang = _gradients(patch)
    hist = _cell_histograms(mag, ang, np.arange(cy + 1) * cell, np.arange(cx + 1) * cell, bins)
    by, bx = min(2, cy), min(2, cx)
    blocks = []
    for i in range(cy - by + 1):
        for j in range(cx - bx + 1):
            blocks.append(_l2hys(hist[i:i + by, j:j + bx].ravel().copy()))
    return HogDescriptor(np.concatenate(blocks), cx, cy, bins, len(blocks))


@dataclass(frozen=True)
class PhogDescriptor:
    values: np.ndarray
    levels: int
    bins: int

    def level_slice(self, level: int) -> np.ndarray:
        start = self.bins * sum(4 ** k for k in range(level))
        return self.values[start:start + self.bins * 4 ** level]

    @property
    def energy(self) -> float:
        return float(np.linalg.norm(self.values))


def phog(patch, levels: int = 2, bins: int = 9) -> PhogDescriptor:
    """Orientation histograms over a 1x1, 2x2, ... 2^L x 2^L pyramid, L1-normalised."""
    patch = np.asarray(patch, dtype=np.float64)
    h, w = patch.shape
    if levels < 0:
        raise ParameterError("levels must be >= 0")
    if 2 ** levels > min(h, w):
        raise ParameterError(f"2^{levels} exceeds patch dims {patch.shape}")
    mag, ang = _gradients(patch)
    parts = []
    for lev in range(levels + 1):
        k = 2 ** lev
        ys = np.floor(np.arange(k + 1) * h / k).astype(np.int64)
        xs = np.floor(np.arange(k + 1) * w / k).astype(np.int64)
        parts.append(_cell_histograms(mag, ang, ys, xs, bins).ravel())
    v = np.concatenate(parts)
    total = v.sum()
    if total > 0:
        v = v / total
    return PhogDescriptor(v, levels, bins)


def shannon_entropy(hist) -> float:
    """Entropy in bits of a count histogram; empty bins contribute 0."""
    h = np.asarray(hist, dtype=np.float64)
    total = h.sum()
    if total <= 0:
        raise DegenerateError("empty histogram")
    p = h[h > 0] / total
    return float(-(p * np.log2(p)).sum()) + 0.0


@dataclass(frozen=True)
class CueParams:
    hog_cell: int = 8
    hog_bins: int = 9
    phog_levels: int = 2
    phog_bins: int = 9


@dataclass(frozen=True)
class CueVector:
    sw_measure: float
    norm_mode: float
    norm_deviation: float
    hog_energy: float
    phog_energy: float
    entropy: float
    entropy_diff: float

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    def to_record(self) -> str:
        return " ".join(f"{k}={v!r}" for k, v in asdict(self).items())

    @classmethod
    def from_record(cls, line: str) -> "CueVector":
        kv = dict(tok.split("=", 1) for tok in line.split())
        return cls(**{name: float(kv[name]) for name in cls.names()})


def assemble_cues(common, patch, stats: StrokeStats, params: CueParams = CueParams()) -> CueVector:
    """Cue vector of a common region inside its gray patch (same shape).

    HOG and PHOG see the patch with non-region pixels zeroed.  Cell size and
    pyramid depth shrink to fit small patches.  ``entropy_diff`` is the
    entropy inside the region minus the entropy of the remaining patch
    pixels (0 when the region fills the patch).
    """
    common = np.asarray(common, dtype=bool)
    patch = np.asarray(patch)
    if common.shape != patch.shape:
        raise ParameterError("mask and patch shapes differ")
    h, w = patch.shape
    if h <= 1 or w <= 1:
        raise DegenerateError(f"patch {patch.shape} too small for cues")
    if not common.any():
        raise DegenerateError("empty common region")
    masked = np.where(common, patch.astype(np.float64), 0.0)
    cell = max(1, min(params.hog_cell, min(h, w) // 2))
    hd = hog(masked, cell, params.hog_bins)
    lv = min(params.phog_levels, int(math.floor(math.log2(min(h, w)))))
    pd = phog(masked, lv, params.phog_bins)
    inside = shannon_entropy(imgproc.histogram256(patch[common]))
    rest = patch[~common]
    outside = shannon_entropy(imgproc.histogram256(rest)) if rest.size else 0.0
    return CueVector(stats.sw_measure, stats.norm_mode, stats.norm_deviation,
                     hd.energy, pd.energy, inside, inside - outside)
