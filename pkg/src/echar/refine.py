"""Cue-distribution calibration and merging of neighbouring candidates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cues import CueVector
from .errors import CalibrationError
from .evalkit import rect_iou
from .pipeline import (PENDING, Candidate, PipelineConfig, RefineParams, RejectionThresholds,
                       detect_candidates, extract_candidates)

BINS = 64
MAGIC = "ECHAR-CUEDIST 1"
CUES = CueVector.names()


@dataclass
class CueDistribution:
    """Per-cue 64-bin histograms of the text class.

    ``hist[k]`` sums to 1 for every cue when ``sample_count > 0``.
    """

    lo: np.ndarray
    hi: np.ndarray
    hist: np.ndarray  # (n_cues, BINS)
    sample_count: int

    @classmethod
    def fit(cls, samples: np.ndarray) -> "CueDistribution":
        samples = np.asarray(samples, dtype=np.float64)
        n = samples.shape[0]
        if n == 0:
            raise CalibrationError("no text-class samples")
        lo = samples.min(axis=0)
        hi = samples.max(axis=0)
        hi = np.where(hi > lo, hi, lo + 1.0)
        hist = np.zeros((len(CUES), BINS))
        for k in range(len(CUES)):
            idx = cls._bin(samples[:, k], lo[k], hi[k])
            hist[k] = np.bincount(idx, minlength=BINS) / n
        return cls(lo, hi, hist, n)

    @staticmethod
    def _bin(v, lo, hi):
        idx = np.floor((np.asarray(v) - lo) / (hi - lo) * BINS).astype(np.int64)
        return np.clip(idx, 0, BINS - 1)

    def bin_probabilities(self, cues: CueVector) -> np.ndarray:
        """Laplace-smoothed bin probability of each cue value.

        Values outside the calibrated range get the smoothing floor only.
        """
        v = cues.as_array()
        n = self.sample_count
        out = np.empty(len(CUES))
        for k in range(len(CUES)):
            if self.lo[k] <= v[k] <= self.hi[k]:
                p = self.hist[k, self._bin(v[k], self.lo[k], self.hi[k])]
            else:
                p = 0.0
            out[k] = (p * n + 1.0) / (n + BINS)
        return out

    def likelihood(self, cues: CueVector) -> float:
        """Geometric mean of the per-cue bin probabilities."""
        p = self.bin_probabilities(cues)
        return float(np.exp(np.mean(np.log(p))))

    def dumps(self) -> str:
        lines = [MAGIC, f"samples {self.sample_count}", f"bins {BINS}"]
        for k, name in enumerate(CUES):
            lines.append(f"cue {name} {float(self.lo[k])!r} {float(self.hi[k])!r}")
            lines.append(" ".join(repr(float(x)) for x in self.hist[k]))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "CueDistribution":
        lines = text.splitlines()
        if not lines or lines[0].strip() != MAGIC:
            raise ValueError("not a cue distribution file")
        n = int(lines[1].split()[1])
        if int(lines[2].split()[1]) != BINS:
            raise ValueError("unsupported bin count")
        lo, hi, hist = [], [], []
        rows = lines[3:]
        for k, name in enumerate(CUES):
            head = rows[2 * k].split()
            if head[0] != "cue" or head[1] != name:
                raise ValueError(f"expected cue {name}, got {rows[2 * k]!r}")
            lo.append(float(head[2]))
            hi.append(float(head[3]))
            hist.append([float(x) for x in rows[2 * k + 1].split()])
        return cls(np.array(lo), np.array(hi), np.array(hist), n)

    @classmethod
    def load(cls, path) -> "CueDistribution":
        return cls.loads(Path(path).read_text())


def thresholds_from_samples(samples: np.ndarray, percentile: float = 100.0) -> RejectionThresholds:
    q = np.percentile(np.asarray(samples, dtype=np.float64), percentile, axis=0)
    return RejectionThresholds(**{f"max_{name}": float(q[k]) for k, name in enumerate(CUES)})


def text_class_samples(corpus, cfg: PipelineConfig = PipelineConfig(),
                       iou_min: float = 0.5) -> np.ndarray:
    """Cue vectors of ungated candidates overlapping a ground-truth box at IoU > ``iou_min``."""
    rows = []
    for img, boxes in corpus:
        boxes = [b.bbox if hasattr(b, "bbox") else tuple(b) for b in boxes]
        if not boxes:
            continue
        for c in extract_candidates(img, cfg):
            if c.status != PENDING:
                continue
            if any(rect_iou(c.bbox, b) > iou_min for b in boxes):
                rows.append(c.cues.as_array())
    return np.array(rows).reshape(-1, len(CUES))


def calibrate(corpus, cfg: PipelineConfig = PipelineConfig(), percentile: float = 100.0):
    """Fit the text-class cue distribution and per-cue rejection thresholds.

    ``corpus`` yields ``(gray image, ground-truth boxes)`` pairs.  Raises
    :class:`CalibrationError` when no candidate matches any box.
    """
    samples = text_class_samples(corpus, cfg)
    if samples.shape[0] == 0:
        raise CalibrationError("no candidate overlaps the ground truth; corpus unusable")
    return CueDistribution.fit(samples), thresholds_from_samples(samples, percentile)


# -- merging ------------------------------------------------------------------

@dataclass
class DetectionBox:
    bbox: tuple[int, int, int, int]
    score: float
    member_candidates: list[int] = field(default_factory=list)


def neighbors(items, params: RefineParams = RefineParams()) -> list[list[int]]:
    """Symmetric adjacency lists over candidate (or rect) indices.

    Boxes are neighbours when the horizontal gap is at most ``gap`` times the
    smaller height, centres are vertically within ``center_offset`` times
    it, and heights differ by at most ``height_ratio``.
    """
    rects = [tuple(c.bbox) if hasattr(c, "bbox") else tuple(c) for c in items]
    n = len(rects)
    adj: list[list[int]] = [[] for _ in rects]
    if n < 2:
        return adj
    x, y, w, h = np.array(rects, dtype=np.int64).T
    cy = y + h / 2
    for i in range(n - 1):
        j = np.arange(i + 1, n)
        hmin = np.minimum(h[i], h[j])
        ok = np.maximum(h[i], h[j]) <= params.height_ratio * hmin
        gap = np.maximum(x[i], x[j]) - np.minimum(x[i] + w[i], x[j] + w[j])
        ok &= gap <= params.gap * hmin
        ok &= np.abs(cy[i] - cy[j]) <= params.center_offset * hmin
        for k in j[ok].tolist():
            adj[i].append(k)
            adj[k].append(i)
    for a in adj:
        a.sort()
    return adj


def _union_box(rects):
    x0 = min(r[0] for r in rects)
    y0 = min(r[1] for r in rects)
    x1 = max(r[0] + r[2] for r in rects)
    y1 = max(r[1] + r[3] for r in rects)
    return x0, y0, x1 - x0, y1 - y0


def _canonical(c: Candidate):
    x, y, w, h = c.bbox
    return (y, x, h, w, c.region.area, c.region.polarity, c.cid)


def _absorb(groups, fraction):
    """Fold boxes lying mostly inside a larger box into it (largest first)."""
    order = sorted(groups, key=lambda t: (-t[0][2] * t[0][3], t[0][1], t[0][0], t[0][3], t[0][2]))
    kept: list[list] = []
    for box, g in order:
        x, y, w, h = box
        for host in kept:
            hx, hy, hw, hh = host[0]
            iw = max(0, min(x + w, hx + hw) - max(x, hx))
            ih = max(0, min(y + h, hy + hh) - max(y, hy))
            if iw * ih >= fraction * w * h:
                host[0] = _union_box([host[0], box])
                host[1] = host[1] + g
                break
        else:
            kept.append([box, list(g)])
    return [(b, sorted(g)) for b, g in kept]


def merge_similar(accepted: list[Candidate], dist: CueDistribution | None = None,
                  params: RefineParams = RefineParams()) -> list[DetectionBox]:
    """Group neighbouring candidates with similar strokes into text boxes.

    A neighbour edge survives when the stroke-width measures differ by at
    most ``tau_sw``, mean widths differ by at most ``tau_w`` times the
    smaller mean, and both candidates have likelihood >= ``tau_lik`` under
    ``dist`` (skipped without a distribution).  Connected groups become one
    box scored by the geometric mean of member likelihoods.  Boxes covered
    to at least ``absorb`` of their area by a larger box are then folded into
    it (holes, bars and fragments of one word).
    """
    cands = sorted(accepted, key=_canonical)
    n = len(cands)
    if n == 0:
        return []
    lik = [dist.likelihood(c.cues) if dist is not None else 1.0 for c in cands]
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    adj = neighbors(cands, params)
    for i in range(n):
        for j in adj[i]:
            if j <= i:
                continue
            a, b = cands[i], cands[j]
            if abs(a.cues.sw_measure - b.cues.sw_measure) > params.tau_sw:
                continue
            ma, mb = a.stats.mean, b.stats.mean
            if abs(ma - mb) > params.tau_w * min(ma, mb):
                continue
            if lik[i] < params.tau_lik or lik[j] < params.tau_lik:
                continue
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    members = [(_union_box([cands[i].bbox for i in g]), g) for g in groups.values()]
    if params.absorb > 0:
        members = _absorb(members, params.absorb)
    out = []
    for box, g in members:
        score = math.exp(sum(math.log(max(lik[i], 1e-300)) for i in g) / len(g))
        out.append(DetectionBox(box, min(max(score, 0.0), 1.0), sorted(cands[i].cid for i in g)))
    out.sort(key=lambda d: (d.bbox[1], d.bbox[0], d.bbox[3], d.bbox[2]))
    return out


def candidate_boxes(accepted: list[Candidate], dist: CueDistribution | None = None) -> list[DetectionBox]:
    """Unmerged candidates as boxes (the pre-refinement stage)."""
    out = [DetectionBox(tuple(c.bbox), dist.likelihood(c.cues) if dist is not None else 1.0, [c.cid])
           for c in sorted(accepted, key=_canonical)]
    return out


@dataclass
class Detection:
    pre: list[DetectionBox]
    final: list[DetectionBox]
    candidates: list[Candidate]


def detect(img, cfg: PipelineConfig = PipelineConfig(), dist: CueDistribution | None = None) -> Detection:
    """Gate candidates, then merge; ``pre`` holds the unmerged accepted candidates."""
    accepted = detect_candidates(img, cfg)
    return Detection(candidate_boxes(accepted, dist), merge_similar(accepted, dist, cfg.refine), accepted)
