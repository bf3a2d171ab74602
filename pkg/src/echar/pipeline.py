"""Candidate extraction and cue-based rejection of non-text regions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import imgproc
from .cues import CueParams, CueVector, assemble_cues
from .emser import GeometryLimits, MserParams, Region, emser_regions, geometric_filter
from .errors import DegenerateError, ParameterError
from .strokes import StrokeStats, region_stroke_stats

PENDING, ACCEPTED, REJECTED = "pending", "accepted", "rejected"


@dataclass(frozen=True)
class RejectionThresholds:
    """Upper bounds per cue; a candidate passes when every cue is at or below."""

    max_sw_measure: float = math.inf
    max_norm_mode: float = math.inf
    max_norm_deviation: float = math.inf
    max_hog_energy: float = math.inf
    max_phog_energy: float = math.inf
    max_entropy: float = math.inf
    max_entropy_diff: float = math.inf

    def items(self):
        for f in fields(self):
            yield f.name[4:], getattr(self, f.name)

    def relaxed(self, cue: str, value: float) -> "RejectionThresholds":
        return RejectionThresholds(**{**{f.name: getattr(self, f.name) for f in fields(self)},
                                      f"max_{cue}": value})


@dataclass(frozen=True)
class RefineParams:
    tau_sw: float = 0.2
    tau_w: float = 0.5
    tau_lik: float = 1e-3
    gap: float = 1.0
    center_offset: float = 0.5
    height_ratio: float = 2.0
    # a box with at least this fraction of its area inside a larger box joins it; 0 disables
    absorb: float = 0.8


@dataclass(frozen=True)
class PipelineConfig:
    mser: MserParams = MserParams()
    geometry: GeometryLimits = GeometryLimits()
    cues: CueParams = CueParams()
    thresholds: RejectionThresholds = RejectionThresholds()
    refine: RefineParams = RefineParams()
    blend: float = 0.25
    margin: float = 0.1
    containment: float = 0.9
    connectivity: int = 8
    distribution: str | None = None


@dataclass
class Candidate:
    """An eMSER blob with its patch, Otsu mask and common region.

    Arrays are in patch coordinates; ``origin`` is the patch's top-left
    corner in the image.
    """

    region: Region
    origin: tuple[int, int]
    patch: np.ndarray
    region_mask: np.ndarray
    binarized: np.ndarray | None = None
    common: np.ndarray | None = None
    stats: StrokeStats | None = None
    cues: CueVector | None = None
    status: str = PENDING
    reason: str | None = None
    cid: int = -1

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        return self.region.bbox

    @property
    def containment_ratio(self) -> float:
        return int(self.common.sum()) / int(self.region_mask.sum())

    def reject(self, reason: str) -> "Candidate":
        self.status = REJECTED
        self.reason = reason
        return self


def _region_key(r: Region):
    x, y, w, h = r.bbox
    return (y, x, h, w, r.area, r.polarity, r.mask.tobytes())


def make_candidate(img: np.ndarray, region: Region, margin: float = 0.1) -> Candidate:
    H, W = img.shape
    x, y, w, h = region.bbox
    mx, my = int(math.ceil(margin * w)), int(math.ceil(margin * h))
    x0, y0 = max(0, x - mx), max(0, y - my)
    x1, y1 = min(W, x + w + mx), min(H, y + h + my)
    patch = img[y0:y1, x0:x1]
    rmask = np.zeros(patch.shape, dtype=bool)
    rmask[y - y0:y - y0 + h, x - x0:x - x0 + w] = region.mask
    c = Candidate(region, (x0, y0), patch, rmask)
    try:
        t = imgproc.otsu_threshold(imgproc.histogram256(patch))
    except DegenerateError:
        return c.reject("no_contrast")
    c.binarized = imgproc.binarize(patch, t, region.polarity)
    c.common = c.binarized & rmask
    return c


def make_candidates(img, regions: list[Region], margin: float = 0.1) -> list[Candidate]:
    """Patches, Otsu masks and common regions, in canonical region order."""
    img = imgproc.check_gray(img)
    out = [make_candidate(img, r, margin) for r in sorted(regions, key=_region_key)]
    for i, c in enumerate(out):
        c.cid = i
    return out


def containment_filter(c: Candidate, fraction: float = 0.9) -> Candidate:
    """Reject unless strictly more than ``fraction`` of the blob is in the binarized patch."""
    if c.status != PENDING:
        return c
    if not c.containment_ratio > fraction:
        c.reject("containment")
    return c


def compute_cues(c: Candidate, params: CueParams = CueParams()) -> Candidate:
    """Stroke statistics and cue vector on the common region's bounding box."""
    if c.status != PENDING:
        return c
    ys, xs = np.nonzero(c.common)
    if ys.size == 0:
        return c.reject("degenerate")
    sl = (slice(ys.min(), ys.max() + 1), slice(xs.min(), xs.max() + 1))
    common = c.common[sl]
    try:
        c.stats = region_stroke_stats(common)
        c.cues = assemble_cues(common, c.patch[sl], c.stats, params)
    except DegenerateError:
        return c.reject("degenerate")
    return c


def cue_filter(c: Candidate, th: RejectionThresholds) -> Candidate:
    if c.status == REJECTED:
        return c
    if c.cues is None:
        raise ParameterError(f"candidate {c.cid} has no cues")
    for name, limit in th.items():
        if not getattr(c.cues, name) <= limit:
            return c.reject(f"cue:{name}")
    c.status = ACCEPTED
    return c


def extract_candidates(img, cfg: PipelineConfig = PipelineConfig()) -> list[Candidate]:
    """Everything up to cue extraction, without the cue gate.

    Returns every candidate; pending ones carry cues.
    """
    img = imgproc.check_gray(img)
    regions = emser_regions(img, cfg.mser, cfg.blend, cfg.connectivity)
    regions = geometric_filter(regions, cfg.geometry, img.shape)
    cands = make_candidates(img, regions, cfg.margin)
    for c in cands:
        containment_filter(c, cfg.containment)
        compute_cues(c, cfg.cues)
    return cands


def detect_candidates(img, cfg: PipelineConfig = PipelineConfig(),
                      keep_rejected: bool = False) -> list[Candidate]:
    """Full candidate stage; accepted candidates in canonical order."""
    cands = extract_candidates(img, cfg)
    for c in cands:
        cue_filter(c, cfg.thresholds)
    if keep_rejected:
        return cands
    return [c for c in cands if c.status == ACCEPTED]
