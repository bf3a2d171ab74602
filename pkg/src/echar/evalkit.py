"""IoU matching, precision/recall/F-measure and ground-truth parsers."""
from __future__ import annotations

import logging
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateError, GroundTruthParseError, ParameterError

log = logging.getLogger(__name__)

Rect = tuple[int, int, int, int]  # x, y, w, h


@dataclass(frozen=True)
class GroundTruthBox:
    bbox: Rect
    difficult: bool = False
    source_id: str = ""
    rotated: bool = False


def _as_rect(b) -> Rect:
    if hasattr(b, "bbox"):
        b = b.bbox
    x, y, w, h = b
    return int(x), int(y), int(w), int(h)


def rect_iou(a: Rect, b: Rect) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    aa, ba = max(aw, 0) * max(ah, 0), max(bw, 0) * max(bh, 0)
    if aa == 0 and ba == 0:
        raise DegenerateError("IoU of two empty sets is undefined")
    iw = max(0, min(ax + aw, bx + bw) - max(ax, bx))
    ih = max(0, min(ay + ah, by + bh) - max(ay, by))
    inter = iw * ih
    return inter / (aa + ba - inter)


def mask_iou(a, b) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ParameterError("masks must share a frame")
    union = int(np.count_nonzero(a | b))
    if union == 0:
        raise DegenerateError("IoU of two empty sets is undefined")
    return int(np.count_nonzero(a & b)) / union


def iou(a, b) -> float:
    """Intersection over union of two rects ``(x, y, w, h)`` or two boolean masks."""
    if isinstance(a, np.ndarray) and a.ndim == 2:
        return mask_iou(a, b)
    return rect_iou(_as_rect(a), _as_rect(b))


@dataclass
class EvalReport:
    image_id: str = ""
    matches: list[tuple[int, int, float]] = field(default_factory=list)
    tp: int = 0
    n_det: int = 0
    n_gt: int = 0

    @property
    def precision(self) -> float:
        return self.tp / self.n_det if self.n_det else 0.0

    @property
    def recall(self) -> float:
        return self.tp / self.n_gt if self.n_gt else 0.0

    @property
    def f_measure(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def record(self) -> str:
        return (f"{self.image_id or 'ALL'} {self.tp} {self.n_det} {self.n_gt} "
                f"{self.precision:.6f} {self.recall:.6f} {self.f_measure:.6f}")


def match_detections(dets, gts, iou_min: float = 0.5, image_id: str = "",
                     ignore_difficult: bool = True) -> EvalReport:
    """Greedy one-to-one matching in descending IoU; a pair needs IoU > ``iou_min``.

    With ``ignore_difficult`` a difficult box counts in neither the
    ground-truth total nor, when matched, the detection total.
    """
    d_rects = [_as_rect(d) for d in dets]
    g_boxes = [g if isinstance(g, GroundTruthBox) else GroundTruthBox(_as_rect(g)) for g in gts]
    pairs = []
    for i, d in enumerate(d_rects):
        for j, g in enumerate(g_boxes):
            v = rect_iou(d, g.bbox)
            if v > iou_min:
                pairs.append((-v, i, j))
    pairs.sort()
    used_d, used_g = set(), set()
    matches = []
    for nv, i, j in pairs:
        if i in used_d or j in used_g:
            continue
        used_d.add(i)
        used_g.add(j)
        matches.append((i, j, -nv))
    if ignore_difficult:
        hard = {j for j, g in enumerate(g_boxes) if g.difficult}
        tp = sum(1 for _, j, _ in matches if j not in hard)
        n_det = len(d_rects) - sum(1 for _, j, _ in matches if j in hard)
        n_gt = len(g_boxes) - len(hard)
    else:
        tp, n_det, n_gt = len(matches), len(d_rects), len(g_boxes)
    return EvalReport(image_id, matches, tp, n_det, n_gt)


def aggregate(reports) -> EvalReport:
    """Micro-average: sum the counts, then recompute the ratios."""
    out = EvalReport("")
    for r in reports:
        out.tp += r.tp
        out.n_det += r.n_det
        out.n_gt += r.n_gt
    return out


def format_table(reports, total: EvalReport | None = None, title: str = "") -> str:
    lines = [title] if title else []
    lines.append(f"{'image':<24}{'tp':>6}{'det':>6}{'gt':>6}{'P':>9}{'R':>9}{'F':>9}")
    rows = list(reports) + ([total] if total is not None else [])
    for r in rows:
        lines.append(f"{(r.image_id or 'ALL'):<24}{r.tp:>6}{r.n_det:>6}{r.n_gt:>6}"
                     f"{r.precision:>9.4f}{r.recall:>9.4f}{r.f_measure:>9.4f}")
    return "\n".join(lines)


# -- ground truth -----------------------------------------------------------

def rotated_hull(x: float, y: float, w: float, h: float, theta: float) -> Rect:
    """Axis-aligned hull of a ``w x h`` box at ``(x, y)`` rotated by ``theta`` about its centre."""
    cx, cy = x + w / 2.0, y + h / 2.0
    c, s = math.cos(theta), math.sin(theta)
    xs, ys = [], []
    for dx, dy in ((-w / 2, -h / 2), (w / 2, -h / 2), (w / 2, h / 2), (-w / 2, h / 2)):
        xs.append(round(cx + c * dx - s * dy, 6))
        ys.append(round(cy + s * dx + c * dy, 6))
    x0, y0 = math.floor(min(xs)), math.floor(min(ys))
    x1, y1 = math.ceil(max(xs)), math.ceil(max(ys))
    return x0, y0, x1 - x0, y1 - y0


def _clamp(r: Rect, width: int | None = None, height: int | None = None) -> Rect | None:
    x, y, w, h = r
    x1, y1 = x + w, y + h
    x, y = max(x, 0), max(y, 0)
    if width is not None:
        x1 = min(x1, width)
    if height is not None:
        y1 = min(y1, height)
    if x1 - x <= 0 or y1 - y <= 0:
        return None
    return x, y, x1 - x, y1 - y


def _files(path: Path, suffix: str) -> list[Path]:
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix.lower() == suffix)
    return [path]


def _parse_msratd(path: Path):
    out = []
    rotated = 0
    for f in _files(path, ".gt"):
        iid = f.stem
        if iid.lower().startswith("gt_"):
            iid = iid[3:]
        boxes = []
        for ln, line in enumerate(f.read_text().splitlines(), 1):
            tok = line.split()
            if not tok:
                continue
            if len(tok) != 7:
                raise GroundTruthParseError(f"{f}:{ln}: expected 7 fields, got {len(tok)}")
            try:
                difficult = int(tok[1]) != 0
                x, y, w, h, theta = (float(t) for t in tok[2:])
            except ValueError as e:
                raise GroundTruthParseError(f"{f}:{ln}: {e}") from None
            if w <= 0 or h <= 0:
                raise GroundTruthParseError(f"{f}:{ln}: non-positive box size")
            rect = rotated_hull(x, y, w, h, theta)
            rect = _clamp(rect)
            if rect is None:
                continue
            if theta != 0:
                rotated += 1
            boxes.append(GroundTruthBox(rect, difficult, iid, theta != 0))
        out.append((iid, boxes))
    if rotated:
        log.warning("msratd: %d rotated boxes replaced by axis-aligned hulls", rotated)
    return out


def _parse_kaist(path: Path):
    out = []
    for f in _files(path, ".xml"):
        try:
            root = ET.parse(f).getroot()
        except ET.ParseError as e:
            raise GroundTruthParseError(f"{f}:{e.position[0]}: {e}") from None
        images = [root] if root.tag == "image" else root.iter("image")
        for im in images:
            name = im.findtext("imageName") or f.stem
            iid = Path(name.strip()).stem
            width = height = None
            res = im.find("resolution")
            if res is not None and res.get("x") and res.get("y"):
                width, height = int(float(res.get("x"))), int(float(res.get("y")))
            boxes = []
            for word in im.iter("word"):
                try:
                    r = tuple(int(round(float(word.get(k)))) for k in ("x", "y", "width", "height"))
                except (TypeError, ValueError):
                    raise GroundTruthParseError(f"{f}: malformed <word> attributes {word.attrib}") from None
                rect = _clamp(r, width, height)
                if rect is not None:
                    boxes.append(GroundTruthBox(rect, False, iid))
            out.append((iid, boxes))
    return out


def _parse_generic(path: Path):
    by_id: dict[str, list[GroundTruthBox]] = {}
    for f in _files(path, ".txt"):
        for ln, line in enumerate(f.read_text().splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tok = line.split()
            if len(tok) != 5:
                raise GroundTruthParseError(f"{f}:{ln}: expected 'image_id x y w h'")
            try:
                r = tuple(int(t) for t in tok[1:])
            except ValueError as e:
                raise GroundTruthParseError(f"{f}:{ln}: {e}") from None
            if r[2] <= 0 or r[3] <= 0:
                raise GroundTruthParseError(f"{f}:{ln}: non-positive box size")
            by_id.setdefault(tok[0], []).append(GroundTruthBox(r, False, tok[0]))
    return list(by_id.items())


_PARSERS = {"msratd": _parse_msratd, "kaist": _parse_kaist, "generic": _parse_generic}


def parse_ground_truth(path, fmt: str = "generic") -> list[tuple[str, list[GroundTruthBox]]]:
    """Read ground truth as ``[(image_id, boxes), ...]``.

    ``msratd``: a ``.gt`` file or a directory of them, lines
    ``idx difficult x y w h theta``; rotated boxes become axis-aligned hulls.
    ``kaist``: an XML annotation file or a directory of them, with
    ``<word x= y= width= height=>`` elements.
    ``generic``: text lines ``image_id x y w h``.
    """
    if fmt not in _PARSERS:
        raise ParameterError(f"unknown ground-truth format {fmt!r}")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    return _PARSERS[fmt](path)


# -- detection records ------------------------------------------------------

@dataclass(frozen=True)
class DetectionRecord:
    image_id: str
    bbox: Rect
    score: float
    stage: str

    def line(self) -> str:
        x, y, w, h = self.bbox
        return f"{self.image_id} {x} {y} {w} {h} {self.score!r} {self.stage}"

    @classmethod
    def parse(cls, line: str) -> "DetectionRecord":
        tok = line.split()
        if len(tok) != 7:
            raise ValueError(f"bad detection record {line!r}")
        return cls(tok[0], tuple(int(t) for t in tok[1:5]), float(tok[5]), tok[6])


def read_detections(path) -> list[DetectionRecord]:
    out = []
    for ln, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            out.append(DetectionRecord.parse(line))
        except ValueError as e:
            raise GroundTruthParseError(f"{path}:{ln}: {e}") from None
    return out


def evaluate(records, gt, stage: str = "final", iou_min: float = 0.5,
             ignore_difficult: bool = True) -> tuple[list[EvalReport], EvalReport]:
    """Per-image reports over every image present in ``gt`` or the records."""
    gt_map = dict(gt)
    dets: dict[str, list[Rect]] = {}
    for r in records:
        if r.stage == stage:
            dets.setdefault(r.image_id, []).append(r.bbox)
    ids = sorted(set(gt_map) | set(dets))
    reports = [match_detections(dets.get(i, []), gt_map.get(i, []), iou_min, i, ignore_difficult)
               for i in ids]
    return reports, aggregate(reports)
