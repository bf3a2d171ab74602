import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from echar import evalkit
from echar.errors import DegenerateError, GroundTruthParseError, ParameterError
from echar.evalkit import (DetectionRecord, EvalReport, GroundTruthBox, aggregate, iou,
                           match_detections, parse_ground_truth, rect_iou)

from oracles import raster_iou

rects = st.tuples(st.integers(0, 40), st.integers(0, 40), st.integers(1, 24), st.integers(1, 24))


# -- IoU ---------------------------------------------------------------------------

def test_iou_examples():
    assert iou((3, 4, 10, 7), (3, 4, 10, 7)) == 1.0
    assert iou((0, 0, 5, 5), (10, 10, 5, 5)) == 0.0
    assert iou((0, 0, 10, 10), (5, 0, 10, 10)) == pytest.approx(1 / 3, abs=1e-15)
    assert iou((0, 0, 5, 5), (5, 0, 5, 5)) == 0.0  # touching edges share no pixel


def test_iou_both_empty():
    with pytest.raises(DegenerateError):
        iou((0, 0, 0, 0), (3, 3, 0, 5))
    with pytest.raises(DegenerateError):
        iou(np.zeros((4, 4), bool), np.zeros((4, 4), bool))
    assert iou((0, 0, 0, 0), (0, 0, 2, 2)) == 0.0


def test_mask_iou():
    a = np.zeros((6, 6), bool)
    b = np.zeros((6, 6), bool)
    a[0:2, 0:3] = True
    b[1:3, 0:3] = True
    assert iou(a, b) == pytest.approx(3 / 9)
    with pytest.raises(ParameterError):
        iou(a, b[:5])


@given(rects, rects)
def test_iou_matches_raster(a, b):
    v = rect_iou(a, b)
    assert v == pytest.approx(raster_iou(a, b), abs=1e-12)
    assert v == rect_iou(b, a)
    assert 0.0 <= v <= 1.0
    assert rect_iou(a, a) == 1.0


# -- matching --------------------------------------------------------------------

def test_match_exact():
    r = match_detections([(1, 1, 10, 10)], [(1, 1, 10, 10)])
    assert (r.tp, r.precision, r.recall, r.f_measure) == (1, 1.0, 1.0, 1.0)


def test_match_half():
    r = match_detections([(0, 0, 10, 10), (100, 100, 5, 5)], [(0, 0, 10, 10), (50, 50, 5, 5)])
    assert (r.precision, r.recall, r.f_measure) == (0.5, 0.5, 0.5)


def test_match_iou_half_is_strict():
    # IoU of (0,0,10,10) and (0,0,10,20) is exactly 0.5
    assert rect_iou((0, 0, 10, 10), (0, 0, 10, 20)) == 0.5
    assert match_detections([(0, 0, 10, 10)], [(0, 0, 10, 20)]).tp == 0
    assert match_detections([(0, 0, 10, 11)], [(0, 0, 10, 20)]).tp == 1


def test_match_greedy_by_iou():
    gts = [(0, 0, 10, 10)]
    dets = [(1, 0, 10, 10), (0, 0, 10, 10)]
    r = match_detections(dets, gts)
    assert r.matches == [(1, 0, 1.0)]


def test_empty_conventions():
    r = match_detections([], [])
    assert (r.precision, r.recall, r.f_measure) == (0.0, 0.0, 0.0)
    r = match_detections([(0, 0, 3, 3)], [])
    assert r.n_det == 1 and r.precision == 0.0


@given(st.lists(rects, max_size=6), st.lists(rects, max_size=6),
       st.floats(0.0, 0.9), st.floats(0.0, 0.9))
def test_match_properties(dets, gts, t1, t2):
    lo, hi = sorted((t1, t2))
    a = match_detections(dets, gts, lo)
    b = match_detections(dets, gts, hi)
    assert a.tp <= min(len(dets), len(gts))
    assert a.tp >= b.tp
    assert len({i for i, _, _ in a.matches}) == len(a.matches)
    assert len({j for _, j, _ in a.matches}) == len(a.matches)
    for p in (a.precision, a.recall, a.f_measure):
        assert 0.0 <= p <= 1.0


def test_difficult_excluded():
    gts = [GroundTruthBox((0, 0, 10, 10)), GroundTruthBox((50, 0, 10, 10), difficult=True)]
    dets = [(0, 0, 10, 10), (50, 0, 10, 10)]
    r = match_detections(dets, gts)
    assert (r.tp, r.n_det, r.n_gt) == (1, 1, 1)
    r = match_detections(dets[:1], gts)
    assert (r.tp, r.n_det, r.n_gt) == (1, 1, 1)
    r = match_detections(dets, gts, ignore_difficult=False)
    assert (r.tp, r.n_det, r.n_gt) == (2, 2, 2)


# -- aggregate -------------------------------------------------------------------

def test_aggregate_examples():
    one = EvalReport("a", [], 1, 1, 2)
    total = aggregate([one])
    assert (total.tp, total.n_det, total.n_gt) == (1, 1, 2)
    assert total.precision == one.precision and total.recall == one.recall
    total = aggregate([one, EvalReport("b", [], 1, 3, 2)])
    assert (total.precision, total.recall, total.f_measure) == (0.5, 0.5, 0.5)
    empty = aggregate([])
    assert (empty.tp, empty.n_det, empty.n_gt, empty.f_measure) == (0, 0, 0, 0.0)


@given(st.integers(0, 5), st.integers(0, 5), st.integers(0, 5), st.integers(1, 6))
def test_aggregate_copies(tp, extra_d, extra_g, k):
    r = EvalReport("x", [], tp, tp + extra_d, tp + extra_g)
    t = aggregate([r] * k)
    assert (t.precision, t.recall, t.f_measure) == (r.precision, r.recall, r.f_measure)


def test_report_record_and_table():
    r = EvalReport("img1", [], 1, 2, 4)
    assert r.record() == "img1 1 2 4 0.500000 0.250000 0.333333"
    table = evalkit.format_table([r], aggregate([r]), title="t")
    assert table.splitlines()[0] == "t"
    assert "ALL" in table.splitlines()[-1]


# -- parsers -----------------------------------------------------------------------

def test_generic(tmp_path):
    p = tmp_path / "gt.txt"
    p.write_text("# comment\nimg1 10 20 30 40\n\nimg2 0 0 5 5\nimg1 1 2 3 4\n")
    gt = dict(parse_ground_truth(p, "generic"))
    assert [b.bbox for b in gt["img1"]] == [(10, 20, 30, 40), (1, 2, 3, 4)]
    assert [b.bbox for b in gt["img2"]] == [(0, 0, 5, 5)]


def test_generic_malformed_line_number(tmp_path):
    p = tmp_path / "gt.txt"
    p.write_text("img1 10 20 30 40\nimg1 10 20 thirty 40\n")
    with pytest.raises(GroundTruthParseError, match=r"gt.txt:2"):
        parse_ground_truth(p, "generic")
    p.write_text("img1 10 20 30\n")
    with pytest.raises(GroundTruthParseError, match=r":1"):
        parse_ground_truth(p, "generic")


def test_msratd(tmp_path):
    d = tmp_path / "msra"
    d.mkdir()
    (d / "IMG_0001.gt").write_text(f"0 0 10 20 40 10 0\n1 1 10 20 40 10 {math.pi / 2!r}\n")
    (iid, boxes), = parse_ground_truth(d, "msratd")
    assert iid == "IMG_0001"
    assert boxes[0].bbox == (10, 20, 40, 10) and not boxes[0].rotated
    # centre (30, 25); a quarter turn makes it 10 wide and 40 tall
    cx, cy = 30, 25
    assert boxes[1].bbox == (cx - 5, cy - 20, 10, 40)
    assert boxes[1].difficult and boxes[1].rotated


def test_msratd_bad_line(tmp_path):
    p = tmp_path / "a.gt"
    p.write_text("0 0 10 20 40 10 0\n0 0 10 20 40\n")
    with pytest.raises(GroundTruthParseError, match=r"a.gt:2"):
        parse_ground_truth(p, "msratd")


def test_rotated_hull_small_angle():
    x, y, w, h, th = 0.0, 0.0, 20.0, 10.0, 0.1
    cx, cy = 10.0, 5.0
    xs = [cx + math.cos(th) * dx - math.sin(th) * dy for dx in (-10, 10) for dy in (-5, 5)]
    ys = [cy + math.sin(th) * dx + math.cos(th) * dy for dx in (-10, 10) for dy in (-5, 5)]
    hx, hy, hw, hh = evalkit.rotated_hull(x, y, w, h, th)
    assert hx <= min(xs) and hy <= min(ys)
    assert hx + hw >= max(xs) and hy + hh >= max(ys)
    assert hw - (max(xs) - min(xs)) < 2 and hh - (max(ys) - min(ys)) < 2


KAIST = """<?xml version="1.0" encoding="UTF-8"?>
<images>
  <image>
    <imageName>DSC02010.JPG</imageName>
    <resolution x="100" y="80" />
    <words>
      <word x="10" y="12" width="30" height="20"><character char="A"/></word>
      <word x="90" y="70" width="30" height="20"/>
    </words>
  </image>
</images>
"""


def test_kaist(tmp_path):
    p = tmp_path / "DSC02010.xml"
    p.write_text(KAIST)
    (iid, boxes), = parse_ground_truth(p, "kaist")
    assert iid == "DSC02010"
    # second word clamped to the 100 x 80 frame
    assert [b.bbox for b in boxes] == [(10, 12, 30, 20), (90, 70, 10, 10)]


def test_kaist_malformed(tmp_path):
    p = tmp_path / "bad.xml"
    p.write_text("<images><image><word x='a' y='1' width='2' height='3'/></image></images>")
    with pytest.raises(GroundTruthParseError):
        parse_ground_truth(p, "kaist")
    p.write_text("<images><image>")
    with pytest.raises(GroundTruthParseError):
        parse_ground_truth(p, "kaist")


def test_unknown_format(tmp_path):
    with pytest.raises(ParameterError):
        parse_ground_truth(tmp_path, "icdar")


def test_missing_path(tmp_path):
    with pytest.raises(FileNotFoundError):
        parse_ground_truth(tmp_path / "nope.txt")


# -- records -----------------------------------------------------------------------

@given(st.text(st.characters(whitelist_categories=("Ll", "Nd")), min_size=1, max_size=8), rects,
       st.floats(0, 1), st.sampled_from(["pre", "final"]))
def test_record_round_trip(iid, bbox, score, stage):
    r = DetectionRecord(iid, bbox, score, stage)
    assert DetectionRecord.parse(r.line()) == r


def test_evaluate_by_stage(tmp_path):
    recs = [DetectionRecord("a", (0, 0, 10, 10), 1.0, "final"),
            DetectionRecord("a", (50, 50, 10, 10), 1.0, "pre"),
            DetectionRecord("b", (0, 0, 4, 4), 1.0, "final")]
    p = tmp_path / "d.txt"
    p.write_text("# header\n" + "".join(r.line() + "\n" for r in recs))
    assert evalkit.read_detections(p) == recs
    gt = [("a", [GroundTruthBox((0, 0, 10, 10))]), ("c", [GroundTruthBox((1, 1, 3, 3))])]
    reports, total = evalkit.evaluate(recs, gt, "final")
    assert [r.image_id for r in reports] == ["a", "b", "c"]
    assert (total.tp, total.n_det, total.n_gt) == (1, 2, 2)
    _, pre = evalkit.evaluate(recs, gt, "pre")
    assert (pre.tp, pre.n_det, pre.n_gt) == (0, 1, 2)


def test_bad_record_file(tmp_path):
    p = tmp_path / "d.txt"
    p.write_text("a 0 0 1 1 0.5 final\na 0 0 1\n")
    with pytest.raises(GroundTruthParseError, match=":2"):
        evalkit.read_detections(p)
