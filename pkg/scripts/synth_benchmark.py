"""Calibrate on one seeded synthetic corpus, evaluate word boxes on another."""
import argparse
import dataclasses
import time

import numpy as np

from echar import evalkit, refine, synth
from echar.pipeline import PipelineConfig


def best_word_iou(boxes, words):
    """Best box IoU for every ground-truth word (0 when nothing overlaps)."""
    return [max((evalkit.rect_iou(b.bbox, w) for b in boxes), default=0.0) for w in words]


def run(n_cal=50, n_test=100, cal_seed=1000, test_seed=2000, percentile=100.0, iou_min=0.5, verbose=True):
    t0 = time.perf_counter()
    cfg = PipelineConfig()
    cal = synth.generate(n_cal, cal_seed)
    dist, th = refine.calibrate(((s.image, s.glyph_boxes) for s in cal), cfg, percentile)
    cfg = dataclasses.replace(cfg, thresholds=th)
    pre, fin = [], []
    iou_pre, iou_fin = [], []
    for i, s in enumerate(synth.generate(n_test, test_seed)):
        det = refine.detect(s.image, cfg, dist)
        gts = [b for _, b in s.words]
        pre.append(evalkit.match_detections([b.bbox for b in det.pre], gts, iou_min, f"img_{i:04d}"))
        fin.append(evalkit.match_detections([b.bbox for b in det.final], gts, iou_min, f"img_{i:04d}"))
        iou_pre += best_word_iou(det.pre, gts)
        iou_fin += best_word_iou(det.final, gts)
    elapsed = time.perf_counter() - t0
    out = {"pre": evalkit.aggregate(pre), "final": evalkit.aggregate(fin),
           "samples": dist.sample_count, "seconds": elapsed,
           "word_iou_pre": float(np.mean(iou_pre)), "word_iou_final": float(np.mean(iou_fin))}
    if verbose:
        print(f"calibration samples {dist.sample_count}")
        for k in ("pre", "final"):
            r = out[k]
            print(f"{k:<6} P={r.precision:.3f} R={r.recall:.3f} F={r.f_measure:.3f} det={r.n_det} gt={r.n_gt} "
                  f"mean word IoU {out['word_iou_' + k]:.3f}")
        print(f"elapsed {elapsed:.1f}s")
    return out


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cal", type=int, default=50)
    ap.add_argument("--test", type=int, default=100)
    ap.add_argument("--cal-seed", type=int, default=1000)
    ap.add_argument("--test-seed", type=int, default=2000)
    ap.add_argument("--percentile", type=float, default=100.0)
    a = ap.parse_args()
    run(a.cal, a.test, a.cal_seed, a.test_seed, a.percentile)
