"""Time single-threaded detection on a 1296x864 synthetic scene."""
import argparse
import time

import numpy as np

from echar import refine, synth
from echar.config import load_config, load_distribution

SHAPE = (864, 1296)


def large_image(seed=0, n_words=12, background="noise"):
    rng = np.random.default_rng(seed)
    return synth.make_image(rng, shape=SHAPE, background=background, n_words=n_words).image


def run(seed=0, repeats=3, background="noise", verbose=True):
    cfg = load_config()
    dist = load_distribution(cfg)
    img = large_image(seed, background=background)
    refine.detect(img[:64, :64], cfg, dist)  # compile numba kernels outside the timing
    times, det = [], None
    for _ in range(repeats):
        t0 = time.perf_counter()
        det = refine.detect(img, cfg, dist)
        times.append(time.perf_counter() - t0)
    out = {"seconds": min(times), "all": times, "final": len(det.final), "pre": len(det.pre)}
    if verbose:
        print(f"{SHAPE[1]}x{SHAPE[0]} {background}: best {out['seconds']:.2f}s "
              f"of {', '.join(f'{t:.2f}' for t in times)}; {out['pre']} candidates, {out['final']} boxes")
    return out


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--background", choices=synth.BACKGROUNDS, default="noise")
    a = ap.parse_args()
    run(a.seed, a.repeats, a.background)
