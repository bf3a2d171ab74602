"""Command-line frontend: detect, calibrate, eval, synth, swt.

Exit codes: 0 success, 1 usage, 2 I/O, 3 computation.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__, evalkit, imgproc, refine, strokes, synth
from .config import ENV_VAR, dump_config, load_config, load_distribution
from .errors import CalibrationError, EcharError, GroundTruthParseError, ParameterError

log = logging.getLogger("echar")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_COMPUTE = 0, 1, 2, 3
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".pgm", ".ppm", ".tif", ".tiff")
STAGES = ("pre", "final", "both")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _image_paths(inputs) -> list[Path]:
    out = []
    for p in map(Path, inputs):
        if p.is_dir():
            out.extend(sorted(q for q in p.iterdir() if q.suffix.lower() in IMAGE_SUFFIXES))
        else:
            out.append(p)
    return out


def _config(path):
    try:
        return load_config(path)
    except FileNotFoundError as e:
        raise UsageError(str(e)) from None


# -- detect -------------------------------------------------------------------

def _render(path: Path, img, boxes_by_stage, out_dir: Path):
    from PIL import Image, ImageDraw
    rgb = Image.fromarray(img).convert("RGB")
    draw = ImageDraw.Draw(rgb)
    colours = {"pre": (0, 128, 255), "final": (255, 0, 0)}
    for stage, boxes in boxes_by_stage.items():
        for b in boxes:
            x, y, w, h = b.bbox
            draw.rectangle([x, y, x + w - 1, y + h - 1], outline=colours[stage])
    out_dir.mkdir(parents=True, exist_ok=True)
    rgb.save(out_dir / f"{path.stem}_overlay.png")


def _detect_one(path: Path, cfg, dist, stage: str, render_dir):
    """Records for one image, or an error string."""
    try:
        img = imgproc.load_gray(path)
    except (OSError, ValueError) as e:
        return path.stem, None, f"{type(e).__name__}: {e}"
    det = refine.detect(img, cfg, dist)
    chosen = {s: getattr(det, s) for s in ("pre", "final") if stage in (s, "both")}
    recs = [evalkit.DetectionRecord(path.stem, tuple(b.bbox), b.score, s)
            for s, boxes in chosen.items() for b in boxes]
    if render_dir is not None:
        _render(path, img, chosen, Path(render_dir))
    return path.stem, recs, None


def _record_key(r: evalkit.DetectionRecord):
    x, y, w, h = r.bbox
    return r.image_id, r.stage != "pre", y, x, h, w, r.score


def detect_records(paths, cfg, dist, stage="final", jobs=1, render_dir=None):
    """Run detection over ``paths``; returns (sorted records, [(image_id, error)])."""
    args = [(p, cfg, dist, stage, render_dir) for p in paths]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_detect_one, *zip(*args)))
    else:
        results = [_detect_one(*a) for a in args]
    records, errors = [], []
    for iid, recs, err in results:
        if err is not None:
            errors.append((iid, err))
        else:
            records.extend(recs)
    records.sort(key=_record_key)
    errors.sort()
    return records, errors


def cmd_detect(a) -> int:
    cfg = _config(a.config)
    dist = load_distribution(cfg)
    paths = _image_paths(a.images)
    if not paths:
        raise UsageError("no input images")
    records, errors = detect_records(paths, cfg, dist, a.stage, a.jobs, a.render)
    lines = [r.line() for r in records] + [f"# error {iid}: {msg}" for iid, msg in errors]
    text = "".join(line + "\n" for line in lines)
    if a.output:
        Path(a.output).write_text(text)
    else:
        sys.stdout.write(text)
    for iid, msg in errors:
        log.error("%s: %s", iid, msg)
    return EXIT_IO if len(errors) == len(paths) else EXIT_OK


# -- calibrate ----------------------------------------------------------------

def _corpus(corpus_dir: Path, gt_path: Path, fmt: str):
    gt = dict(evalkit.parse_ground_truth(gt_path, fmt))
    paths = {p.stem: p for p in _image_paths([corpus_dir])}
    if not paths:
        raise CalibrationError(f"no images in {corpus_dir}")
    for iid in sorted(paths):
        if iid not in gt:
            log.warning("no ground truth for %s; skipped", iid)
            continue
        yield imgproc.load_gray(paths[iid]), [b.bbox for b in gt[iid]]


def cmd_calibrate(a) -> int:
    cfg = _config(a.config)
    corpus_dir = Path(a.corpus)
    if not corpus_dir.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {corpus_dir}")
    dist, th = refine.calibrate(_corpus(corpus_dir, Path(a.gt), a.format), cfg, a.percentile)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    dist.save(out / "cuedist.txt")
    cfg = dataclasses.replace(cfg, thresholds=th)
    (out / "thresholds.ini").write_text(dump_config(cfg, distribution="cuedist.txt"))
    print(f"samples {dist.sample_count}")
    for name in refine.CUES:
        print(f"  {name:<16} {dist.sample_count}")
    print(f"wrote {out / 'cuedist.txt'} and {out / 'thresholds.ini'}")
    return EXIT_OK


# -- eval ---------------------------------------------------------------------

def cmd_eval(a) -> int:
    records = evalkit.read_detections(a.detections)
    gt = evalkit.parse_ground_truth(a.gt, a.format)
    reports, total = evalkit.evaluate(records, gt, a.stage, a.iou, not a.keep_difficult)
    print(evalkit.format_table(reports, total, title=f"stage={a.stage} iou>{a.iou}"))
    if a.output:
        Path(a.output).write_text("".join(r.record() + "\n" for r in reports + [total]))
    return EXIT_OK


# -- synth / swt ----------------------------------------------------------------

def cmd_synth(a) -> int:
    if a.count < 1:
        raise UsageError("--count must be >= 1")
    ids = synth.write_corpus(a.out, a.count, a.seed, blur_fraction=a.blur_fraction)
    print(f"wrote {len(ids)} images to {a.out}")
    return EXIT_OK


def cmd_swt(a) -> int:
    img = imgproc.load_gray(a.image)
    direction = "dark_on_light" if a.direction == "dark" else "light_on_dark"
    strokes.write_pfm(strokes.swt(img, direction), a.output)
    return EXIT_OK


# -- entry ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="echar", description="Edge-enhanced MSER text detection with characterness cues.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    cfg_help = f"pipeline config (INI); default ${ENV_VAR} or the bundled defaults"

    p = sub.add_parser("detect", help="detect text boxes in images")
    p.add_argument("images", nargs="+", help="image files or directories")
    p.add_argument("--config", help=cfg_help)
    p.add_argument("--stage", choices=STAGES, default="final")
    p.add_argument("--render", metavar="DIR", help="write overlay PNGs here")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-o", "--output", help="record file (default stdout)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("calibrate", help="fit cue distribution and thresholds")
    p.add_argument("corpus", help="directory of images")
    p.add_argument("gt", help="ground-truth file or directory")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.add_argument("--format", choices=sorted(evalkit._PARSERS), default="generic")
    p.add_argument("--percentile", type=float, default=100.0)
    p.add_argument("--config", help=cfg_help)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("eval", help="score detection records against ground truth")
    p.add_argument("detections")
    p.add_argument("gt")
    p.add_argument("--format", choices=sorted(evalkit._PARSERS), default="generic")
    p.add_argument("--stage", choices=("pre", "final"), default="final")
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--keep-difficult", action="store_true", help="count difficult boxes")
    p.add_argument("-o", "--output", help="write per-image report records")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="render a seeded synthetic text corpus")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--blur-fraction", type=float, default=0.3)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("swt", help="export a stroke width map as PFM")
    p.add_argument("image")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--direction", choices=("dark", "light"), default="dark",
                   help="dark text on light background, or the reverse")
    p.set_defaults(func=cmd_swt)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as e:  # --help, --version and usage errors
        return e.code
    logging.basicConfig(level=logging.WARNING - 10 * min(a.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(a, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        return a.func(a)
    except UsageError as e:
        print(f"echar: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, GroundTruthParseError) as e:
        print(f"echar: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except ParameterError as e:
        print(f"echar: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (CalibrationError, EcharError) as e:
        print(f"echar: computation failed: {e}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
