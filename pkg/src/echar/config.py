"""INI pipeline configuration.

Sections map one-to-one onto the config dataclasses::

    [pipeline]    blend, margin, containment, connectivity, distribution
    [mser]        delta, min_area, max_area, max_variation, min_diversity
    [geometry]    ar_min, ar_max, area_min, area_max, sk_min, sk_max
    [cues]        hog_cell, hog_bins, phog_levels, phog_bins
    [thresholds]  max_<cue> for every cue (inf = no bound)
    [refine]      tau_sw, tau_w, tau_lik, gap, center_offset, height_ratio, absorb

Missing keys keep their defaults; unknown sections or keys are errors.  A
relative ``distribution`` path is resolved against the config file.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
import os
from pathlib import Path

from .cues import CueParams
from .emser import GeometryLimits, MserParams
from .errors import ParameterError
from .pipeline import PipelineConfig, RefineParams, RejectionThresholds

ENV_VAR = "ECHAR_CONFIG"
DATA_DIR = Path(__file__).resolve().parent / "data"
DEFAULT_PATH = DATA_DIR / "default.ini"

_SECTIONS = {
    "mser": MserParams,
    "geometry": GeometryLimits,
    "cues": CueParams,
    "thresholds": RejectionThresholds,
    "refine": RefineParams,
}
_TOP = ("blend", "margin", "containment", "connectivity", "distribution")


def _convert(cls, name: str, raw: str):
    ftype = {f.name: f.type for f in dataclasses.fields(cls)}[name]
    ftype = ftype if isinstance(ftype, str) else ftype.__name__
    try:
        if ftype == "int":
            return int(raw)
        if ftype.startswith("str"):
            raw = raw.strip()
            return None if raw.lower() in ("", "none") else raw
        return float(raw)
    except ValueError:
        raise ParameterError(f"{cls.__name__}.{name}: cannot parse {raw!r}") from None


def _build(cls, items, where):
    known = {f.name for f in dataclasses.fields(cls)}
    kw = {}
    for k, v in items:
        if k not in known:
            raise ParameterError(f"unknown key {k!r} in [{where}]")
        kw[k] = _convert(cls, k, v)
    return cls(**kw)


def parse_config(text: str, base_dir=None) -> PipelineConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ParameterError(f"malformed config: {e}") from None
    parts = {}
    for sec in cp.sections():
        if sec == "pipeline":
            continue
        if sec not in _SECTIONS:
            raise ParameterError(f"unknown section [{sec}]")
        parts[sec] = _build(_SECTIONS[sec], cp.items(sec), sec)
    top = {}
    if cp.has_section("pipeline"):
        for k, v in cp.items("pipeline"):
            if k not in _TOP:
                raise ParameterError(f"unknown key {k!r} in [pipeline]")
            top[k] = _convert(PipelineConfig, k, v)
    dist = top.get("distribution")
    if dist is not None and base_dir is not None and not Path(dist).is_absolute():
        top["distribution"] = str(Path(base_dir) / dist)
    return PipelineConfig(**parts, **top)


def load_config(path=None) -> PipelineConfig:
    """Read ``path``, else ``$ECHAR_CONFIG``, else the bundled defaults."""
    if path is None:
        path = os.environ.get(ENV_VAR) or DEFAULT_PATH
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    return parse_config(path.read_text(), path.parent)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def dump_config(cfg: PipelineConfig, distribution: str | None = None) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    top = {k: getattr(cfg, k) for k in _TOP}
    if distribution is not None:
        top["distribution"] = distribution
    cp["pipeline"] = {k: ("none" if v is None else _fmt(v)) for k, v in top.items()}
    for sec in _SECTIONS:
        obj = getattr(cfg, sec)
        cp[sec] = {f.name: _fmt(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    lines = []
    for sec in cp.sections():
        lines.append(f"[{sec}]")
        lines.extend(f"{k} = {v}" for k, v in cp[sec].items())
        lines.append("")
    return "\n".join(lines)


def load_distribution(cfg: PipelineConfig):
    """The CueDistribution named by ``cfg``, or None."""
    from .refine import CueDistribution
    if cfg.distribution is None:
        return None
    return CueDistribution.load(cfg.distribution)
