"""Experiment configuration: YAML text <-> validated ExperimentConfig."""
from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

import numpy as np
import yaml

from .fields import FIELD_LIBRARY
from .geometry import (Angular, Box, ConvexPolygon, Epigraph, LipschitzFn, half_space, scaled)

SUBCOMMANDS = ("seminorm", "extend", "korn-constant", "hardy", "cover", "convergence", "perisolve",
               "probe-ps-lt-1", "acceptance")
DOMAIN_TYPES = ("unit_square", "box", "half_space", "epigraph", "angular", "polygon", "scaled")


class ConfigError(Exception):
    """Invalid configuration; ``where`` is a field path or a 'line N' location."""

    def __init__(self, where, message):
        super().__init__(f"{where}: {message}")
        self.where = where
        self.message = message


@dataclass
class ExperimentConfig:
    subcommand: str
    domain: dict = field(default_factory=lambda: {"type": "unit_square"})
    fields: list = field(default_factory=list)
    params: dict = field(default_factory=lambda: {"s": 0.5, "p": 2.0})
    h: list = field(default_factory=lambda: [1 / 16])
    options: dict = field(default_factory=dict)
    seed: int = 0
    out: Optional[str] = None
    threads: int = 1

    def to_dict(self):
        return copy.deepcopy(asdict(self))


_KEYS = {"subcommand", "domain", "fields", "params", "h", "options", "seed", "out", "threads"}


def _need(cond, where, msg):
    if not cond:
        raise ConfigError(where, msg)


def _num(v, where, positive=False):
    _need(isinstance(v, (int, float)) and not isinstance(v, bool), where, f"expected a number, got {v!r}")
    _need(np.isfinite(v), where, "must be finite")
    if positive:
        _need(v > 0, where, "must be positive")
    return float(v)


def _vec(v, where, length=None):
    _need(isinstance(v, (list, tuple)) and len(v) > 0, where, "expected a list of numbers")
    out = [_num(x, f"{where}[{i}]") for i, x in enumerate(v)]
    if length is not None:
        _need(len(out) == length, where, f"expected {length} entries")
    return out


def _check_lipschitz(spec, where):
    _need(isinstance(spec, dict), where, "expected a mapping")
    kind = spec.get("kind", "affine")
    if kind == "affine":
        _vec(spec.get("slope", [0.0]), f"{where}.slope")
        _num(spec.get("offset", 0.0), f"{where}.offset")
    elif kind == "piecewise_linear":
        xs = _vec(spec.get("xs"), f"{where}.xs")
        ys = _vec(spec.get("ys"), f"{where}.ys", len(xs))
        _need(len(xs) >= 2, f"{where}.xs", "need two or more knots")
    else:
        raise ConfigError(f"{where}.kind", f"unknown boundary kind {kind!r}")


def _check_domain(d, where="domain"):
    _need(isinstance(d, dict), where, "expected a mapping")
    t = d.get("type")
    _need(t in DOMAIN_TYPES, f"{where}.type", f"unknown domain type {t!r}; known: {list(DOMAIN_TYPES)}")
    if t == "box":
        lo = _vec(d.get("lo"), f"{where}.lo")
        hi = _vec(d.get("hi"), f"{where}.hi", len(lo))
        _need(all(a < b for a, b in zip(lo, hi)), where, "need lo < hi")
    elif t in ("half_space", "epigraph"):
        if "lo" in d or "hi" in d:
            lo = _vec(d.get("lo"), f"{where}.lo")
            _vec(d.get("hi"), f"{where}.hi", len(lo))
        if t == "epigraph":
            _check_lipschitz(d.get("f"), f"{where}.f")
    elif t == "angular":
        _num(d.get("alpha"), f"{where}.alpha")
        _num(d.get("radius", 1.0), f"{where}.radius", positive=True)
    elif t == "polygon":
        v = d.get("vertices")
        _need(isinstance(v, list) and len(v) >= 3, f"{where}.vertices", "need three or more vertices")
        for i, p in enumerate(v):
            _vec(p, f"{where}.vertices[{i}]", 2)
    elif t == "scaled":
        _check_domain(d.get("base"), f"{where}.base")
        _num(d.get("tau"), f"{where}.tau", positive=True)
        if "center" in d:
            _vec(d["center"], f"{where}.center")


def _check_field(fs, where):
    _need(isinstance(fs, dict), where, "expected a mapping with 'name'")
    name = fs.get("name")
    _need(name in FIELD_LIBRARY, f"{where}.name", f"unknown field {name!r}; known: {sorted(FIELD_LIBRARY)}")
    _need(isinstance(fs.get("params", {}), dict), f"{where}.params", "expected a mapping")


def from_dict(raw, subcommand=None) -> ExperimentConfig:
    _need(isinstance(raw, dict), "config", "top level must be a mapping")
    extra = set(raw) - _KEYS
    _need(not extra, sorted(extra)[0] if extra else "", "unknown key")
    sub = subcommand or raw.get("subcommand")
    _need(sub in SUBCOMMANDS, "subcommand", f"unknown subcommand {sub!r}; known: {list(SUBCOMMANDS)}")
    cfg = ExperimentConfig(sub)
    if "domain" in raw:
        _check_domain(raw["domain"])
        cfg.domain = raw["domain"]
    fl = raw.get("fields", [])
    _need(isinstance(fl, list), "fields", "expected a list")
    for i, fs in enumerate(fl):
        _check_field(fs, f"fields[{i}]")
    cfg.fields = [{"name": f["name"], "params": dict(f.get("params", {}))} for f in fl]
    if "params" in raw:
        pr = raw["params"]
        _need(isinstance(pr, dict), "params", "expected a mapping")
        s = _num(pr.get("s"), "params.s")
        p = _num(pr.get("p"), "params.p")
        _need(0 < s < 1, "params.s", "must lie in (0, 1)")
        _need(p > 1, "params.p", "must exceed 1")
        cfg.params = {"s": s, "p": p}
    if "h" in raw:
        hs = raw["h"] if isinstance(raw["h"], list) else [raw["h"]]
        cfg.h = [_num(x, f"h[{i}]", positive=True) for i, x in enumerate(hs)]
    if "options" in raw:
        _need(isinstance(raw["options"], dict), "options", "expected a mapping")
        cfg.options = dict(raw["options"])
    if "seed" in raw:
        _need(isinstance(raw["seed"], int) and not isinstance(raw["seed"], bool), "seed", "expected an integer")
        cfg.seed = raw["seed"]
    if raw.get("out") is not None:
        _need(isinstance(raw["out"], str), "out", "expected a path")
        cfg.out = raw["out"]
    if "threads" in raw:
        t = raw["threads"]
        _need(isinstance(t, int) and not isinstance(t, bool) and t >= 1, "threads", "expected a positive integer")
        cfg.threads = t
    return cfg


def parse(text, subcommand=None) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark is not None else "config"
        raise ConfigError(where, getattr(exc, "problem", None) or str(exc)) from None
    if raw is None:
        raw = {}
    return from_dict(raw, subcommand)


def serialize(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)


# -- builders ------------------------------------------------------------------------

def build_lipschitz(spec):
    kind = spec.get("kind", "affine")
    if kind == "affine":
        return LipschitzFn.affine(spec.get("slope", [0.0]), spec.get("offset", 0.0))
    return LipschitzFn.piecewise_linear(spec["xs"], spec["ys"])


def build_domain(d):
    t = d["type"]
    if t == "unit_square":
        return Box.unit(2)
    if t == "box":
        return Box.from_bounds(d["lo"], d["hi"])
    if t == "half_space":
        return half_space(Box.from_bounds(d.get("lo", [0.0, 0.0]), d.get("hi", [1.0, 1.0])))
    if t == "epigraph":
        box = Box.from_bounds(d.get("lo", [0.0, 0.0]), d.get("hi", [1.0, 2.0]))
        return Epigraph(build_lipschitz(d["f"]), box)
    if t == "angular":
        return Angular(d["alpha"], d.get("radius", 1.0))
    if t == "polygon":
        return ConvexPolygon(d["vertices"])
    if t == "scaled":
        return scaled(build_domain(d["base"]), d["tau"], d.get("center"))
    raise ConfigError("domain.type", f"unknown domain type {t!r}")
