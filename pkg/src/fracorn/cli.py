"""Command-line harness: ``fracorn <subcommand> --config <path> [--out <path>] [--threads N]``.

Exit codes: 0 success, 2 configuration error, 3 numerical error, 4 acceptance failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import SUBCOMMANDS, ConfigError, ExperimentConfig, build_domain, build_lipschitz, parse
from .errors import FracornError
from .fields import field_library, make_basis
from .geometry import Angular, Box, Epigraph, build_whitney_cover, check_cover
from .quadrature import convergence_study, make_grid

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 2, 3, 4
RUNTIME_COLUMNS = ("runtime_s",)


@dataclass
class Report:
    rows: list = field(default_factory=list)

    def add(self, **row):
        self.rows.append(row)

    def columns(self):
        cols = []
        for r in self.rows:
            cols.extend(k for k in r if k not in cols)
        return cols

    def to_csv(self, drop_runtime=False):
        cols = [c for c in self.columns() if not (drop_runtime and c in RUNTIME_COLUMNS)]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in self.rows:
            w.writerow([_fmt(r.get(c, "")) for c in cols])
        return buf.getvalue()

    def to_json(self):
        return json.dumps({"columns": self.columns(), "rows": [{k: _jsonable(v) for k, v in r.items()}
                                                               for r in self.rows]}, indent=1)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _jsonable(v):
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else str(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


class NumericFailure(Exception):
    def __init__(self, operation, exc):
        super().__init__(f"{operation} failed: {type(exc).__name__}: {exc}")
        self.operation = operation


def _op(name, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except (FracornError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        raise NumericFailure(name, exc) from exc


def _params(cfg):
    from .seminorms import FracParams
    return FracParams(cfg.params["s"], cfg.params["p"], 2)


def _fields(cfg):
    fl = cfg.fields or [{"name": "identity", "params": {}}]
    return [(f["name"], field_library(f["name"], f["params"])) for f in fl]


def _timed(report, **row):
    t0 = time.perf_counter()
    fn = row.pop("_fn")
    out = fn()
    row.update(out)
    row["runtime_s"] = time.perf_counter() - t0
    report.add(**row)


# -- subcommands ----------------------------------------------------------------------

def cmd_seminorm(cfg, threads):
    from .seminorms import gagliardo, lp_norm, projected
    dom, P = build_domain(cfg.domain), _params(cfg)
    kinds = cfg.options.get("kinds", ["gagliardo", "projected", "lp"])
    rep = Report()
    for h in cfg.h:
        g = _op("make_grid", make_grid, dom, h)
        for name, u in _fields(cfg):
            for kind in kinds:
                if kind == "gagliardo":
                    fn = lambda: {"value": _op("gagliardo", gagliardo, u, g, P, threads=threads).value}
                elif kind == "projected":
                    fn = lambda: {"value": _op("projected", projected, u, g, P, threads=threads).value}
                elif kind == "lp":
                    fn = lambda: {"value": _op("lp_norm", lp_norm, u, g, P.p)}
                else:
                    raise ConfigError("options.kinds", f"unknown kind {kind!r}")
                _timed(rep, field=name, kind=kind, h=h, s=P.s, p=P.p, _fn=fn)
    return rep


def cmd_convergence(cfg, threads):
    from .seminorms import gagliardo, projected
    dom, P = build_domain(cfg.domain), _params(cfg)
    kind = cfg.options.get("kind", "projected")
    fn = {"gagliardo": gagliardo, "projected": projected}.get(kind)
    if fn is None:
        raise ConfigError("options.kind", f"unknown kind {kind!r}")
    name, u = _fields(cfg)[0]
    rep = Report()
    t0 = time.perf_counter()
    table = _op("convergence_study", convergence_study,
                lambda h: fn(u, make_grid(dom, h), P, threads=threads).raw_p_power, cfg.h)
    for h, v in zip(table.h, table.values):
        rep.add(field=name, kind=kind, row="h", h=h, value=v, order="", runtime_s="")
    rep.add(field=name, kind=kind, row="extrapolate", h=0.0, value=table.extrapolate, order=table.order,
            runtime_s=time.perf_counter() - t0)
    return rep


def cmd_extend(cfg, threads):
    from .extension import extension_norm_ratio, solve_coefficients
    P = _params(cfg)
    dom = build_domain(cfg.domain)
    if not isinstance(dom, (Epigraph, Angular)):
        raise ConfigError("domain.type", "extend needs an epigraph, half_space or angular domain")
    c2 = float(cfg.options.get("c2", 1.0))
    variant = cfg.options.get("delta_variant", "2+M")
    rep = Report()
    # optional M sweep: affine boundaries of slope M over the configured box
    sweep = cfg.options.get("sweep_M")
    doms = [(None, dom)]
    if sweep is not None and isinstance(dom, Epigraph):
        doms = [(M, Epigraph(build_lipschitz({"kind": "affine", "slope": [M]}), dom.box)) for M in sweep]
    for M, d in doms:
        if isinstance(d, Angular):
            c = solve_coefficients(abs(d.alpha), 2, c2, variant, alpha=d.alpha)
        else:
            c = solve_coefficients(d.f.M, 2, c2, variant)
        for h in cfg.h:
            for name, u in _fields(cfg):
                def fn():
                    r = _op("extension_norm_ratio", extension_norm_ratio, u, d, c, P, h, threads=threads)
                    row = {"ratio": r.ratio_X.value, "ratio_alt": r.ratio_X_alt.value,
                           "numerator": r.numerator, "denominator": r.denominator}
                    row.update({f"split_{k}": v for k, v in r.split.items()})
                    return row
                _timed(rep, field=name, M=c.M if M is None else M, delta=c.delta, h=h, _fn=fn)
    return rep


def cmd_korn(cfg, threads):
    from .korn import (assemble_gram, basis_indices_for_degree, estimate_korn1_constant,
                       estimate_korn2_constant, korn_poincare_constant, random_search_korn2)
    dom, P = build_domain(cfg.domain), _params(cfg)
    degrees = cfg.options.get("degrees", [2, 3])
    method = cfg.options.get("method", "eig" if P.p == 2 else "random")
    rep = Report()
    for h in cfg.h:
        g = _op("make_grid", make_grid, dom, h)
        if method == "eig":
            t0 = time.perf_counter()
            b = make_basis(dom, max(degrees))
            G = _op("assemble_gram", assemble_gram, b, g, P, threads=threads)
            t_gram = time.perf_counter() - t0
            prev = None
            for K in degrees:
                GK = G.restrict(basis_indices_for_degree(b, K))
                for est_fn in (estimate_korn2_constant, estimate_korn1_constant, korn_poincare_constant):
                    t1 = time.perf_counter()
                    e = _op(est_fn.__name__, est_fn, GK)
                    rep.add(name=e.name, K=K, h=h, method=e.method, value=e.value,
                            lower_bound=False, runtime_s=t_gram + time.perf_counter() - t1)
        elif method == "random":
            for K in degrees:
                t0 = time.perf_counter()
                e = _op("random_search_korn2", random_search_korn2, make_basis(dom, K), g, P,
                        samples=int(cfg.options.get("samples", 20)), seed=cfg.seed, threads=threads)
                rep.add(name=e.name, K=K, h=h, method=e.method, value=e.value, lower_bound=True,
                        runtime_s=time.perf_counter() - t0)
        else:
            raise ConfigError("options.method", f"unknown method {method!r}")
    return rep


def cmd_hardy(cfg, threads):
    from .extension import solve_coefficients
    from .seminorms import hardy_ratio
    P = _params(cfg)
    dom = build_domain(cfg.domain)
    if not isinstance(dom, Epigraph):
        raise ConfigError("domain.type", "hardy needs an epigraph or half_space domain")
    c = solve_coefficients(dom.f.M, 2, float(cfg.options.get("c2", 1.0)))
    lam = float(cfg.options.get("lam", c.lam))
    mu = float(cfg.options.get("mu", c.mu))
    rep = Report()
    for h in cfg.h:
        g = _op("make_grid", make_grid, dom, h)
        for name, u in _fields(cfg):
            def fn():
                r = _op("hardy_ratio", hardy_ratio, u, dom.f, lam, mu, g, P, threads=threads)
                return {"ratio": r.value, "lhs": r.numerator, "seminorm_p": r.denominator,
                        "excluded": r.excluded}
            _timed(rep, field=name, lam=lam, mu=mu, h=h, _fn=fn)
    return rep


def cmd_cover(cfg, threads):
    dom = build_domain(cfg.domain)
    rep = Report()
    t0 = time.perf_counter()
    cov = _op("build_whitney_cover", build_whitney_cover, dom,
              min_generation=int(cfg.options.get("min_generation", -6)), seed=cfg.seed)
    r = _op("check_cover", check_cover, cov, int(cfg.options.get("samples_per_cell", 100)), cfg.seed + 1)
    rep.add(cells=len(cov), c1=cov.c1, c2=cov.c2, disjoint=r.disjoint, doubled_inside=r.doubled_inside,
            lower_ok=r.lower_ok, upper_ok=r.upper_ok, min_lower_slack=r.min_lower_slack,
            min_upper_slack=r.min_upper_slack, runtime_s=time.perf_counter() - t0)
    return rep


def cmd_perisolve(cfg, threads):
    from .korn import solve_peridynamic
    dom = build_domain(cfg.domain)
    s = cfg.params["s"]
    o = cfg.options.get("omega", {"lo": [0.0, 0.0], "hi": [0.1, 1.0]})
    omega = Box.from_bounds(o["lo"], o["hi"])
    load = field_library("constant", {"value": cfg.options.get("load", [1.0, 0.0])})
    K = int(cfg.options.get("degree", 2))
    ell = float(cfg.options.get("ell", 0.1))
    rep = Report()
    for h in cfg.h:
        t0 = time.perf_counter()
        g = _op("make_grid", make_grid, dom, h)
        sol = _op("solve_peridynamic", solve_peridynamic, load, omega, make_basis(dom, K), g, s, ell,
                  threads=threads)
        rep.add(h=h, K=K, s=s, energy=sol.energy(), residual=sol.residual,
                coeff_norm=float(np.linalg.norm(sol.coeffs)), runtime_s=time.perf_counter() - t0)
    return rep


def cmd_probe(cfg, threads):
    """|u|_W / [u]_X for swirls of shrinking width; growth signals the ps < 1 obstruction."""
    from .seminorms import gagliardo, projected
    dom, P = build_domain(cfg.domain), _params(cfg)
    scales = cfg.options.get("scales", [0.2, 0.1, 0.05])
    rep = Report()
    for h in cfg.h:
        g = _op("make_grid", make_grid, dom, h)
        for sc in scales:
            u = field_library("concentrated", {"scale": sc})

            def fn():
                w = _op("gagliardo", gagliardo, u, g, P, threads=threads).value
                x = _op("projected", projected, u, g, P, threads=threads).value
                return {"W": w, "X": x, "ratio": w / x if x > 0 else math.inf}
            _timed(rep, scale=sc, h=h, ps=P.ps, _fn=fn)
    return rep


def cmd_acceptance(cfg, threads, echo=print):
    from .acceptance import SuiteContext, run_suite
    ids = cfg.options.get("criteria")
    res = run_suite(ids, SuiteContext(threads=threads), echo=echo)
    rep = Report()
    for r in res:
        rep.add(id=r.id, name=r.name, passed=r.passed, measured=r.measured, required=r.required,
                runtime_s=r.runtime)
    return rep


COMMANDS = {
    "seminorm": cmd_seminorm, "extend": cmd_extend, "korn-constant": cmd_korn, "hardy": cmd_hardy,
    "cover": cmd_cover, "convergence": cmd_convergence, "perisolve": cmd_perisolve,
    "probe-ps-lt-1": cmd_probe, "acceptance": cmd_acceptance,
}


def resolve_threads(flag, cfg: ExperimentConfig):
    if flag is not None:
        return flag
    env = os.environ.get("FRACORN_THREADS")
    if env:
        try:
            t = int(env)
        except ValueError:
            raise ConfigError("FRACORN_THREADS", f"expected a positive integer, got {env!r}") from None
        if t < 1:
            raise ConfigError("FRACORN_THREADS", "must be positive")
        return t
    return cfg.threads


def run(cfg: ExperimentConfig, threads=1) -> Report:
    return COMMANDS[cfg.subcommand](cfg, threads)


def write_report(rep: Report, out):
    base, ext = os.path.splitext(out)
    if ext.lower() == ".json":
        base = base or out
    with open(base + ".csv", "w", newline="") as fh:
        fh.write(rep.to_csv())
    with open(base + ".json", "w") as fh:
        fh.write(rep.to_json())
    return base + ".csv", base + ".json"


def main(argv=None):
    ap = argparse.ArgumentParser(prog="fracorn", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="YAML experiment file (optional for acceptance)")
    ap.add_argument("--out", help="report path; writes <out>.csv and <out>.json")
    ap.add_argument("--threads", type=int, help="worker threads (overrides FRACORN_THREADS and the config)")
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.config is None:
            if args.subcommand != "acceptance":
                raise ConfigError("--config", "required for this subcommand")
            cfg = ExperimentConfig("acceptance")
        else:
            try:
                with open(args.config) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError("--config", str(exc)) from None
            cfg = parse(text, args.subcommand)
        threads = resolve_threads(args.threads, cfg)
        if threads < 1:
            raise ConfigError("--threads", "must be positive")
        rep = run(cfg, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailure as exc:
        print(f"numerical error in {exc.operation}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out = args.out or cfg.out
    if out:
        write_report(rep, out)
    if args.subcommand != "acceptance":
        sys.stdout.write(rep.to_csv())
    else:
        failed = [r for r in rep.rows if not r["passed"]]
        print(f"{len(rep.rows) - len(failed)}/{len(rep.rows)} criteria passed")
        if failed:
            return EXIT_ACCEPTANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
