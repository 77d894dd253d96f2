"""The fifteen acceptance criteria as runnable checks.

Each check returns a :class:`CriterionResult` with the measured quantity, the
required bound and the wall time. ``run_suite`` runs a selection and is used by
both the test suite and ``fracorn acceptance``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .extension import (extend_angular, extend_epigraph, extension_norm_ratio, mixed_identity_residuals,
                        mixed_identity_terms, solve_coefficients, window_grids)
from .fields import field_library, make_basis, random_rigid
from .geometry import (Angular, Box, Epigraph, LipschitzFn, TransformedDomain, build_whitney_cover,
                       check_cover, half_space, rotation_2d, scaled)
from .korn import (assemble_gram, basis_indices_for_degree, estimate_korn1_constant,
                   estimate_korn2_constant, fit_power, korn_poincare_constant, rigid_project_seminorm,
                   sampled_ratios, solve_peridynamic)
from .quadrature import make_grid
from .seminorms import (FracParams, gagliardo, hardy_lhs, hardy_ratio, lemma_a2_profile, loglog_slope,
                        lp_raw, perienergy, projected)


@dataclass
class CriterionResult:
    id: int
    name: str
    passed: bool
    measured: str
    required: str
    runtime: float = 0.0
    details: dict = field(default_factory=dict)

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return (f"[{tag}] {self.id:2d} {self.name}: measured {self.measured}; "
                f"required {self.required} ({self.runtime:.1f} s)")


@dataclass
class SuiteContext:
    threads: int = 1
    # replaced entries for the extension coefficients (sabotage hook)
    coeff_override: dict = field(default_factory=dict)
    _grams: dict = field(default_factory=dict)

    def gram(self, s, p, h, K):
        key = (s, p, h, K)
        if key not in self._grams:
            g = make_grid(Box.unit(2), h)
            b = make_basis(Box.unit(2), K)
            self._grams[key] = assemble_gram(b, g, FracParams(s, p), threads=self.threads)
        return self._grams[key]

    def coeffs(self, *args, **kw):
        c = solve_coefficients(*args, **kw)
        return c.with_(**self.coeff_override) if self.coeff_override else c


def _unit_grid(h):
    return make_grid(Box.unit(2), h)


def _test_fields():
    out = [field_library("identity"), field_library("shear"), field_library("bump_gradient"),
           field_library("trig", {"mode": (1, 2), "component": 1}),
           field_library("component_power", {"component": 1, "axis": 1, "power": 2.0}),
           field_library("concentrated", {"scale": 0.2})]
    out += [field_library("random_trig", {"seed": k, "degree": 3}) for k in range(4)]
    return out


# -- criteria ---------------------------------------------------------------------------

def c01_rigid_kernel(ctx):
    g = _unit_grid(1 / 16)
    P = FracParams(0.5, 2.0)
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(20):
        r = random_rigid(2, rng)
        w = gagliardo(r, g, P, threads=ctx.threads).value
        if not w > 0:
            return False, f"|r|_W = {w}", "|r|_W > 0", {}
        worst = max(worst, projected(r, g, P, threads=ctx.threads).value / w)
    return worst < 1e-8, f"max [r]_X/|r|_W = {worst:.3g}", "< 1e-8", {"max_ratio": worst}


def c02_identity_equality(ctx):
    u = field_library("identity")
    worst = 0.0
    for h in (1 / 8, 1 / 16, 1 / 32):
        g = _unit_grid(h)
        for sp in ((0.5, 2.0), (0.3, 3.0)):
            P = FracParams(*sp)
            w = gagliardo(u, g, P, threads=ctx.threads).value
            x = projected(u, g, P, threads=ctx.threads).value
            worst = max(worst, abs(w - x) / w)
    return worst < 1e-12, f"max rel gap = {worst:.3g}", "< 1e-12", {"max_rel": worst}


def c03_projected_le_gagliardo(ctx):
    g = _unit_grid(1 / 16)
    fields = _test_fields() + [field_library("random_trig", {"seed": 100 + k, "degree": 4, "decay": 0.5})
                               for k in range(40)]
    fields = fields[:50]
    params = [FracParams(0.5, 2.0), FracParams(0.3, 2.0), FracParams(0.7, 3.0)]
    bad, margin = 0, math.inf
    for i, u in enumerate(fields):
        P = params[i % 3]
        w = gagliardo(u, g, P, threads=ctx.threads).raw_p_power
        x = projected(u, g, P, threads=ctx.threads).raw_p_power
        bad += x > w
        margin = min(margin, w - x)
    return bad == 0, f"{bad} violations in {len(fields)} fields", "0 violations", {"min_gap": margin}


def c04_coefficients(ctx):
    rng = np.random.default_rng(404)
    worst = 0.0
    for M in rng.uniform(0, 5, 100):
        worst = max(worst, ctx.coeffs(M).max_residual())
    c = ctx.coeffs(1.0, delta=0.5)
    hand = (c.k, c.l, c.m, c.q) == (2.5, -1.5, -1.25, 2.25)
    ok = worst < 1e-14 and hand
    return ok, f"max residual {worst:.3g}, hand case {(c.k, c.l, c.m, c.q)}", \
        "< 1e-14 and (2.5, -1.5, -1.25, 2.25) exactly", {"max_residual": worst}


def c05_extension_consistency(ctx):
    rng = np.random.default_rng(505)
    f_list = [LipschitzFn.affine([0.5], 0.0), LipschitzFn.piecewise_linear([-2, 0, 0.5, 2], [0.0, 0.4, -0.1, 0.2])]
    fields = [field_library("shear"), field_library("trig", {"mode": (1, 1), "component": 1}),
              field_library("random_trig", {"seed": 3})]
    on_D, const, bdry = 0.0, 0.0, 0.0
    for f in f_list:
        c = ctx.coeffs(f.M)
        x1 = rng.uniform(-1, 1, 2000)
        above = np.column_stack([x1, f(x1) + rng.uniform(0, 1, 2000)])
        near = np.column_stack([x1, f(x1) - 1e-6])
        on = np.column_stack([x1, f(x1)])
        for u in fields:
            on_D = max(on_D, float(np.max(np.abs(extend_epigraph(u, f, c, above) - u(above)))))
            bdry = max(bdry, float(np.max(np.abs(extend_epigraph(u, f, c, near) - u(on)))))
        cu = field_library("constant", {"value": [1.5, -0.75]})
        Ec = extend_epigraph(cu, f, c, near)
        const = max(const, float(np.max(np.abs(Ec - cu(near)))))
    ang = 0.0
    for alpha in (0.5, 1.0, 2.0):
        c = ctx.coeffs(alpha, alpha=alpha)
        f = LipschitzFn.affine([alpha], 0.0)
        X = np.column_stack([rng.uniform(0, 1, 2000), rng.uniform(-3, 3, 2000)])
        u = field_library("trig", {"mode": (2, 1), "component": 0})
        ang = max(ang, float(np.max(np.abs(extend_angular(u, alpha, c, X) - extend_epigraph(u, f, c, X)))))
    ok = on_D < 1e-15 and const < 1e-13 and bdry < 1e-5 and ang < 1e-14
    return ok, (f"on D {on_D:.3g}, constants {const:.3g}, boundary {bdry:.3g}, wedge vs epigraph {ang:.3g}"), \
        "1e-15, 1e-13, 1e-5, 1e-14", {"on_D": on_D, "constants": const, "boundary": bdry, "angular": ang}


def c06_mixed_identity(ctx):
    rng = np.random.default_rng(606)
    worst_full = worst_cancel = 0.0
    for f in (LipschitzFn.affine([0.5], 0.0), LipschitzFn.piecewise_linear([-2, 0, 2], [0.3, -0.2, 0.4])):
        c = ctx.coeffs(f.M)
        x1, y1 = rng.uniform(-1, 1, 10_000), rng.uniform(-1, 1, 10_000)
        X = np.column_stack([x1, f(x1) - rng.uniform(1e-3, 1, 10_000)])
        Y = np.column_stack([y1, f(y1) + rng.uniform(0, 1, 10_000)])
        terms = mixed_identity_terms(field_library("random_trig", {"seed": 6}), f, c, X, Y)
        a, b = mixed_identity_residuals(terms)
        worst_full, worst_cancel = max(worst_full, a), max(worst_cancel, b)
    ok = worst_full < 1e-12 and worst_cancel < 1e-12
    return ok, f"full {worst_full:.3g}, cancellation {worst_cancel:.3g}", "< 1e-12", \
        {"full": worst_full, "cancel": worst_cancel}


def _hardy_fields():
    return [field_library("identity"), field_library("bump_gradient"),
            field_library("component_power", {"component": 1, "axis": 1, "power": 2.0}),
            field_library("component_power", {"component": 1, "axis": 0, "power": 2.0}),
            field_library("trig", {"mode": (1, 1), "component": 1}),
            field_library("trig", {"mode": (0, 2), "component": 1})] + \
        [field_library("random_trig", {"seed": k, "degree": 2}) for k in range(4)]


def c07_hardy(ctx):
    f = LipschitzFn.constant(0.0)
    c = ctx.coeffs(0.0)
    dom = half_space(Box.from_bounds([0, 0], [1, 1]))
    g1, g2 = make_grid(dom, 1 / 16), make_grid(dom, 1 / 32)
    P = FracParams(0.5, 2.0)
    rng = np.random.default_rng(707)
    kill = 0.0
    for _ in range(5):
        r = random_rigid(2, rng)
        kill = max(kill, hardy_lhs(r, f, c.lam, c.mu, g1, P) / lp_raw(r, g1, 2.0))
    worst, finite = 0.0, True
    ratios = {}
    for sp in ((0.5, 2.0), (0.3, 2.0), (0.7, 3.0)):
        P = FracParams(*sp)
        for i, u in enumerate(_hardy_fields()):
            a = hardy_ratio(u, f, c.lam, c.mu, g1, P, threads=ctx.threads)
            b = hardy_ratio(u, f, c.lam, c.mu, g2, P, threads=ctx.threads)
            finite &= not (a.excluded or b.excluded) and math.isfinite(a.value) and math.isfinite(b.value)
            rel = abs(b.value - a.value) / abs(a.value) if a.value else 0.0
            ratios[(sp, i)] = (a.value, b.value)
            worst = max(worst, rel)
    ok = kill < 1e-10 and finite and worst < 0.15
    return ok, f"rigid lhs/scale {kill:.3g}, max change h->h/2 {worst:.3f}", \
        "< 1e-10 and finite ratios within 15%", {"rigid": kill, "max_change": worst}


def c08_whitney(ctx):
    doms = [("f=0", half_space(Box.from_bounds([0, 0], [1, 1]))),
            ("f=0.5x", Epigraph(LipschitzFn.affine([0.5], 0.0), Box.from_bounds([0, 0], [1, 1.5])))]
    doms += [(f"alpha={a}", Angular(a, 1.0)) for a in (0.5, 1.0, 2.0)]
    ok, parts = True, []
    for name, d in doms:
        cov = build_whitney_cover(d)
        rep = check_cover(cov, samples_per_cell=100)
        good = rep.ok and cov.c1 <= 12
        ok &= good
        parts.append(f"{name}: c1={cov.c1}, c2={cov.c2:.3g}{'' if good else ' FAILED'}")
    return ok, "; ".join(parts), "disjoint, doubled inside, bounds hold, c1 <= 12", {}


def c09_scaling(ctx):
    taus = (0.5, 1.0, 2.0)
    P = FracParams(0.5, 2.0)
    expo = P.n - P.s * P.p
    worst = 0.0
    for u in (field_library("shear"), field_library("random_trig", {"seed": 9})):
        base = {}
        for tau in taus:
            dom = scaled(Box.unit(2), tau)
            g = make_grid(dom, tau / 16)
            ut = u.dilated(tau)
            for kind, fn in (("W", gagliardo), ("X", projected)):
                v = fn(ut, g, P, threads=ctx.threads).raw_p_power
                if tau == 1.0:
                    base[kind] = v
                base.setdefault(("vals", kind), []).append(v)
        for kind in ("W", "X"):
            for tau, v in zip(taus, base[("vals", kind)]):
                worst = max(worst, abs(v / (base[kind] * tau ** expo) - 1))
    vals = []
    for tau in taus:
        dom = scaled(Box.unit(2), tau)
        G = assemble_gram(make_basis(dom, 3), make_grid(dom, tau / 16), P, threads=ctx.threads)
        vals.append(korn_poincare_constant(G).value)
    slope = fit_power(taus, vals)
    ok = worst < 0.02 and abs(slope - P.s) <= 0.1
    return ok, f"max rel dev of p-powers {worst:.3g}, Korn-Poincare exponent {slope:.4f}", \
        f"< 0.02 and |exponent - {P.s}| <= 0.1", {"max_dev": worst, "slope": slope}


def c10_lemma_a2(ctx):
    f = LipschitzFn.constant(0.0)
    c = ctx.coeffs(0.0)
    zs = np.array([[0.0, d] for d in np.geomspace(1e-3, 1e-1, 7)])
    ok, parts, slopes = True, [], {}
    for sp in ((0.3, 2.0), (0.5, 2.0), (0.7, 3.0)):
        P = FracParams(*sp)
        prof = lemma_a2_profile(f, c.lam, P, zs)
        d, I = zip(*prof)
        sl = loglog_slope(d, I)
        slopes[sp] = sl
        ok &= abs(sl + P.ps) <= 0.15
        parts.append(f"{sp}: {sl:.4f} (target {-P.ps:.2f})")
    return ok, "; ".join(parts), "within 0.15 of -ps", {"slopes": slopes}


def c11_korn2(ctx):
    ok, parts = True, []
    for sp in ((0.5, 2.0), (0.3, 2.0)):
        G1 = ctx.gram(*sp, 1 / 32, 4)
        G2 = ctx.gram(*sp, 1 / 64, 4)
        est = [estimate_korn2_constant(G1.restrict(basis_indices_for_degree(G1.basis, K))).value
               for K in (2, 3, 4)]
        mono = all(b >= a for a, b in zip(est, est[1:]))
        top = estimate_korn2_constant(G1)
        samp = sampled_ratios(G1.G_W, G1.G_X + G1.M_L2, 1000, seed=11).max()
        fine = estimate_korn2_constant(G2).value
        change = abs(fine - top.value) / top.value
        good = mono and samp <= top.value + 1e-8 and change < 0.10
        ok &= good
        parts.append(f"{sp}: C2(K=2,3,4)={[round(e, 4) for e in est]}, sampled max {samp:.4f}, "
                     f"h/2 change {change:.4f}")
    return ok, "; ".join(parts), "eig >= samples, nondecreasing in K, change < 10%", {}


def c12_korn1(ctx):
    P = FracParams(0.5, 2.0)
    g = _unit_grid(1 / 16)
    G = ctx.gram(0.5, 2.0, 1 / 16, 3)
    est = estimate_korn1_constant(G)
    u = G.basis.field(est.meta["vector"])
    _, w = rigid_project_seminorm(u, g, P, threads=ctx.threads)
    x = projected(u, g, P, threads=ctx.threads).raw_p_power
    rel = abs(w * w / x - est.value) / est.value
    ok = math.isfinite(est.value) and rel < 1e-8
    return ok, f"C1 = {est.value:.6g}, direct quotient rel gap {rel:.3g}", "finite, < 1e-8", \
        {"C1": est.value, "rel": rel}


def c13_invariance(ctx):
    rng = np.random.default_rng(1313)
    P = FracParams(0.5, 2.0)
    base = Box.unit(2)
    g0 = make_grid(base, 1 / 16)
    worst = 0.0
    for u in (field_library("shear"), field_library("random_trig", {"seed": 13})):
        ref = projected(u, g0, P, threads=ctx.threads).value
        for _ in range(5):
            R = rotation_2d(rng.uniform(0, 2 * np.pi))
            t = rng.uniform(-3, 3, 2)
            g = make_grid(TransformedDomain(base, R, t), 1 / 16)
            v = projected(u.transformed(R, t), g, P, threads=ctx.threads).value
            worst = max(worst, abs(v - ref) / ref)
    return worst < 1e-10, f"max rel change {worst:.3g}", "< 1e-10", {"max_rel": worst}


def c14_peridynamics(ctx):
    g = _unit_grid(1 / 16)
    worst = 0.0
    for u in (field_library("shear"), field_library("random_trig", {"seed": 14}), field_library("identity")):
        for s in (0.3, 0.5, 0.8):
            w = perienergy(u, g, s, threads=ctx.threads)
            x = projected(u, g, FracParams(s, 2.0), threads=ctx.threads).raw_p_power
            worst = max(worst, abs(w - x) / x)
    omega = Box.from_bounds([0.0, 0.0], [0.1, 1.0])
    fext = field_library("constant", {"value": [1.0, 0.0]})
    sol = solve_peridynamic(fext, omega, make_basis(Box.unit(2), 2), g, 0.5, threads=ctx.threads)
    rng = np.random.default_rng(1414)
    e0 = sol.energy()
    lower = all(sol.energy(sol.coeffs + 1e-2 * rng.standard_normal(sol.coeffs.size)) > e0
                for _ in range(100))
    ok = worst < 1e-12 and sol.residual < 1e-10 and lower
    return ok, f"identity rel gap {worst:.3g}, solve residual {sol.residual:.3g}, minimal vs 100: {lower}", \
        "< 1e-12, < 1e-10, True", {"identity": worst, "residual": sol.residual}


def _determinism_values(threads):
    out = []
    g = _unit_grid(1 / 16)
    for sp in ((0.5, 2.0), (0.3, 3.0)):
        P = FracParams(*sp)
        for u in _test_fields()[:4]:
            out.append(gagliardo(u, g, P, threads=threads).raw_p_power)
            out.append(projected(u, g, P, threads=threads).raw_p_power)
            out.append(projected(u, g, P, form="unnormalized", threads=threads).raw_p_power)
    out.append(perienergy(field_library("shear"), g, 0.4, threads=threads))
    G = assemble_gram(make_basis(Box.unit(2), 2), g, FracParams(0.5, 2.0), threads=threads)
    out.extend([G.G_W, G.G_X])
    c = solve_coefficients(0.5)
    dom = Epigraph(LipschitzFn.affine([0.5], 0.0), Box.from_bounds([0, 0], [1, 1.5]))
    rep = extension_norm_ratio(field_library("shear"), dom, c, FracParams(0.5, 2.0),
                               grids=window_grids(dom, c, 1 / 8), threads=threads)
    out.extend(list(rep.split.values()) + [rep.numerator])
    return np.concatenate([np.atleast_1d(np.asarray(v, float)).ravel() for v in out])


def c15_determinism(ctx):
    a = _determinism_values(1)
    b = _determinism_values(8)
    same = a.tobytes() == b.tobytes()
    return same, f"{a.size} values, byte-identical: {same}", "byte-identical for threads 1 and 8", {}


CRITERIA: list[tuple[int, str, Callable]] = [
    (1, "rigid kernel", c01_rigid_kernel),
    (2, "identity-field equality", c02_identity_equality),
    (3, "projected <= Gagliardo", c03_projected_le_gagliardo),
    (4, "coefficient constraints", c04_coefficients),
    (5, "extension consistency", c05_extension_consistency),
    (6, "mixed-term cancellation", c06_mixed_identity),
    (7, "Hardy rigid-kill and stability", c07_hardy),
    (8, "Whitney invariants", c08_whitney),
    (9, "scaling laws", c09_scaling),
    (10, "boundary-distance exponent", c10_lemma_a2),
    (11, "Korn-2 estimates", c11_korn2),
    (12, "Korn-1 estimates", c12_korn1),
    (13, "isometry invariance", c13_invariance),
    (14, "peridynamic identity and solve", c14_peridynamics),
    (15, "determinism", c15_determinism),
]


def run_criterion(cid, ctx: Optional[SuiteContext] = None) -> CriterionResult:
    ctx = ctx or SuiteContext()
    _, name, fn = next(c for c in CRITERIA if c[0] == cid)
    t0 = time.perf_counter()
    try:
        ok, measured, required, details = fn(ctx)
    except Exception as exc:  # a crash is a failure with the reason recorded
        ok, measured, required, details = False, f"{type(exc).__name__}: {exc}", "no error", {}
    return CriterionResult(cid, name, bool(ok), measured, required, time.perf_counter() - t0, details)


def run_suite(ids=None, ctx: Optional[SuiteContext] = None, echo=print):
    ctx = ctx or SuiteContext()
    out = []
    for cid, _, _ in CRITERIA:
        if ids is not None and cid not in ids:
            continue
        res = run_criterion(cid, ctx)
        if echo:
            echo(res.line())
        out.append(res)
    return out
