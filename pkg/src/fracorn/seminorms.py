"""Scalar functionals: Gagliardo and projected seminorms, Lᵖ norms, the Hardy-type
integral, the peridynamic energy, the localization product ratio and the
boundary-distance integral I(z)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, InvalidInputError, ParameterError
from .geometry.lipschitz import LipschitzFn
from .geometry.maps import PhiMap
from .quadrature import Grid, PairKernelSpec, cell_integral, double_integral

ZERO_GUARD = 1e-14


@dataclass(frozen=True)
class FracParams:
    s: float
    p: float
    n: int = 2

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise ParameterError(f"s must lie in (0, 1), got {self.s}")
        if not 1 < self.p < math.inf:
            raise ParameterError(f"p must lie in (1, inf), got {self.p}")
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError("n must be a positive integer")

    @property
    def ps(self):
        return self.s * self.p

    @property
    def regime(self):
        ps = self.ps
        if math.isclose(ps, 1.0, rel_tol=0, abs_tol=1e-12):
            return "ps=1"
        return "ps<1" if ps < 1 else "ps>1"


@dataclass(frozen=True)
class SeminormResult:
    value: float
    raw_p_power: float
    h: float
    params: FracParams
    kind: str = ""

    def __float__(self):
        return self.value


def _result(raw, grid, params, kind):
    raw = float(raw)
    if raw < 0:
        # only round-off can make a sum of nonnegative terms negative
        raw = 0.0
    return SeminormResult(raw ** (1.0 / params.p), raw, grid.h, params, kind)


def _diff_norm(FX, FY):
    D = FY - FX
    return D, np.sqrt(np.sum(D * D, axis=1))


def _pow(x, p):
    return x * x if p == 2 else x ** p


def gagliardo_numerator(p):
    def g(X, Y, FX, FY):
        _, nd = _diff_norm(FX, FY)
        return _pow(nd, p)
    return g


def projected_numerator(p):
    """|Δu|·|cos θ| raised to p, with cos θ the angle between Δu and y - x.

    Writing it this way makes projected <= gagliardo hold term by term in
    floating point.
    """
    def g(X, Y, FX, FY):
        D, nd = _diff_norm(FX, FY)
        E = Y - X
        r = np.sqrt(np.sum(E * E, axis=1))
        dot = np.sum(D * E, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = np.where(nd > 0, dot / (nd * r), 0.0)
        return _pow(nd * np.abs(np.clip(cos, -1.0, 1.0)), p)
    return g


def projected_numerator_unnormalized(p):
    def g(X, Y, FX, FY):
        return _pow(np.abs(np.sum((FY - FX) * (Y - X), axis=1)), p)
    return g


def _field_fn(u):
    return lambda X: u(X)


def gagliardo(u, grid: Grid, params: FracParams, threads=1, depth=None, adj_depth=2):
    spec = PairKernelSpec(params.ps, gagliardo_numerator(params.p), _field_fn(u),
                          depth=depth, adj_depth=adj_depth)
    return _result(double_integral(grid, grid, spec, threads), grid, params, "gagliardo")


def projected(u, grid: Grid, params: FracParams, form="normalized", threads=1, depth=None,
              adj_depth=2):
    """[u]_X on the grid's domain.

    ``form="normalized"`` integrates |Δu·e|^p / |x-y|^(n+ps) with e the unit bond;
    ``form="unnormalized"`` integrates |Δu·(y-x)|^p / |x-y|^(n+(s+1)p).
    """
    if form == "normalized":
        spec = PairKernelSpec(params.ps, projected_numerator(params.p), _field_fn(u),
                              depth=depth, adj_depth=adj_depth)
    elif form == "unnormalized":
        spec = PairKernelSpec((params.s + 1) * params.p, projected_numerator_unnormalized(params.p),
                              _field_fn(u), depth=depth, adj_depth=adj_depth)
    else:
        raise InvalidInputError(f"unknown form {form!r}")
    return _result(double_integral(grid, grid, spec, threads), grid, params, f"projected:{form}")


def lp_norm(u, grid: Grid, p):
    if not p > 0:
        raise ParameterError("p must be positive")
    raw = cell_integral(grid, lambda X: np.sum(u(X) ** 2, axis=1) ** (p / 2))
    return raw ** (1.0 / p)


def lp_raw(u, grid: Grid, p):
    return cell_integral(grid, lambda X: np.sum(u(X) ** 2, axis=1) ** (p / 2))


# -- Hardy-type integral ------------------------------------------------------------

def _graph_points(f: LipschitzFn, X):
    xp = X[:, 0] if X.shape[1] == 2 else X[:, :-1]
    return f(xp)


def hardy_lhs(u, f: LipschitzFn, lam, mu, grid: Grid, params: FracParams, field_window=None,
              max_retries=3):
    """∫_D |u_n(Φ*_λ x) - u_n(Φ*_μ x)|^p / |x_n - f(x')|^{ps} dx, cell-weighted.

    ``u`` is a field, or a factory ``window -> field`` for fields that only
    exist on a box. With a factory, composed points leaving ``field_window``
    (default: the grid's bounding box) double the window height, at most
    ``max_retries`` times, before a domain error is raised.
    """
    if not (lam > 0 and mu > 0):
        raise ParameterError("lambda and mu must be positive")
    X = grid.centers
    fx = _graph_points(f, X)
    t = X[:, -1] - fx
    if np.any(t <= 0):
        raise DomainError("hardy_lhs needs a grid strictly above the graph")
    A = X.copy()
    B = X.copy()
    A[:, -1] = PhiMap(f, lam, "graph")(X)[:, -1]
    B[:, -1] = PhiMap(f, mu, "graph")(X)[:, -1]
    if callable(u) and not hasattr(u, "n"):
        lo, hi = grid.domain.bbox() if field_window is None else field_window
        lo, hi = np.array(lo, float), np.array(hi, float)
        for _ in range(max_retries + 1):
            pts = np.concatenate([A, B])
            if np.all((pts >= lo - 1e-12) & (pts <= hi + 1e-12)):
                break
            hi[-1] = lo[-1] + 2 * (hi[-1] - lo[-1])
        else:
            raise DomainError("composed points leave the field window after enlargement")
        u = u((lo, hi))
    ua = u(A)[:, -1]
    ub = u(B)[:, -1]
    vals = np.abs(ua - ub) ** params.p / t ** params.ps
    return math.fsum(grid.volumes * vals)


@dataclass(frozen=True)
class GuardedRatio:
    value: float
    numerator: float
    denominator: float
    excluded: bool

    def __float__(self):
        return self.value


def guarded_ratio(num, den):
    if den < ZERO_GUARD:
        return GuardedRatio(math.inf, float(num), float(den), True)
    return GuardedRatio(float(num) / float(den), float(num), float(den), False)


def hardy_ratio(u, f, lam, mu, grid, params, threads=1, denominator_grid=None):
    """hardy_lhs / [u]_X^p; flagged as excluded when [u]_X^p < 1e-14."""
    lhs = hardy_lhs(u, f, lam, mu, grid, params)
    g = grid if denominator_grid is None else denominator_grid
    den = projected(u, g, params, threads=threads).raw_p_power
    return guarded_ratio(lhs, den)


# -- peridynamic energy -------------------------------------------------------------

def perienergy(u, grid: Grid, s, threads=1, depth=None, adj_depth=2):
    """W_ρ(u) with ρ(ξ) = |ξ|^(-n-2(s-1)), evaluated with the weight inside the integrand."""
    n = grid.n
    if not 0 < s < 1:
        raise ParameterError("s must lie in (0, 1)")

    def g(X, Y, FX, FY):
        xi = Y - X
        r2 = np.sum(xi * xi, axis=1)
        rho = r2 ** (-(n + 2 * (s - 1)) / 2)
        strain = np.sum((FY - FX) * xi, axis=1) / r2
        return rho * strain * strain

    spec = PairKernelSpec(-float(n), g, _field_fn(u), depth=depth, adj_depth=adj_depth)
    return float(double_integral(grid, grid, spec, threads))


# -- localization product ----------------------------------------------------------

def product_ratio(psi, u, grid: Grid, params: FracParams, grid_tilde: Optional[Grid] = None,
                  w1inf=None, threads=1):
    """[ψu]_X(Ω̃) / (‖ψ‖_{W^{1,∞}} (‖u‖_{L^p} + [u]_X)); ψu is extended by zero."""
    from .fields import ProductField

    norm = getattr(psi, "w1inf", None) if w1inf is None else w1inf
    if norm is None:
        raise InvalidInputError("pass w1inf for a cutoff without a stored norm")
    gt = grid if grid_tilde is None else grid_tilde
    num = projected(ProductField(psi, u), gt, params, threads=threads).value
    den = norm * (lp_norm(u, grid, params.p) + projected(u, grid, params, threads=threads).value)
    return guarded_ratio(num, den)


# -- boundary-distance integral --------------------------------------------------------

def _gl_panels(breaks, order):
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = np.asarray(breaks[:-1]), np.asarray(breaks[1:])
    nodes = ((b - a)[:, None] * (x[None] + 1) / 2 + a[:, None]).ravel()
    weights = ((b - a)[:, None] * w[None] / 2).ravel()
    return nodes, weights


def _graded(dist, radius, extra=()):
    k_lo = math.floor(math.log2(dist)) - 4
    k_hi = math.ceil(math.log2(radius))
    pos = [2.0 ** k for k in range(k_lo, k_hi) if 2.0 ** k < radius] + [radius]
    return sorted(set([0.0] + pos + [e for e in extra if 0 < e < radius]))


def lemma_a2_integral(f: LipschitzFn, lam, params: FracParams, z, radius=1e3, order=16):
    """I(z) = ∫_D |z - y|^p / |Φ_λ⁻¹(z) - y|^(n+p+ps) dy for planar epigraphs.

    Coordinates y = (z1 + t, f(z1 + t) + r) with r >= 0 (unit Jacobian);
    t in [-radius, radius], r in [0, radius], graded Gauss-Legendre panels.
    """
    if f.dim != 1:
        raise InvalidInputError("lemma_a2 integral implemented for n = 2")
    z = np.asarray(z, float).reshape(2)
    fz = float(f(np.array([z[0]]))[0])
    dist = z[1] - fz
    if dist <= 0:
        raise DomainError("z must lie strictly above the graph")
    zm = PhiMap(f, lam).inverse(z[None])[0]
    kinks = [k - z[0] for k in f.kinks]
    tb_pos = _graded(dist, radius, [abs(k) for k in kinks])
    tb = sorted(set([-b for b in tb_pos] + tb_pos + [k for k in kinks if abs(k) < radius]))
    rb = _graded(dist, radius)
    tn, tw = _gl_panels(tb, order)
    rn, rw = _gl_panels(rb, order)
    y1 = z[0] + tn
    fy = f(y1)
    p, n, ps = params.p, 2, params.ps
    total = []
    for k in range(0, len(rn), 64):
        r = rn[k:k + 64, None]
        Y1 = y1[None, :]
        Y2 = fy[None, :] + r
        num = ((Y1 - z[0]) ** 2 + (Y2 - z[1]) ** 2) ** (p / 2)
        den = ((Y1 - zm[0]) ** 2 + (Y2 - zm[1]) ** 2) ** ((n + p + ps) / 2)
        total.append(float(np.sum((num / den) * rw[k:k + 64, None] * tw[None, :])))
    return math.fsum(total)


def lemma_a2_profile(f: LipschitzFn, lam, params: FracParams, zs, radius=1e3, order=16):
    """List of (dist, I(z)) for the given points above the graph."""
    out = []
    for z in np.atleast_2d(zs):
        d = float(z[1] - f(np.array([z[0]]))[0])
        out.append((d, lemma_a2_integral(f, lam, params, z, radius, order)))
    return out


def loglog_slope(xs, ys):
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])
