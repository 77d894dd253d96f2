"""Reflection-type extension operators across a graph and across a wedge edge."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import DomainError, ParameterError
from .fields import VectorField
from .geometry.domains import Angular, Epigraph, angular_window, extension_window
from .geometry.lipschitz import LipschitzFn
from .geometry.maps import PhiMap
from .quadrature import PairKernelSpec, double_integral, make_grid
from .seminorms import (FracParams, gagliardo, guarded_ratio, lp_norm, projected,
                        projected_numerator)


@dataclass(frozen=True)
class ExtensionCoeffs:
    M: float
    delta: float
    lam: float
    mu: float
    k: float
    l: float
    m: float
    q: float
    variant: str = "epigraph"
    alpha: float = 0.0

    def residuals(self):
        """Absolute residuals of k+ℓ=1, m+q=1, λk=-m, μℓ=-q and αk(1+λ)=-αℓ(1+μ)."""
        return {
            "k+l-1": abs(self.k + self.l - 1.0),
            "m+q-1": abs(self.m + self.q - 1.0),
            "lam*k+m": abs(self.lam * self.k + self.m),
            "mu*l+q": abs(self.mu * self.l + self.q),
            "angular": abs(self.alpha * self.k * (1 + self.lam) + self.alpha * self.l * (1 + self.mu)),
        }

    def max_residual(self):
        return max(self.residuals().values())

    def with_(self, **kw):
        """Copy with some entries replaced (test hook for sabotage checks)."""
        return replace(self, **kw)


def delta_default(M, n, c2, variant="2+M"):
    if variant == "2+M":
        return 1.0 / (2 * c2 * math.sqrt(n) * (2 + M))
    if variant == "1+M":
        return 1.0 / (2 * c2 * math.sqrt(n) * (1 + M))
    raise ParameterError(f"unknown delta variant {variant!r}")


def solve_coefficients(M, n=2, c2=1.0, delta_variant="2+M", delta=None, alpha=None):
    """Coefficients (λ, μ, k, ℓ, m, q) from δ.

    λ = 1-δ, μ = 1+δ and k, ℓ, m, q solve k+ℓ = 1 = m+q, λk = -m, μℓ = -q.
    ``delta`` forces a value in (0, 1/2] (test hook); ``alpha`` selects the
    wedge variant.
    """
    if M < 0:
        raise ParameterError("M must be nonnegative")
    if delta is None:
        if c2 < 1:
            raise ParameterError("c2 must be at least 1")
        delta = delta_default(M, n, c2, delta_variant)
        assert 0 < delta <= 0.5, "delta > 1/2 cannot occur for c2 >= 1, n >= 2"
    elif not 0 < delta <= 0.5:
        raise ParameterError("forced delta must lie in (0, 1/2]")
    lam, mu = 1.0 - delta, 1.0 + delta
    gap = mu - lam
    k = (1 + mu) / gap
    l = -(1 + lam) / gap
    m = -lam * (1 + mu) / gap
    q = mu * (1 + lam) / gap
    variant = "epigraph" if alpha is None else "angular"
    return ExtensionCoeffs(float(M), float(delta), lam, mu, k, l, m, q, variant,
                           0.0 if alpha is None else float(alpha))


# -- pointwise operators ----------------------------------------------------------------

def _heights(f, X):
    xp = X[:, 0] if X.shape[1] == 2 else X[:, :-1]
    return X[:, -1] - f(xp)


def _check_window(window, P):
    if window is not None and not np.all(window.contains(P)):
        raise DomainError("composed point outside the field's truncation window")


def extend_epigraph(u, f: LipschitzFn, c: ExtensionCoeffs, X, window=None):
    """E(u)(x): u(x) on D, k u(Φ_λx) + ℓ u(Φ_μx) below (m, q in the last component)."""
    X = np.atleast_2d(np.asarray(X, float))
    out = np.empty_like(X)
    below = _heights(f, X) < 0
    above = ~below
    if np.any(above):
        out[above] = u(X[above])
    if np.any(below):
        Xb = X[below]
        Pl = PhiMap(f, c.lam)(Xb, check=False)
        Pm = PhiMap(f, c.mu)(Xb, check=False)
        _check_window(window, np.concatenate([Pl, Pm]))
        a, b = u(Pl), u(Pm)
        E = c.k * a + c.l * b
        E[:, -1] = c.m * a[:, -1] + c.q * b[:, -1]
        out[below] = E
    return out


def extend_angular(u, alpha, c: ExtensionCoeffs, X, window=None, drop_alpha_term=False):
    """Wedge extension across x2 = αx1 for x1 >= 0 (n = 2).

    Below the edge the first component gains αk(1+λ)(u₂^λ - u₂^μ);
    ``drop_alpha_term`` removes it (test hook).
    """
    X = np.atleast_2d(np.asarray(X, float))
    if X.shape[1] != 2:
        raise DomainError("the wedge extension is planar")
    if np.any(X[:, 0] < 0):
        raise DomainError("wedge extension is defined for x1 >= 0")
    f = LipschitzFn.affine([alpha], 0.0)
    out = np.empty_like(X)
    below = _heights(f, X) < 0
    above = ~below
    if np.any(above):
        out[above] = u(X[above])
    if np.any(below):
        Xb = X[below]
        Pl = PhiMap(f, c.lam)(Xb, check=False)
        Pm = PhiMap(f, c.mu)(Xb, check=False)
        _check_window(window, np.concatenate([Pl, Pm]))
        a, b = u(Pl), u(Pm)
        first = c.k * a[:, 0] + c.l * b[:, 0]
        if not drop_alpha_term:
            corr = alpha * c.k * (1 + c.lam)
            first = c.k * a[:, 0] + corr * a[:, 1] + c.l * b[:, 0] - corr * b[:, 1]
        out[below, 0] = first
        out[below, 1] = c.m * a[:, 1] + c.q * b[:, 1]
    return out


@dataclass(frozen=True, eq=False)
class ExtendedField(VectorField):
    """E(u) as a field, for use in seminorms."""

    u: VectorField
    c: ExtensionCoeffs
    f: Optional[LipschitzFn] = None
    alpha: Optional[float] = None
    drop_alpha_term: bool = False
    name: str = "extension"

    @property
    def n(self):
        return self.u.n

    def __call__(self, X):
        if self.alpha is not None:
            return extend_angular(self.u, self.alpha, self.c, X, drop_alpha_term=self.drop_alpha_term)
        return extend_epigraph(self.u, self.f, self.c, X)


def mixed_identity_terms(u, f: LipschitzFn, c: ExtensionCoeffs, X, Y):
    """Terms of the mixed-pair expansion of (E(u)(x) - u(y))·(x - y), x in D₋, y in D.

    lhs = t1 + t2 + t3 + (T4 + T5 + T6) where
      t1 = k (u(Φ_λx) - u(y))·(Φ_λx - y),  t2 = ℓ (u(Φ_μx) - u(y))·(Φ_μx - y),
      t3 = (k - m)(a - b)(y_n - f(x')),
      T4 = k (a - c)(x_n - f - λ(f - x_n)), T5 = ℓ (b - c)(x_n - f - μ(f - x_n)),
      T6 = (k - m)(a - b)(f - x_n),
    with a = u_n(Φ_λx), b = u_n(Φ_μx), c = u_n(y). The last three cancel.
    """
    X = np.atleast_2d(np.asarray(X, float))
    Y = np.atleast_2d(np.asarray(Y, float))
    if np.any(_heights(f, X) >= 0) or np.any(_heights(f, Y) < 0):
        raise DomainError("need x in D₋ and y in D")
    fx = X[:, -1] - _heights(f, X)
    Pl = PhiMap(f, c.lam)(X)
    Pm = PhiMap(f, c.mu)(X)
    UL, UM, UY = u(Pl), u(Pm), u(Y)
    E = extend_epigraph(u, f, c, X)
    lhs = np.sum((E - UY) * (X - Y), axis=1)
    a, b, cc = UL[:, -1], UM[:, -1], UY[:, -1]
    d = fx - X[:, -1]
    t1 = c.k * np.sum((UL - UY) * (Pl - Y), axis=1)
    t2 = c.l * np.sum((UM - UY) * (Pm - Y), axis=1)
    t3 = (c.k - c.m) * (a - b) * (Y[:, -1] - fx)
    T4 = c.k * (a - cc) * (X[:, -1] - fx - c.lam * d)
    T5 = c.l * (b - cc) * (X[:, -1] - fx - c.mu * d)
    T6 = (c.k - c.m) * (a - b) * d
    return {"lhs": lhs, "t1": t1, "t2": t2, "t3": t3, "T4": T4, "T5": T5, "T6": T6}


def mixed_identity_residuals(terms):
    """Relative residuals of lhs = t1+t2+t3+T4+T5+T6 and of T4+T5+T6 = 0."""
    mag = sum(np.abs(terms[k]) for k in ("t1", "t2", "t3", "T4", "T5", "T6")) + np.abs(terms["lhs"])
    mag = np.where(mag > 0, mag, 1.0)
    full = terms["lhs"] - (terms["t1"] + terms["t2"] + terms["t3"]
                           + terms["T4"] + terms["T5"] + terms["T6"])
    cancel = terms["T4"] + terms["T5"] + terms["T6"]
    return float(np.max(np.abs(full) / mag)), float(np.max(np.abs(cancel) / mag))


# -- operator-norm measurement ------------------------------------------------------------

@dataclass(frozen=True)
class WindowGrids:
    plus: object
    minus: object
    union: object


def window_grids(domain, c: ExtensionCoeffs, h):
    """Grids on D, on the D₋ window and on their union, all on one lattice."""
    if isinstance(domain, Angular):
        minus, union = angular_window(domain, c.mu)
    elif isinstance(domain, Epigraph):
        minus, union = extension_window(domain, c.mu)
    else:
        raise ParameterError("extension windows exist for epigraphs and wedges")
    lo = union.bbox()[0]
    return WindowGrids(make_grid(domain, h, origin=lo), make_grid(minus, h, origin=lo),
                       make_grid(union, h, origin=lo))


@dataclass
class ExtensionNormReport:
    ratio_X: object
    ratio_X_alt: object
    split: dict
    numerator: float
    denominator: float


def _cross_projected(Eu, gx, gy, params, threads):
    spec = PairKernelSpec(params.ps, projected_numerator(params.p), lambda X: Eu(X),
                          lambda X: Eu(X), symmetric=True)
    return float(double_integral(gx, gy, spec, threads))


def extension_norm_ratio(u, domain, c: ExtensionCoeffs, params: FracParams, h=None, grids=None,
                         threads=1, drop_alpha_term=False):
    """Measured [E(u)]_X over the window against the bound's right-hand side.

    Epigraph: [Eu]_X / ([u]_X + (1+M)^(2+n/(2p)) M |u|_W) together with the
    p-power form [Eu]^p / ([u]^p + (1+M)^(n/2+2p) M^p |u|^p_W).
    Wedge: [Eu]_X / ([u]_X + ‖u‖_Lp) (both normalizations coincide).
    The split holds the three pieces D×D, 2·D₋×D and D₋×D₋ of [Eu]^p.
    """
    if grids is None:
        grids = window_grids(domain, c, h)
    n, p = params.n, params.p
    if isinstance(domain, Angular):
        Eu = ExtendedField(u, c, alpha=domain.alpha, drop_alpha_term=drop_alpha_term)
    else:
        Eu = ExtendedField(u, c, f=domain.f)
    num = projected(Eu, grids.union, params, threads=threads)
    ux = projected(u, grids.plus, params, threads=threads)
    M = c.M if not isinstance(domain, Angular) else abs(domain.alpha)
    split = {
        "DxD": ux.raw_p_power,
        "2*DminusxD": 2.0 * _cross_projected(Eu, grids.minus, grids.plus, params, threads),
        "DminusxDminus": projected(Eu, grids.minus, params, threads=threads).raw_p_power,
    }
    split["sum"] = math.fsum(split.values())
    split["union"] = num.raw_p_power
    if isinstance(domain, Angular):
        lp = lp_norm(u, grids.plus, p)
        den = ux.value + lp
        r = guarded_ratio(num.value, den)
        r_alt = guarded_ratio(num.raw_p_power, ux.raw_p_power + lp ** p)
    else:
        uw = gagliardo(u, grids.plus, params, threads=threads)
        den = ux.value + (1 + M) ** (2 + n / (2 * p)) * M * uw.value
        r = guarded_ratio(num.value, den)
        r_alt = guarded_ratio(num.raw_p_power,
                              ux.raw_p_power + (1 + M) ** (n / 2 + 2 * p) * M ** p * uw.raw_p_power)
    return ExtensionNormReport(r, r_alt, split, num.value, den)


def ii_new_ratio(u, alpha, c: ExtensionCoeffs, params: FracParams, h=None, grids=None, threads=1):
    """II_new = ∬_{D₋×D} |(u₂^λ(x) - u₂^μ(x))(x₁ - y₁)|^p / |x-y|^(2+p+ps), over (‖u‖_Lp + [u]_X)^p."""
    dom = Angular(alpha, 1.0) if grids is None else grids.plus.domain
    if grids is None:
        grids = window_grids(dom, c, h)
    f = LipschitzFn.affine([alpha], 0.0)
    p = params.p

    def jump(X):
        a = u(PhiMap(f, c.lam)(X, check=False))[:, 1]
        b = u(PhiMap(f, c.mu)(X, check=False))[:, 1]
        return (a - b)[:, None]

    def g(X, Y, FX, FY):
        return np.abs(FX[:, 0] * (X[:, 0] - Y[:, 0])) ** p

    spec = PairKernelSpec(p + params.ps, g, jump, lambda Y: np.zeros((len(Y), 1)), symmetric=False)
    ii = float(double_integral(grids.minus, grids.plus, spec, threads))
    norm = lp_norm(u, grids.plus, p) + projected(u, grids.plus, params, threads=threads).value
    return guarded_ratio(ii, norm ** p)
