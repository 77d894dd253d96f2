"""Rigid-motion projections, Korn-type constant estimates and the Galerkin peridynamic solve."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np
from scipy import linalg, optimize

from .errors import BasisError, ConstraintViolationError, InvalidInputError, ParameterError
from .fields import (AnalyticField, BasisSet, RigidMotion, rigid_basis, skew_entries,
                     skew_from_entries)
from .quadrature import Grid, PairKernelSpec, double_integral
from .seminorms import FracParams, gagliardo

PSD_TOL = 1e-10
DEFLATION_TOL = 1e-10


@dataclass(frozen=True)
class ConstantEstimate:
    name: str
    value: float
    h: float
    K: Optional[int]
    method: str
    error_indicator: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def as_row(self):
        row = {"name": self.name, "value": self.value, "h": self.h, "K": self.K,
               "method": self.method, "error_indicator": self.error_indicator}
        row.update(self.meta)
        return row


@dataclass(frozen=True)
class RigidFit:
    motion: RigidMotion
    residual: float
    iterations: int
    converged: bool


# -- Lᵖ projection onto rigid motions ---------------------------------------------------

def _rigid_design(X, center):
    """(m, nr, n) values of translations and rotations about ``center``."""
    n = X.shape[1]
    R = rigid_basis(n, center)
    return np.stack([r(X) for r in R], axis=1)


def _to_motion(coef, n, center):
    nt = n
    b = coef[:nt].copy()
    entries = coef[nt:]
    A = skew_from_entries(entries, n)
    return RigidMotion(entries, b - A @ center)


def rigid_project_lp(u, grid: Grid, p, tol=1e-8, max_iter=200, floor=1e-12):
    """argmin over rigid r of ‖u - r‖_Lp by exact least squares (p = 2) or IRLS."""
    if not 1 < p < math.inf:
        raise ParameterError("p must lie in (1, inf)")
    X, vol = grid.centers, grid.volumes
    n = grid.n
    center = np.sum(X * vol[:, None], axis=0) / np.sum(vol)
    R = _rigid_design(X, center)
    U = u(X)

    def solve(w):
        G = np.einsum("mkn,m,mln->kl", R, w, R)
        rhs = np.einsum("mkn,m,mn->k", R, w, U)
        return linalg.solve(G, rhs, assume_a="pos")

    def objective(c):
        res = np.linalg.norm(U - np.einsum("mkn,k->mn", R, c), axis=1)
        return math.fsum(vol * res ** p)

    c = solve(vol)
    it, converged = 0, True
    if p != 2:
        converged = False
        obj = objective(c)
        scale = max(1.0, float(np.max(np.abs(c))))
        for it in range(1, max_iter + 1):
            res = np.linalg.norm(U - np.einsum("mkn,k->mn", R, c), axis=1)
            w = vol * np.maximum(res, floor * scale) ** (p - 2)
            c_new = solve(w)
            new_obj = objective(c_new)
            step = c_new - c
            while new_obj > obj and np.max(np.abs(step)) > tol:
                step *= 0.5
                c_new = c + step
                new_obj = objective(c_new)
            change = float(np.max(np.abs(c_new - c)))
            c, obj = c_new, min(obj, new_obj)
            if change < tol * scale:
                converged = True
                break
    motion = _to_motion(c, n, center)
    resid = objective(c) ** (1.0 / p)
    return RigidFit(motion, resid, it, converged)


# -- Gram assembly ---------------------------------------------------------------------

def _gram_reducer(nb, n, which):
    """Accumulate D·W·Dᵀ for the Gagliardo and/or projected bilinear forms."""

    def reduce(w, X, Y, FX, FY):
        D = (FY - FX).reshape(len(w), nb, n)
        sw = np.sqrt(w)
        out = []
        if "W" in which:
            Dw = D * sw[:, None, None]
            out.append(np.tensordot(Dw, Dw, axes=([0, 2], [0, 2])))
        if "X" in which:
            E = Y - X
            E = E / np.sqrt(np.sum(E * E, axis=1))[:, None]
            P = np.einsum("pbn,pn->pb", D, E) * sw[:, None]
            out.append(P.T @ P)
        return np.stack(out)

    return reduce


@dataclass(frozen=True, eq=False)
class GramForms:
    G_W: np.ndarray
    G_X: np.ndarray
    M_L2: np.ndarray
    h: float
    params: FracParams
    n_rigid: int = 0
    K: Optional[int] = None
    basis: object = None

    @property
    def size(self):
        return self.G_X.shape[0]

    def restrict(self, idx):
        """Principal sub-forms for a sub-basis (e.g. a lower degree)."""
        idx = np.asarray(idx)
        nr = int(np.sum(idx < self.n_rigid))
        return GramForms(self.G_W[np.ix_(idx, idx)], self.G_X[np.ix_(idx, idx)],
                         self.M_L2[np.ix_(idx, idx)], self.h, self.params, nr, None, None)

    def check(self):
        out = {}
        for name in ("G_W", "G_X", "M_L2"):
            G = getattr(self, name)
            tr = max(np.trace(G), 1e-300)
            out[name] = {"asym": float(np.max(np.abs(G - G.T))),
                         "min_eig_rel": float(np.min(np.linalg.eigvalsh(G)) / tr)}
        return out


def basis_indices_for_degree(basis: BasisSet, K):
    idx = list(range(basis.n_rigid))
    for j, (freq, _) in enumerate(basis.modes):
        if max(freq) <= K:
            idx.append(basis.n_rigid + j)
    return np.array(idx)


def assemble_gram(basis, grid: Grid, params: FracParams, threads=1, cond_cap=1e12, depth=None,
                  adj_depth=2):
    """G_W, G_X (p = 2 bilinear forms) and the mass matrix for a basis."""
    if params.p != 2:
        raise ParameterError("Gram forms are defined for p = 2")
    nb, n = basis.size, basis.n
    spec = PairKernelSpec(params.ps, None, basis.flat, depth=depth, adj_depth=adj_depth,
                          reducer=_gram_reducer(nb, n, "WX"))
    both = double_integral(grid, grid, spec, threads)
    V = basis.values(grid.centers)
    M = np.einsum("mbn,m,mcn->bc", V, grid.volumes, V)
    GW, GX = both[0], both[1]
    GW, GX, M = (GW + GW.T) / 2, (GX + GX.T) / 2, (M + M.T) / 2
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > cond_cap:
        raise BasisError(f"mass matrix condition number {cond:.3g} exceeds cap {cond_cap:.3g}")
    return GramForms(GW, GX, M, grid.h, params, getattr(basis, "n_rigid", 0),
                     getattr(basis, "degree", None), basis)


# -- constant estimates -----------------------------------------------------------------

def _top_eig(A, B):
    w, v = linalg.eigh(A, B)
    return float(w[-1]), v[:, -1]


def estimate_korn2_constant(gram: GramForms, method="eig", samples=1000, seed=0):
    """C₂ for |u|²_W <= C₂ ([u]²_X + ‖u‖²_L2) on the span.

    ``eig`` is the exact maximum on the span; ``random`` samples unit-norm
    coefficient vectors and is a lower bound.
    """
    B = gram.G_X + gram.M_L2
    try:
        linalg.cholesky(B)
    except linalg.LinAlgError:
        raise AssertionError("G_X + M_L2 must be positive definite") from None
    if method == "eig":
        lam, v = _top_eig(gram.G_W, B)
        return ConstantEstimate("C2", lam, gram.h, gram.K, "eig", meta={"vector": v})
    if method == "random":
        best = sampled_ratios(gram.G_W, B, samples, seed).max()
        return ConstantEstimate("C2", float(best), gram.h, gram.K, "random-search",
                                meta={"lower_bound": True, "samples": samples})
    raise InvalidInputError(f"unknown method {method!r}")


def sampled_ratios(A, B, samples, seed):
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((samples, A.shape[0]))
    V /= np.linalg.norm(V, axis=1)[:, None]
    return np.einsum("sk,kl,sl->s", V, A, V) / np.einsum("sk,kl,sl->s", V, B, V)


def random_search_korn2(basis, grid, params: FracParams, samples=50, seed=0, threads=1):
    """Lower bound for C₂ at general p: max |u|^p_W / ([u]^p_X + ‖u‖^p_Lp) over random span elements."""
    from .seminorms import lp_raw, projected

    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(samples):
        c = rng.standard_normal(basis.size)
        c /= np.linalg.norm(c)
        u = basis.field(c)
        num = gagliardo(u, grid, params, threads=threads).raw_p_power
        den = projected(u, grid, params, threads=threads).raw_p_power + lp_raw(u, grid, params.p)
        best = max(best, num / den)
    return ConstantEstimate("C2", best, grid.h, getattr(basis, "degree", None), "random-search",
                            meta={"lower_bound": True, "samples": samples})


def _deflate(gram: GramForms, numerator, block):
    """Schur complement of ``numerator`` over the ``block`` indices, on the remaining span.

    Returns (Ŵ, G_X restricted, basis of kept directions T, index array N).
    Directions where G_X is below DEFLATION_TOL·trace are removed as well.
    """
    nb = gram.size
    R = np.asarray(block, dtype=int)
    N = np.setdiff1d(np.arange(nb), np.arange(gram.n_rigid))
    if N.size == 0:
        raise BasisError("nothing left after removing rigid motions")
    A = numerator
    if R.size:
        ARR = A[np.ix_(R, R)]
        W = A[np.ix_(N, N)] - A[np.ix_(N, R)] @ linalg.solve(ARR, A[np.ix_(R, N)], assume_a="pos")
    else:
        W = A[np.ix_(N, N)]
    GX = gram.G_X[np.ix_(N, N)]
    w, U = np.linalg.eigh(GX)
    keep = w > DEFLATION_TOL * max(np.trace(gram.G_X), 1e-300)
    if not np.any(keep):
        raise BasisError("projected form vanishes on the deflated span")
    T = U[:, keep]
    return (W + W.T) / 2, GX, T, N


def _deflated_eig(gram, numerator, block):
    W, GX, T, N = _deflate(gram, numerator, block)
    Wt = T.T @ W @ T
    Gt = T.T @ GX @ T
    lam, y = _top_eig((Wt + Wt.T) / 2, (Gt + Gt.T) / 2)
    v = np.zeros(gram.size)
    v[N] = T @ y
    return lam, v


def estimate_korn1_constant(gram: GramForms):
    """C₁ for inf_A |u - Ax|²_W <= C₁ [u]²_X, rigid motions deflated."""
    if gram.n_rigid == 0:
        raise BasisError("the basis must carry its rigid block for deflation")
    n = gram.params.n
    rot = np.arange(n, gram.n_rigid)
    lam, v = _deflated_eig(gram, gram.G_W, rot)
    return ConstantEstimate("C1", lam, gram.h, gram.K, "eig", meta={"vector": v})


def korn_poincare_constant(gram: GramForms):
    """C with min_r ‖u - r‖_L2 <= C [u]_X; reported as the square root of the eigenvalue."""
    if gram.n_rigid == 0:
        raise BasisError("the basis must carry its rigid block for deflation")
    lam, v = _deflated_eig(gram, gram.M_L2, np.arange(gram.n_rigid))
    return ConstantEstimate("KornPoincare", math.sqrt(lam), gram.h, gram.K, "eig",
                            meta={"eigenvalue": lam, "vector": v})


def fit_power(taus, values):
    return float(np.polyfit(np.log(taus), np.log(values), 1)[0])


# -- seminorm projection onto skew maps ------------------------------------------------------

def _rotation_fields(n):
    out = []
    m = n * (n - 1) // 2
    for k in range(m):
        e = np.zeros(m)
        e[k] = 1.0
        out.append(RigidMotion(e, np.zeros(n)))
    return out


def rigid_project_seminorm(u, grid: Grid, params: FracParams, threads=1, tol=1e-8):
    """min over skew A of |u - Ax|_W; returns (A, value)."""
    n = grid.n
    rots = _rotation_fields(n)
    if params.p == 2:
        fields = [u] + rots

        def flat(X):
            return np.concatenate([f(X) for f in fields], axis=1)

        nb = len(fields)
        spec = PairKernelSpec(params.ps, None, flat, reducer=_gram_reducer(nb, n, "W"))
        G = double_integral(grid, grid, spec, threads)[0]
        G = (G + G.T) / 2
        a = linalg.solve(G[1:, 1:], G[1:, 0], assume_a="pos")
        A = skew_from_entries(a, n)
        # evaluate directly: the Schur complement loses digits for near-rigid u
        r = AnalyticField(lambda X: u(X) - X @ A.T, n)
        return A, gagliardo(r, grid, params, threads=threads).value

    def obj(a):
        A = skew_from_entries(np.atleast_1d(a), n)
        r = AnalyticField(lambda X: u(X) - X @ A.T, n)
        return gagliardo(r, grid, params, threads=threads).raw_p_power

    m = n * (n - 1) // 2
    A0, _ = rigid_project_seminorm(u, grid, FracParams(params.s, 2.0, n), threads)
    a0 = skew_entries(A0)
    if m == 1:
        span = 1.0 + abs(a0[0])
        res = optimize.minimize_scalar(lambda t: obj([t]), bracket=(a0[0] - span, a0[0], a0[0] + span),
                                       tol=tol)
        a = np.array([res.x])
    else:
        res = optimize.minimize(obj, a0, method="BFGS", options={"gtol": tol})
        a = res.x
    A = skew_from_entries(a, n)
    return A, float(obj(a) ** (1.0 / params.p))


# -- peridynamic Galerkin solve ----------------------------------------------------------------

def box_distance(box, X):
    lo, hi = box.bbox()
    d = np.maximum(np.maximum(lo - X, X - hi), 0.0)
    return np.sqrt(np.sum(d * d, axis=1))


@dataclass(frozen=True, eq=False)
class ConstrainedBasis:
    """Basis fields multiplied by m(x) = d²/(d² + ℓ²), d the distance to ω."""

    basis: BasisSet
    omega: object
    ell: float

    @property
    def n(self):
        return self.basis.n

    @property
    def size(self):
        return self.basis.size

    n_rigid = 0
    degree = None

    def weight(self, X):
        d = box_distance(self.omega, X)
        return d * d / (d * d + self.ell ** 2)

    def values(self, X):
        return self.basis.values(X) * self.weight(X)[:, None, None]

    def flat(self, X):
        V = self.values(X)
        return V.reshape(len(V), -1)

    def field(self, coeffs, name="galerkin"):
        coeffs = np.asarray(coeffs, float)
        return AnalyticField(lambda X: np.einsum("mbn,b->mn", self.values(X), coeffs), self.n, name)


@dataclass(frozen=True, eq=False)
class PeridynamicSolution:
    field: AnalyticField
    coeffs: np.ndarray
    gram: GramForms
    load: np.ndarray
    residual: float

    def energy(self, c=None):
        c = self.coeffs if c is None else np.asarray(c)
        return float(c @ self.gram.G_X @ c - self.load @ c)


def solve_peridynamic(fext, omega, basis: BasisSet, grid: Grid, s, ell=0.1, threads=1):
    """Minimize W_ρ(u) - ∫ f·u over the span of basis fields vanishing on ω.

    With W_ρ(u) = cᵀ G_X c and load F_k = ∫ f·φ_k, the minimizer solves 2 G_X c = F.
    """
    cb = ConstrainedBasis(basis, omega, float(ell))
    params = FracParams(s, 2.0, grid.n)
    gram = assemble_gram(cb, grid, params, threads=threads)
    G = gram.G_X
    w = np.linalg.eigvalsh(G)
    if w[0] <= 1e-12 * np.trace(G):
        raise ConstraintViolationError("projected form is singular on the constrained span")
    V = cb.values(grid.centers)
    F = np.einsum("mbn,m,mn->b", V, grid.volumes, fext(grid.centers))
    if not np.any(F):
        c = np.zeros_like(F)
        resid = 0.0
    else:
        c = linalg.solve(2 * G, F, assume_a="pos")
        # one step of iterative refinement keeps the residual at round-off level
        c = c + linalg.solve(2 * G, F - 2 * G @ c, assume_a="pos")
        resid = float(np.linalg.norm(2 * G @ c - F) / np.linalg.norm(F))
    return PeridynamicSolution(cb.field(c), c, gram, F, resid)
