"""Vector fields, rigid motions, a library of test fields, bases and cutoffs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import BasisError, CoverError, DomainError, InvalidInputError, ParameterError


def _pts(X, n):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != n:
        raise InvalidInputError(f"expected points in R^{n}, got shape {X.shape}")
    return X


class VectorField:
    """Base class: ``u(X)`` maps (m, n) points to (m, n) values."""

    n: int
    name: str = "field"

    def __call__(self, X):
        raise NotImplementedError

    def __add__(self, other):
        return LinearCombination((self, other), (1.0, 1.0))

    def __sub__(self, other):
        return LinearCombination((self, other), (1.0, -1.0))

    def __mul__(self, c):
        return LinearCombination((self,), (float(c),))

    __rmul__ = __mul__

    def component(self, i):
        return lambda X: self(X)[:, i]

    def shifted(self, c):
        """x -> u(x - c)."""
        c = np.asarray(c, float)
        return AnalyticField(lambda X, u=self: u(X - c), self.n, f"{self.name}@shift")

    def rotated(self, R):
        """x -> R u(Rᵀ x), the push-forward by a rotation about the origin."""
        R = np.asarray(R, float)
        return AnalyticField(lambda X, u=self: u(X @ R) @ R.T, self.n, f"{self.name}@rot")

    def transformed(self, R, c):
        """Push-forward by the rigid map y = R x + c: y -> R u(Rᵀ(y - c))."""
        R, c = np.asarray(R, float), np.asarray(c, float)
        return AnalyticField(lambda X, u=self: u((X - c) @ R) @ R.T, self.n, f"{self.name}@rigid")

    def dilated(self, tau, center=None):
        """u_τ(x) = u(c + (x - c)/τ)."""
        c = np.zeros(self.n) if center is None else np.asarray(center, float)
        return AnalyticField(lambda X, u=self: u(c + (X - c) / tau), self.n, f"{self.name}@dil")


@dataclass(frozen=True, eq=False)
class AnalyticField(VectorField):
    func: Callable
    n: int
    name: str = "analytic"
    params: dict = field(default_factory=dict)

    def __call__(self, X):
        X = _pts(X, self.n)
        out = np.asarray(self.func(X), dtype=float)
        return out.reshape(len(X), self.n)


@dataclass(frozen=True, eq=False)
class LinearCombination(VectorField):
    fields: tuple
    coeffs: tuple
    name: str = "combination"

    @property
    def n(self):
        return self.fields[0].n

    def __call__(self, X):
        out = None
        for c, f in zip(self.coeffs, self.fields):
            v = c * f(X)
            out = v if out is None else out + v
        return out


@dataclass(frozen=True, eq=False)
class GridField(VectorField):
    """Samples on a tensor grid with multilinear interpolation per component."""

    axes: tuple
    values: np.ndarray = field(repr=False)
    name: str = "grid"

    def __post_init__(self):
        interps = tuple(RegularGridInterpolator(self.axes, self.values[..., i], method="linear",
                                                bounds_error=False, fill_value=np.nan)
                        for i in range(self.values.shape[-1]))
        object.__setattr__(self, "_interp", interps)

    @property
    def n(self):
        return len(self.axes)

    @classmethod
    def from_function(cls, u, lo, hi, h):
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        axes = tuple(np.linspace(a, b, max(2, int(round((b - a) / h)) + 1)) for a, b in zip(lo, hi))
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        vals = u(mesh.reshape(-1, len(lo))).reshape(mesh.shape[:-1] + (len(lo),))
        return cls(axes, vals, name=f"grid({getattr(u, 'name', 'u')})")

    def __call__(self, X):
        X = _pts(X, self.n)
        out = np.stack([f(X) for f in self._interp], axis=1)
        if np.any(np.isnan(out)):
            raise DomainError("grid field evaluated outside its sample box")
        return out


@dataclass(frozen=True, eq=False)
class ProductField(VectorField):
    """ψ u extended by zero where ψ vanishes (u is not evaluated there)."""

    psi: Callable
    u: VectorField
    name: str = "product"

    @property
    def n(self):
        return self.u.n

    def __call__(self, X):
        X = _pts(X, self.n)
        w = np.asarray(self.psi(X), float)
        out = np.zeros((len(X), self.n))
        on = w != 0
        if np.any(on):
            out[on] = w[on, None] * self.u(X[on])
        return out


# -- rigid motions ---------------------------------------------------------------

def skew_from_entries(entries, n):
    """Skew matrix with A[i, j] = e, A[j, i] = -e for i < j in row-major order."""
    entries = np.atleast_1d(np.asarray(entries, dtype=float))
    pairs = list(combinations(range(n), 2))
    if len(entries) != len(pairs):
        raise InvalidInputError(f"need {len(pairs)} skew entries for n={n}")
    A = np.zeros((n, n))
    for (i, j), e in zip(pairs, entries):
        A[i, j] = e
        A[j, i] = -e
    return A


def skew_entries(A):
    A = np.asarray(A, float)
    return np.array([A[i, j] for i, j in combinations(range(A.shape[0]), 2)])


@dataclass(frozen=True, eq=False)
class RigidMotion(VectorField):
    """x -> A x + b with A skew; only the upper-triangular entries are stored."""

    entries: tuple
    b: tuple
    name: str = "rigid"

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(float(e) for e in np.atleast_1d(self.entries)))
        object.__setattr__(self, "b", tuple(float(v) for v in np.atleast_1d(self.b)))
        skew_from_entries(self.entries, len(self.b))

    @property
    def n(self):
        return len(self.b)

    @property
    def A(self):
        return skew_from_entries(self.entries, self.n)

    def __call__(self, X):
        X = _pts(X, self.n)
        return X @ self.A.T + np.asarray(self.b)


def make_rigid(entries, b):
    return RigidMotion(entries, b)


def random_rigid(n, rng, scale=1.0):
    m = n * (n - 1) // 2
    return RigidMotion(scale * rng.standard_normal(m), scale * rng.standard_normal(n))


def rigid_basis(n, center=None):
    """n translations, then the n(n-1)/2 rotations about ``center``."""
    c = np.zeros(n) if center is None else np.asarray(center, float)
    out = [RigidMotion(np.zeros(n * (n - 1) // 2), np.eye(n)[i]) for i in range(n)]
    for k in range(n * (n - 1) // 2):
        e = np.zeros(n * (n - 1) // 2)
        e[k] = 1.0
        A = skew_from_entries(e, n)
        out.append(RigidMotion(e, -A @ c))
    return out


# -- field library -----------------------------------------------------------------

def _identity(n=2, scale=1.0):
    return AnalyticField(lambda X: scale * X, n, "identity", {"scale": scale})


def _shear(n=2, amplitude=1.0, i=0, j=1):
    def u(X):
        out = np.zeros_like(X)
        out[:, i] = amplitude * X[:, j]
        return out
    return AnalyticField(u, n, "shear", {"amplitude": amplitude, "i": i, "j": j})


def _bump_gradient(n=2, center=None, width=0.25):
    c = np.full(n, 0.5) if center is None else np.asarray(center, float)

    def u(X):
        d = X - c
        phi = np.exp(-np.sum(d ** 2, axis=1) / (2 * width ** 2))
        return -(d / width ** 2) * phi[:, None]
    return AnalyticField(u, n, "bump_gradient", {"center": c.tolist(), "width": width})


def _trig(n=2, mode=(1, 1), component=0, amplitude=1.0, length=1.0):
    mode = tuple(int(m) for m in np.atleast_1d(mode))
    if len(mode) != n:
        raise ParameterError("trig mode needs one integer per dimension")

    def u(X):
        v = amplitude * np.prod([np.cos(np.pi * m * X[:, k] / length) for k, m in enumerate(mode)], axis=0)
        out = np.zeros_like(X)
        out[:, component] = v
        return out
    return AnalyticField(u, n, "trig", {"mode": list(mode), "component": component})


def _random_trig(n=2, seed=0, degree=3, decay=1.0, length=1.0):
    rng = np.random.default_rng(np.uint64(seed))
    modes = np.array(list(product(range(degree + 1), repeat=n)))
    coef = rng.standard_normal((len(modes), n)) / (1.0 + modes.sum(axis=1, keepdims=True)) ** (1 + decay)
    phase = rng.uniform(0, 2 * np.pi, size=(len(modes), n))

    def u(X):
        arg = np.pi * (X @ modes.T) / length  # (m, modes)
        out = np.empty_like(X)
        for c in range(n):
            out[:, c] = np.cos(arg + phase[None, :, c]) @ coef[:, c]
        return out
    return AnalyticField(u, n, "random_trig", {"seed": int(seed), "degree": degree,
                                               "coefficients": coef, "phases": phase})


def _constant(n=2, value=None):
    v = np.ones(n) if value is None else np.asarray(value, float)
    return AnalyticField(lambda X: np.broadcast_to(v, X.shape).copy(), n, "constant",
                         {"value": v.tolist()})


def _component_power(n=2, component=None, power=2.0, axis=None, coefficient=1.0):
    comp = n - 1 if component is None else int(component)
    ax = n - 1 if axis is None else int(axis)

    def u(X):
        out = np.zeros_like(X)
        out[:, comp] = coefficient * X[:, ax] ** power
        return out
    return AnalyticField(u, n, "component_power", {"component": comp, "power": power, "axis": ax})


def _rigid(n=2, entries=None, b=None):
    m = n * (n - 1) // 2
    return RigidMotion(np.zeros(m) if entries is None else entries, np.zeros(n) if b is None else b)


def _concentrated(n=2, scale=0.1, center=None):
    # divergence-free swirl of width `scale`; used by the ps < 1 probe
    c = np.full(n, 0.5) if center is None else np.asarray(center, float)

    def u(X):
        d = (X - c) / scale
        g = np.exp(-np.sum(d ** 2, axis=1))
        out = np.zeros_like(X)
        out[:, 0] = -d[:, 1] * g
        out[:, 1] = d[:, 0] * g
        return out
    return AnalyticField(u, n, "concentrated", {"scale": scale})


FIELD_LIBRARY = {
    "identity": _identity,
    "shear": _shear,
    "bump_gradient": _bump_gradient,
    "trig": _trig,
    "random_trig": _random_trig,
    "constant": _constant,
    "component_power": _component_power,
    "rigid": _rigid,
    "concentrated": _concentrated,
}


def field_library(name, params=None):
    """Named closed-form test fields.

    identity: x -> scale x.  shear: e_i amplitude x_j.  bump_gradient: the
    gradient of a Gaussian bump.  trig: a single cosine product in one
    component.  random_trig: random cosine series, reproducible from ``seed``.
    constant, component_power (x_axis^power in one component), rigid,
    concentrated (a swirl of width ``scale``).
    """
    params = dict(params or {})
    if name not in FIELD_LIBRARY:
        raise InvalidInputError(f"unknown field {name!r}; known: {sorted(FIELD_LIBRARY)}")
    try:
        return FIELD_LIBRARY[name](**params)
    except TypeError as exc:
        raise InvalidInputError(f"bad parameters for field {name!r}: {exc}") from None


# -- bases ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BasisSet:
    """Rigid block followed by cosine modes cos(πa(x1-l1)/L1)·cos(πb(x2-l2)/L2)·e_c.

    ``values(X)`` returns (m, nb, n). Modes with all frequencies zero are
    constants and are left out when the rigid block is present.
    """

    n: int
    degree: int
    lo: tuple
    hi: tuple
    include_rigid: bool = True
    modes: tuple = ()
    n_rigid: int = 0

    @property
    def size(self):
        return self.n_rigid + len(self.modes)

    def __len__(self):
        return self.size

    def values(self, X):
        X = _pts(X, self.n)
        n = self.n
        lo, L = np.asarray(self.lo), np.asarray(self.hi) - np.asarray(self.lo)
        out = np.zeros((len(X), self.size, n))
        k = 0
        if self.include_rigid:
            c = (np.asarray(self.lo) + np.asarray(self.hi)) / 2
            for i in range(n):
                out[:, k, i] = 1.0
                k += 1
            for i, j in combinations(range(n), 2):
                out[:, k, i] = X[:, j] - c[j]
                out[:, k, j] = -(X[:, i] - c[i])
                k += 1
        T = (X - lo) / L
        cache = {}
        for freq, comp in self.modes:
            key = freq
            if key not in cache:
                cache[key] = np.prod([np.cos(np.pi * f * T[:, d]) for d, f in enumerate(freq)], axis=0)
            out[:, k, comp] = cache[key]
            k += 1
        return out

    def flat(self, X):
        """(m, nb·n) layout for quadrature field hooks."""
        V = self.values(X)
        return V.reshape(len(V), -1)

    def field(self, coeffs, name="span"):
        coeffs = np.asarray(coeffs, float)
        if coeffs.shape != (self.size,):
            raise InvalidInputError(f"need {self.size} coefficients")
        return AnalyticField(lambda X: np.einsum("mbn,b->mn", self.values(X), coeffs), self.n, name)

    def element(self, k):
        e = np.zeros(self.size)
        e[k] = 1.0
        return self.field(e, name=f"basis[{k}]")

    def rigid_slice(self):
        return slice(0, self.n_rigid)

    def check_conditioning(self, grid, cap=1e12):
        V = self.values(grid.centers)
        W = grid.volumes
        M = np.einsum("mbn,m,mcn->bc", V, W, V)
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > cap:
            raise BasisError(f"mass matrix condition number {cond:.3g} exceeds cap {cap:.3g}")
        return cond


def make_basis(domain_or_bounds, degree, include_rigid=True, n=None):
    """Nested cosine basis up to ``degree`` per coordinate on the bounding box."""
    if hasattr(domain_or_bounds, "bbox"):
        lo, hi = domain_or_bounds.bbox()
    else:
        lo, hi = domain_or_bounds
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    n = len(lo) if n is None else n
    if degree < 0:
        raise ParameterError("degree must be nonnegative")
    freqs = sorted(product(range(degree + 1), repeat=n), key=lambda f: (max(f), f))
    modes = []
    for f in freqs:
        if include_rigid and not any(f):
            continue
        for comp in range(n):
            modes.append((tuple(f), comp))
    nr = n + n * (n - 1) // 2 if include_rigid else 0
    return BasisSet(n, degree, tuple(lo), tuple(hi), include_rigid, tuple(modes), nr)


def fields_basis(fields: Sequence[VectorField], n_rigid=0):
    """Wrap an explicit list of fields as a (m, nb, n) evaluator.

    The first ``n_rigid`` fields are taken to be the rigid block.
    """
    fields = list(fields)
    nr = int(n_rigid)

    class _Explicit:
        n = fields[0].n
        size = len(fields)
        n_rigid = nr
        degree = None

        @staticmethod
        def field(coeffs, name="span"):
            c = np.asarray(coeffs, float)
            return AnalyticField(lambda X: np.einsum("mbn,b->mn", _Explicit.values(X), c), fields[0].n, name)

        @staticmethod
        def values(X):
            return np.stack([f(X) for f in fields], axis=1)

        @staticmethod
        def flat(X):
            return np.concatenate([f(X) for f in fields], axis=1)

    return _Explicit()


# -- cutoffs --------------------------------------------------------------------------

def bump_profile(t):
    """exp(-1/(1 - t²)) for |t| < 1, else 0."""
    t = np.asarray(t, float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1
    out[m] = np.exp(-1.0 / (1.0 - t[m] ** 2))
    return out


def bump_profile_derivative(t):
    t = np.asarray(t, float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1
    tm = t[m]
    out[m] = np.exp(-1.0 / (1.0 - tm ** 2)) * (-2 * tm / (1.0 - tm ** 2) ** 2)
    return out


_PROFILE_T = np.linspace(0, 1, 200_001)
_PROFILE_MAX = float(np.max(bump_profile(_PROFILE_T)))
_PROFILE_DMAX = float(np.max(np.abs(bump_profile_derivative(_PROFILE_T))))


@dataclass(frozen=True, eq=False)
class Cutoff:
    """φ_j = ψ_j / Σ_k ψ_k with ψ_k radial bumps of support radius ρ_k."""

    index: int
    centers: np.ndarray = field(repr=False)
    support: np.ndarray = field(repr=False)
    ball_radius: float = 0.0
    beta: float = 0.0
    w1inf: float = 0.0
    profile_w1inf: float = 0.0

    def _psi(self, X):
        d = X[:, None, :] - self.centers[None]
        r = np.sqrt(np.sum(d ** 2, axis=2))
        return bump_profile(r / self.support[None]), d, r

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, float))
        psi, _, _ = self._psi(X)
        S = psi.sum(axis=1)
        out = np.zeros(len(X))
        ok = S > 0
        out[ok] = psi[ok, self.index] / S[ok]
        return out

    def gradient(self, X):
        X = np.atleast_2d(np.asarray(X, float))
        psi, d, r = self._psi(X)
        rs = np.where(r > 0, r, 1.0)
        dpsi = bump_profile_derivative(r / self.support[None]) / self.support[None]
        grads = dpsi[:, :, None] * d / rs[:, :, None]
        S = psi.sum(axis=1)
        gS = grads.sum(axis=1)
        out = np.zeros_like(X)
        ok = S > 0
        j = self.index
        out[ok] = (grads[ok, j] * S[ok, None] - psi[ok, j, None] * gS[ok]) / S[ok, None] ** 2
        return out


def cutoff_partition(domain, centers, ball_radii, support_radii, samples=20_000, seed=0,
                     boundary_points=None):
    """Smooth partition of unity on ``domain`` from radial bumps.

    Each φ_j is supported in the ball of radius ``support_radii[j]`` about
    ``centers[j]``, leaving a margin β_j = ball_radii[j] - support_radii[j].
    The W^{1,∞} norm of each φ_j is the max of |φ_j| and |∇φ_j| over domain
    samples; ``profile_w1inf`` is the bound for the single bump from dense 1D
    sampling of the profile.
    """
    C = np.atleast_2d(np.asarray(centers, float))
    R = np.atleast_1d(np.asarray(ball_radii, float))
    rho = np.atleast_1d(np.asarray(support_radii, float))
    if not (len(C) == len(R) == len(rho)):
        raise InvalidInputError("centers and radii must have matching lengths")
    if np.any(rho <= 0) or np.any(rho > R):
        raise ParameterError("support radii must lie in (0, ball radius]")
    rng = np.random.default_rng(seed)
    lo, hi = domain.bbox()
    Xs = lo + (hi - lo) * rng.random((samples, len(lo)))
    Xs = Xs[domain.contains(Xs)]
    if boundary_points is not None:
        Xs = np.concatenate([Xs, np.atleast_2d(boundary_points)])
    d = np.sqrt(np.sum((Xs[:, None, :] - C[None]) ** 2, axis=2))
    if np.any(np.all(d >= rho[None], axis=1)):
        raise CoverError("some domain points lie outside every cutoff support")
    out = []
    for j in range(len(C)):
        proto = Cutoff(j, C, rho, float(R[j]), float(R[j] - rho[j]))
        vals = proto(Xs)
        g = np.linalg.norm(proto.gradient(Xs), axis=1)
        w = max(float(np.max(np.abs(vals))), float(np.max(g)))
        prof = max(_PROFILE_MAX, _PROFILE_DMAX / rho[j])
        out.append(Cutoff(j, C, rho, float(R[j]), float(R[j] - rho[j]), w, prof))
    return out


def polygon_boundary_points(polygon, per_edge=200):
    V = polygon.vertices
    t = np.linspace(0, 1, per_edge, endpoint=False)[:, None]
    return np.concatenate([V[i] + t * (V[(i + 1) % len(V)] - V[i]) for i in range(len(V))])
