"""The bi-Lipschitz maps Φ_η across a graph and the appendix distance lemma."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, ParameterError
from .lipschitz import LipschitzFn

_SIDE_TOL = 1e-12


def _split(f, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != f.dim + 1:
        raise DomainError(f"points must have dimension {f.dim + 1}")
    xp = X[:, 0] if f.dim == 1 else X[:, :-1]
    return X, f(xp)


@dataclass(frozen=True, eq=False)
class PhiMap:
    """Φ_η(x) = (x', f(x') + η (f(x') - x_n)), or the graph-side map.

    ``direction="forward"`` maps D₋ onto D (a reflection stretched by η).
    ``direction="graph"`` is Φ*_η(x) = (x', f + η (x_n - f)), which keeps each side.
    """

    f: LipschitzFn
    eta: float
    direction: str = "forward"

    def __post_init__(self):
        if not self.eta > 0:
            raise ParameterError(f"eta must be positive, got {self.eta}")
        if self.direction not in ("forward", "graph"):
            raise ParameterError(f"unknown direction {self.direction!r}")

    @property
    def dim(self):
        return self.f.dim + 1

    def __call__(self, X, check=True):
        X, fx = _split(self.f, X)
        t = X[:, -1] - fx
        if self.direction == "forward":
            if check and np.any(t > _SIDE_TOL * (1 + np.abs(fx))):
                raise DomainError("phi_forward expects points on or below the graph")
            new = fx - self.eta * t
        else:
            new = fx + self.eta * t
        out = X.copy()
        out[:, -1] = new
        return out

    def inverse(self, X, check=True):
        X, fx = _split(self.f, X)
        t = X[:, -1] - fx
        if self.direction == "forward":
            if check and np.any(t < -_SIDE_TOL * (1 + np.abs(fx))):
                raise DomainError("phi inverse expects points on or above the graph")
            new = fx - t / self.eta
        else:
            new = fx + t / self.eta
        out = X.copy()
        out[:, -1] = new
        return out

    def jacobian_det(self):
        # triangular Jacobian: identity on x', last diagonal entry -η (or η)
        return -self.eta if self.direction == "forward" else self.eta

    def gradient_norm(self, inverse=False):
        return phi_gradient_norm(self, inverse=inverse)


def phi_forward(phi: PhiMap, X):
    return phi(X)


def phi_inverse(phi: PhiMap, X):
    return phi.inverse(X)


def phi_gradient_norm(phi: PhiMap, inverse=False):
    """Frobenius-norm bound of ∇Φ_η (or of its inverse) over the whole space."""
    eta = float(phi.eta)
    if not eta > 0:
        raise ParameterError("eta must be positive")
    n, M = phi.dim, phi.f.M
    if inverse:
        eta = 1.0 / eta
    return float(np.sqrt(n - 1 + eta ** 2 + (1 + eta) ** 2 * M ** 2))


def lemma_a1_ratio(f: LipschitzFn, lam, X, Y):
    """|x - y| / |Φ_λ⁻¹(x) - y| for x, y in D; coincident points give 0."""
    phi = PhiMap(f, lam)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    Xm = phi.inverse(X)
    num = np.linalg.norm(X - Y, axis=1)
    den = np.linalg.norm(Xm - Y, axis=1)
    out = np.zeros_like(num)
    nz = num > 0
    out[nz] = num[nz] / den[nz]
    return out


def lemma_a1_bound(M, lam):
    """Constant C(λ, M) with |x - y| <= C |Φ_λ⁻¹(x) - y| for x, y above the graph.

    Two cases. If |x' - y'| >= ε|x - y| then C = 1/ε works since Φ⁻¹ keeps x'.
    Otherwise the vertical gap y_n - (Φ_λ⁻¹ x)_n dominates, and with
    κ = min(1, 1/λ) and ε = κ / (2(κ(1+M) + M)) one gets C = 2/κ.
    """
    if not lam > 0 or M < 0:
        raise ParameterError("need lam > 0 and M >= 0")
    kappa = min(1.0, 1.0 / lam)
    eps = min(0.5, kappa / (2 * (kappa * (1 + M) + M)))
    return max(1.0 / eps, 2.0 / kappa)
