"""Lipschitz boundary functions f: R^{n-1} -> R and their McShane extension."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import DomainError, InvalidInputError

_QUOTIENT_SLACK = 1e-12


def _as_points(xp, dim):
    xp = np.asarray(xp, dtype=float)
    if dim == 1:
        if xp.ndim == 2 and xp.shape[-1] == 1:
            xp = xp[:, 0]
        return xp
    return np.atleast_2d(xp)


@dataclass(frozen=True, eq=False)
class LipschitzFn:
    """A boundary function with a certified Lipschitz bound.

    Use the constructors :meth:`affine`, :meth:`piecewise_linear`, :meth:`analytic`
    rather than instantiating directly. Evaluation takes ``(m,)`` arrays when
    ``dim == 1`` and ``(m, dim)`` arrays otherwise.
    """

    kind: str
    lipschitz_constant: float
    dim: int = 1
    native_interval: Optional[tuple] = None
    slope: tuple = ()
    offset: float = 0.0
    knots: Optional[tuple] = None
    func: Optional[Callable] = field(default=None, repr=False)

    # -- constructors -------------------------------------------------------
    @classmethod
    def affine(cls, slope, offset=0.0):
        slope = tuple(float(v) for v in np.atleast_1d(slope))
        M = float(np.linalg.norm(slope))
        return cls("affine", M, dim=len(slope), slope=slope, offset=float(offset))

    @classmethod
    def constant(cls, value=0.0, dim=1):
        return cls.affine(np.zeros(dim), value)

    @classmethod
    def piecewise_linear(cls, xs, ys, lipschitz_constant=None):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or len(xs) < 2:
            raise InvalidInputError("piecewise-linear knots must be matching 1D arrays")
        if np.any(np.diff(xs) <= 0):
            raise InvalidInputError("knots must be strictly increasing")
        exact = float(np.max(np.abs(np.diff(ys) / np.diff(xs))))
        M = exact if lipschitz_constant is None else float(lipschitz_constant)
        if exact > M * (1 + _QUOTIENT_SLACK) + _QUOTIENT_SLACK:
            raise InvalidInputError(f"slopes reach {exact}, above the stated bound {M}")
        return cls("piecewise_linear", M, dim=1, native_interval=(xs[0], xs[-1]),
                   knots=(tuple(xs), tuple(ys)))

    @classmethod
    def analytic(cls, func, lipschitz_constant, dim=1, native_interval=None,
                 check_samples=2001):
        """Wrap a vectorized callable. The bound is checked on sampled quotients."""
        f = cls("analytic", float(lipschitz_constant), dim=dim,
                native_interval=None if native_interval is None else tuple(map(float, native_interval)),
                func=func)
        if dim == 1 and check_samples:
            lo, hi = native_interval if native_interval is not None else (-1.0, 1.0)
            q = f.max_sampled_quotient(lo, hi, check_samples)
            if q > f.lipschitz_constant * (1 + _QUOTIENT_SLACK) + _QUOTIENT_SLACK:
                raise InvalidInputError(f"sampled difference quotient {q} exceeds M={lipschitz_constant}")
        return f

    def shifted(self, c):
        """The function f + c (same Lipschitz constant)."""
        c = float(c)
        if self.kind == "affine":
            return LipschitzFn("affine", self.M, dim=self.dim, slope=self.slope, offset=self.offset + c)
        if self.kind == "piecewise_linear":
            xs, ys = self.knots
            return LipschitzFn("piecewise_linear", self.M, dim=1, native_interval=self.native_interval,
                               knots=(xs, tuple(y + c for y in ys)))
        base = self
        knots = None if self.knots is None else (self.knots[0], tuple(y + c for y in self.knots[1]))
        return LipschitzFn(self.kind, self.M, dim=self.dim, native_interval=self.native_interval,
                           knots=knots, func=lambda x: base(x) + c)

    # -- evaluation -----------------------------------------------------------
    @property
    def M(self):
        return self.lipschitz_constant

    def __call__(self, xp):
        xp = _as_points(xp, self.dim)
        if self.native_interval is not None and self.dim == 1:
            lo, hi = self.native_interval
            if np.any((xp < lo - 1e-12) | (xp > hi + 1e-12)):
                raise DomainError(f"argument outside native interval [{lo}, {hi}]")
        if self.kind == "affine":
            if self.dim == 1:
                return self.slope[0] * xp + self.offset
            return xp @ np.asarray(self.slope) + self.offset
        if self.kind == "piecewise_linear":
            xs, ys = self.knots
            return np.interp(xp, xs, ys)
        return np.asarray(self.func(xp), dtype=float)

    @property
    def kinks(self):
        """Breakpoints where the function may fail to be smooth (1D only)."""
        if self.knots is not None:
            return np.asarray(self.knots[0])
        return np.zeros(0)

    def max_sampled_quotient(self, lo, hi, samples=2001):
        x = np.linspace(lo, hi, samples)
        y = self(x)
        return float(np.max(np.abs(np.diff(y) / np.diff(x))))

    def max_on(self, lo, hi):
        """Maximum over the box [lo, hi] in R^{dim} (upper bound for analytic kinds)."""
        return self._extremum(lo, hi, np.max, +1)

    def min_on(self, lo, hi):
        return self._extremum(lo, hi, np.min, -1)

    def _extremum(self, lo, hi, pick, sign):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.kind == "affine":
            s = np.asarray(self.slope)
            corner = np.where(sign * s >= 0, hi, lo)
            return float(corner @ s + self.offset)
        if self.dim == 1:
            lo1, hi1 = float(lo[0]), float(hi[0])
            if self.knots is not None:
                k = self.kinks
                pts = np.concatenate([[lo1, hi1], k[(k > lo1) & (k < hi1)]])
                return float(pick(self(pts)))
            pts = np.linspace(lo1, hi1, 257)
            margin = self.M * (hi1 - lo1) / 256 / 2
            return float(pick(self(pts))) + sign * margin
        axes = [np.linspace(a, b, 33) for a, b in zip(lo, hi)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        margin = self.M * np.linalg.norm((hi - lo) / 32) / 2
        return float(pick(self(pts))) + sign * margin


def mcshane_extend(f: LipschitzFn, M: Optional[float] = None, samples: int = 4001) -> LipschitzFn:
    """Extend a 1D M-Lipschitz function from its native interval to all of R.

    Uses ``min_y f(y) + M|x - y|`` over native sample points; inside the native
    interval the original values are returned unchanged.
    """
    if f.dim != 1:
        raise InvalidInputError("McShane extension implemented for n-1 = 1 only")
    if f.native_interval is None:
        raise InvalidInputError("function has no native interval to extend from")
    M = f.lipschitz_constant if M is None else float(M)
    lo, hi = f.native_interval
    y = np.linspace(lo, hi, samples)
    if f.kind == "piecewise_linear":
        kx, ky = (np.asarray(k, float) for k in f.knots)
        # samples within round-off of a knot would inflate the quotients
        near = np.min(np.abs(y[:, None] - kx[None, :]), axis=1) < 1e-9 * (hi - lo)
        y = np.sort(np.concatenate([kx, y[~near]]))
        q = float(np.max(np.abs(np.diff(ky) / np.diff(kx))))
    else:
        q = None
    fy = f(y)
    if q is None:
        q = float(np.max(np.abs(np.diff(fy) / np.diff(y))))
    if q > M * (1 + _QUOTIENT_SLACK) + _QUOTIENT_SLACK:
        raise InvalidInputError(f"difference quotient {q} on the native interval exceeds M={M}")

    def extended(x, _f=f, _y=y, _fy=fy, _M=M, _lo=lo, _hi=hi):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        inside = (x >= _lo) & (x <= _hi)
        if np.any(inside):
            out[inside] = _f(x[inside])
        xo = x[~inside]
        if xo.size:
            vals = np.empty(xo.shape)
            for start in range(0, xo.size, 512):
                chunk = xo[start:start + 512]
                vals[start:start + 512] = np.min(_fy[None, :] + _M * np.abs(chunk[:, None] - _y[None, :]), axis=1)
            out[~inside] = vals
        return out

    return LipschitzFn("mcshane", M, dim=1, native_interval=None, func=extended,
                       knots=f.knots if f.kind == "piecewise_linear" else None)
