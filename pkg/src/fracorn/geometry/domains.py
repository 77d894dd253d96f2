"""Region descriptors: boxes, truncated epigraphs, wedges, convex polygons.

Every domain exposes a closed membership predicate ``contains(X)`` on ``(m, n)``
arrays, an axis-aligned ``bbox()`` and ``volume()``. Domains are immutable.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ..errors import InvalidInputError, InvalidPolygonError, ParameterError
from .lipschitz import LipschitzFn

_EDGE_TOL = 1e-12


def _points(X, n):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[-1] != n:
        raise InvalidInputError(f"expected points of dimension {n}, got shape {X.shape}")
    return X


class Domain:
    kind = "domain"
    dim: int

    def contains(self, X):
        raise NotImplementedError

    def bbox(self):
        raise NotImplementedError

    def volume(self):
        raise NotImplementedError

    @property
    def scale(self):
        lo, hi = self.bbox()
        return float(np.max(hi - lo))


@dataclass(frozen=True, eq=False)
class Box(Domain):
    center: tuple
    halfwidths: tuple
    kind = "box"

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        w = tuple(float(v) for v in self.halfwidths)
        if len(c) != len(w) or len(c) < 1:
            raise InvalidInputError("center and halfwidths must have the same length")
        if min(w) <= 0:
            raise ParameterError("box halfwidths must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "halfwidths", w)

    @classmethod
    def from_bounds(cls, lo, hi):
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        return cls(tuple((lo + hi) / 2), tuple((hi - lo) / 2))

    @classmethod
    def unit(cls, n=2):
        return cls((0.5,) * n, (0.5,) * n)

    @property
    def dim(self):
        return len(self.center)

    @property
    def lo(self):
        return np.asarray(self.center) - np.asarray(self.halfwidths)

    @property
    def hi(self):
        return np.asarray(self.center) + np.asarray(self.halfwidths)

    def contains(self, X):
        X = _points(X, self.dim)
        return np.all((X >= self.lo) & (X <= self.hi), axis=1)

    def bbox(self):
        return self.lo, self.hi

    def volume(self):
        return float(np.prod(2 * np.asarray(self.halfwidths)))


def _graph_volume(f, lo, hi, below):
    """Volume of {x in [lo, hi] : x_n >= f(x')} (or <= when ``below``)."""
    bot, top = lo[-1], hi[-1]

    def height(*xp):
        v = float(f(np.array(xp) if f.dim > 1 else np.array([xp[0]]))[0])
        v = min(max(v, bot), top)
        return (v - bot) if below else (top - v)

    if f.dim == 1:
        pts = [k for k in f.kinks if lo[0] < k < hi[0]]
        val, _ = integrate.quad(height, lo[0], hi[0], points=pts or None, limit=400,
                                epsabs=1e-13, epsrel=1e-12)
        return float(val)
    ranges = [(a, b) for a, b in zip(lo[:-1], hi[:-1])]
    val, _ = integrate.nquad(height, ranges, opts={"limit": 100, "epsrel": 1e-10})
    return float(val)


@dataclass(frozen=True, eq=False)
class Epigraph(Domain):
    """Truncated epigraph {x in box : x_n >= f(x')}.

    ``box`` is the truncation window. The untruncated epigraph is what
    :meth:`in_untruncated` tests, and is used by Whitney cover checks.
    """

    f: LipschitzFn
    box: Box
    kind = "epigraph"

    def __post_init__(self):
        if self.box.dim != self.f.dim + 1:
            raise InvalidInputError("box dimension must be f.dim + 1")

    @property
    def dim(self):
        return self.box.dim

    @property
    def M(self):
        return self.f.M

    def graph(self, X):
        X = _points(X, self.dim)
        xp = X[:, 0] if self.dim == 2 else X[:, :-1]
        return self.f(xp)

    def height(self, X):
        """Signed vertical distance x_n - f(x')."""
        X = _points(X, self.dim)
        return X[:, -1] - self.graph(X)

    def in_untruncated(self, X):
        return self.height(X) >= 0

    def contains(self, X):
        X = _points(X, self.dim)
        out = self.box.contains(X)
        if np.any(out):
            out[out] = self.height(X[out]) >= 0
        return out

    def bbox(self):
        return self.box.bbox()

    def volume(self):
        lo, hi = self.box.bbox()
        return _graph_volume(self.f, lo, hi, below=False)


@dataclass(frozen=True, eq=False)
class Subgraph(Epigraph):
    """Region below the graph, {x in box : f(x') - depth <= x_n <= f(x')} (a window of D₋).

    ``depth=None`` means the box bottom is the only lower limit.
    """

    depth: float = None
    kind = "subgraph"

    def in_untruncated(self, X):
        return self.height(X) <= 0

    def contains(self, X):
        X = _points(X, self.dim)
        out = self.box.contains(X)
        if np.any(out):
            t = self.height(X[out])
            ok = t <= 0
            if self.depth is not None:
                ok &= t >= -self.depth
            out[out] = ok
        return out

    def volume(self):
        lo, hi = self.box.bbox()
        below = _graph_volume(self.f, lo, hi, below=True)
        if self.depth is None:
            return below
        return below - _graph_volume(self.f.shifted(-self.depth), lo, hi, below=True)


def half_space(box: Box) -> Epigraph:
    """{x_n >= 0} truncated to ``box``."""
    return Epigraph(LipschitzFn.constant(0.0, box.dim - 1), box)


def extension_window(epi: Epigraph, mu: float):
    """Windows for D₋ and for D ∪ D₋ compatible with the truncation of ``epi``.

    Points of D₋ are kept down to depth (top - max f)/mu below the graph, so
    their images under Φ_η, η <= mu, stay inside ``epi.box``. Returns the
    pair (minus, union), both sharing the x' extent of ``epi.box``.
    """
    lo, hi = epi.box.bbox()
    fmin = epi.f.min_on(lo[:-1], hi[:-1])
    fmax = epi.f.max_on(lo[:-1], hi[:-1])
    depth = (hi[-1] - fmax) / mu
    if depth <= 0:
        raise ParameterError("epigraph window has no room above the graph")
    new_lo = lo.copy()
    new_lo[-1] = fmin - depth
    minus_hi = hi.copy()
    minus_hi[-1] = fmax
    minus = Subgraph(epi.f, Box.from_bounds(new_lo, minus_hi), depth=depth)
    union = Epigraph(epi.f.shifted(-depth), Box.from_bounds(new_lo, hi))
    return minus, union


@dataclass(frozen=True, eq=False)
class WedgeBand(Domain):
    """{0 <= x1 <= radius, lower <= x2 - alpha x1 <= upper}: a sheared strip."""

    alpha: float
    radius: float = 1.0
    lower: float = 0.0
    upper: float = 1.0
    kind = "wedge_band"
    dim = 2

    def __post_init__(self):
        if not self.radius > 0 or not self.upper > self.lower:
            raise ParameterError("truncation must have positive area")

    @property
    def M(self):
        return abs(self.alpha)

    @property
    def f(self):
        return LipschitzFn.affine([self.alpha], 0.0)

    def height(self, X):
        X = _points(X, 2)
        return X[:, 1] - self.alpha * X[:, 0]

    def contains(self, X):
        X = _points(X, 2)
        t = self.height(X)
        return ((X[:, 0] >= 0) & (X[:, 0] <= self.radius)
                & (t >= self.lower) & (t <= self.upper))

    def bbox(self):
        R, a = self.radius, self.alpha
        ys = [self.lower, self.upper, a * R + self.lower, a * R + self.upper]
        return np.array([0.0, min(ys)]), np.array([R, max(ys)])

    def volume(self):
        return self.radius * (self.upper - self.lower)


class Angular(WedgeBand):
    """Planar wedge {x1 > 0, x2 > alpha x1}, closed and truncated.

    The truncation is the parallelogram 0 <= x1 <= radius,
    0 <= x2 - alpha x1 <= radius, the image of [0, radius]² under
    (x1, x2) -> (x1, x2 + alpha x1).
    """

    kind = "angular"

    def __init__(self, alpha, radius=1.0):
        super().__init__(float(alpha), float(radius), 0.0, float(radius))

    def in_untruncated(self, X):
        X = _points(X, 2)
        return (X[:, 0] >= 0) & (self.height(X) >= 0)


class AngularMinus(WedgeBand):
    """The other side {x1 > 0, x2 < alpha x1}, down to ``depth`` below the line."""

    kind = "angular_minus"

    def __init__(self, alpha, radius=1.0, depth=1.0):
        super().__init__(float(alpha), float(radius), -float(depth), 0.0)

    @property
    def depth(self):
        return -self.lower

    def in_untruncated(self, X):
        X = _points(X, 2)
        return (X[:, 0] >= 0) & (self.height(X) <= 0)


def angular_window(ang: Angular, mu: float):
    """(minus, union) windows for the wedge, analogous to :func:`extension_window`."""
    depth = ang.radius / mu
    return (AngularMinus(ang.alpha, ang.radius, depth),
            WedgeBand(ang.alpha, ang.radius, -depth, ang.radius))


@dataclass(frozen=True, eq=False)
class ConvexPolygon(Domain):
    """Strictly convex polygon with counter-clockwise vertices."""

    vertices: np.ndarray = field(repr=False)
    kind = "polygon"
    dim = 2

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        if V.ndim == 1:
            V = V.reshape(-1, 2)
        if V.ndim != 2 or V.shape[1] != 2 or len(V) < 3:
            raise InvalidPolygonError("need at least three 2D vertices")
        e1 = np.roll(V, -1, axis=0) - V
        e0 = V - np.roll(V, 1, axis=0)
        cross = e0[:, 0] * e1[:, 1] - e0[:, 1] * e1[:, 0]
        scale = np.linalg.norm(e0, axis=1) * np.linalg.norm(e1, axis=1)
        if np.any(scale == 0):
            raise InvalidPolygonError("repeated vertex")
        if np.any(cross <= 1e-12 * scale):
            raise InvalidPolygonError("vertices must be strictly convex and counter-clockwise")
        # a star-shaped self-intersecting path passes the local test; total turning must be 2π
        turn = np.sum(np.arctan2(cross, np.sum(e0 * e1, axis=1)))
        if not np.isclose(turn, 2 * np.pi):
            raise InvalidPolygonError("vertex path winds more than once")
        V.setflags(write=False)
        object.__setattr__(self, "vertices", V)

    def contains(self, X):
        X = _points(X, 2)
        V = self.vertices
        E = np.roll(V, -1, axis=0) - V
        tol = _EDGE_TOL * self.scale
        out = np.ones(len(X), dtype=bool)
        for v, e in zip(V, E):
            c = e[0] * (X[:, 1] - v[1]) - e[1] * (X[:, 0] - v[0])
            out &= c >= -tol * np.hypot(*e)
        return out

    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def volume(self):
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return float(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def interior_angles(self):
        V = self.vertices
        a = np.roll(V, 1, axis=0) - V
        b = np.roll(V, -1, axis=0) - V
        cos = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        return np.arccos(np.clip(cos, -1, 1))


@dataclass(frozen=True, eq=False)
class TransformedDomain(Domain):
    """Image {L y + shift : y in base} of a domain under an invertible affine map."""

    base: Domain
    linear: np.ndarray = field(repr=False)
    shift: np.ndarray = field(repr=False)
    kind = "transformed"

    def __post_init__(self):
        L = np.asarray(self.linear, dtype=float)
        b = np.asarray(self.shift, dtype=float).reshape(-1)
        n = self.base.dim
        if L.shape != (n, n) or b.shape != (n,):
            raise InvalidInputError("linear map and shift must match the base dimension")
        if abs(np.linalg.det(L)) < 1e-14:
            raise ParameterError("linear map is singular")
        object.__setattr__(self, "linear", L)
        object.__setattr__(self, "shift", b)
        object.__setattr__(self, "_inv", np.linalg.inv(L))

    @property
    def dim(self):
        return self.base.dim

    def to_base(self, X):
        X = _points(X, self.dim)
        return (X - self.shift) @ self._inv.T

    def from_base(self, Y):
        Y = _points(Y, self.dim)
        return Y @ self.linear.T + self.shift

    def contains(self, X):
        return self.base.contains(self.to_base(X))

    def bbox(self):
        lo, hi = self.base.bbox()
        n = self.dim
        corners = np.array([[hi[i] if (m >> i) & 1 else lo[i] for i in range(n)]
                            for m in range(2 ** n)])
        img = self.from_base(corners)
        return img.min(axis=0), img.max(axis=0)

    def volume(self):
        return self.base.volume() * abs(float(np.linalg.det(self.linear)))


def scaled(domain: Domain, tau: float, center=None) -> TransformedDomain:
    """Dilation x -> center + tau (x - center); default center is the origin."""
    n = domain.dim
    c = np.zeros(n) if center is None else np.asarray(center, float)
    return TransformedDomain(domain, tau * np.eye(n), c - tau * c)
