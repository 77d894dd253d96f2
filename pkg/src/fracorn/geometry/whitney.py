"""Whitney covers of truncated epigraphs (dyadic cubes) and wedges (parallelograms).

A cell is stored in "cube coordinates": an anchor (lower corner) and side ``a``.
For cube cells the physical cell is ``anchor + [0, a]^n``. For parallelogram
cells it is the image of that cube under phi(x1, x2) = (x1, x2 + alpha x1).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import CoverError, ParameterError
from .domains import Angular, Epigraph

_BISECT_STEPS = 60


@dataclass(frozen=True)
class Cell:
    anchor: tuple
    side: float
    generation: int
    shape: str = "cube"
    clipped: bool = False

    @property
    def center(self):
        return np.asarray(self.anchor) + self.side / 2


@dataclass(frozen=True, eq=False)
class WhitneyCover:
    cells: tuple
    domain: object
    c1: int
    c2: float
    alpha: float = 0.0
    uncovered_side: float = 0.0
    _anchors: np.ndarray = field(default=None, repr=False)
    _sides: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        A = np.array([c.anchor for c in self.cells], dtype=float)
        S = np.array([c.side for c in self.cells], dtype=float)
        # lexicographic anchor order gives the face tie-break for free
        object.__setattr__(self, "_anchors", A)
        object.__setattr__(self, "_sides", S)

    @property
    def shape(self):
        return "parallelogram" if isinstance(self.domain, Angular) else "cube"

    @property
    def dim(self):
        return self._anchors.shape[1]

    def __len__(self):
        return len(self.cells)

    def to_cube(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.shape == "cube":
            return X
        Y = X.copy()
        Y[:, 1] -= self.alpha * X[:, 0]
        return Y

    def from_cube(self, Y):
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if self.shape == "cube":
            return Y
        X = Y.copy()
        X[:, 1] += self.alpha * Y[:, 0]
        return X

    def membership(self, X, doubled=False):
        """Boolean (m, ncells) matrix. Doubled cells follow the cover's convention."""
        Y = self.to_cube(X)
        A, S = self._anchors, self._sides
        if doubled:
            if self.shape == "cube":
                lo, hi = A - S[:, None] / 2, A + 1.5 * S[:, None]
            else:
                lo, hi = A, A + 2 * S[:, None]
        else:
            lo, hi = A, A + S[:, None]
        inside = np.ones((len(Y), len(A)), dtype=bool)
        for d in range(Y.shape[1]):
            inside &= (Y[:, d, None] >= lo[None, :, d]) & (Y[:, d, None] <= hi[None, :, d])
        return inside

    def locate(self, X):
        """Index of the owning cell per point, -1 if none.

        Closed cells; a point on a shared face goes to the lexicographically
        smallest anchor among the cells containing it.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.full(len(X), -1, dtype=int)
        for start in range(0, len(X), 4096):
            M = self.membership(X[start:start + 4096])
            for i, row in enumerate(M):
                idx = np.flatnonzero(row)
                if idx.size:
                    keys = self._anchors[idx]
                    best = idx[np.lexsort(keys.T[::-1])[0]]
                    out[start + i] = best
        return out

    def sample_cell(self, i, m, rng):
        Y = self._anchors[i] + self._sides[i] * rng.random((m, self.dim))
        return self.from_cube(Y)


def _epigraph_cells(domain: Epigraph, min_generation):
    f = domain.f
    lo, hi = domain.box.bbox()
    n = domain.dim
    extent = float(np.max(hi - lo))
    k0 = int(np.ceil(np.log2(extent)))
    if k0 < min_generation:
        raise ParameterError("min_generation is coarser than the truncation window")
    a0 = 2.0 ** k0
    counts = np.ceil((hi - lo) / a0 - 1e-12).astype(int)
    stack = []
    for idx in np.ndindex(*counts):
        stack.append((lo + a0 * np.asarray(idx), k0))
    cells = []
    while stack:
        anchor, k = stack.pop()
        a = 2.0 ** k
        qlo, qhi = anchor, anchor + a
        # drop cubes missing the window or lying entirely below the graph
        if np.any(qlo >= hi) or np.any(qhi <= lo):
            continue
        if qhi[-1] < f.min_on(qlo[:-1], qhi[:-1]):
            continue
        dlo, dhi = anchor - a / 2, anchor + 1.5 * a
        if dlo[-1] >= f.max_on(dlo[:-1], dhi[:-1]):
            clipped = bool(np.any(qlo < lo - 1e-12) or np.any(qhi > hi + 1e-12))
            cells.append(Cell(tuple(anchor), a, k, "cube", clipped))
            continue
        if k <= min_generation:
            continue
        for corner in np.ndindex(*(2,) * n):
            stack.append((anchor + (a / 2) * np.asarray(corner), k - 1))
    return cells


def _angular_cells(domain: Angular, min_generation):
    R = domain.radius
    kmax = int(np.floor(np.log2(R))) - 1
    cells = []
    for k in range(kmax, min_generation - 1, -1):
        a = 2.0 ** k
        row_lo = a
        ncol = int(np.ceil(R / a - 1e-12))
        for j in range(ncol):
            anchor = (j * a, row_lo)
            clipped = (j + 1) * a > R + 1e-12 or row_lo + a > R + 1e-12
            cells.append(Cell(anchor, a, k, "parallelogram", clipped))
    # the top strip [2^(kmax+1), R] is covered by cells of the largest generation
    top = 2.0 ** (kmax + 1)
    a = 2.0 ** kmax
    y = top
    while y < R - 1e-12:
        for j in range(int(np.ceil(R / a - 1e-12))):
            clipped = (j + 1) * a > R + 1e-12 or y + a > R + 1e-12
            cells.append(Cell((j * a, y), a, kmax, "parallelogram", clipped))
        y += a
    return cells


def _measure_c2(cover: WhitneyCover):
    """Smallest t >= 1 such that every t-scaled cell (about its centre) meets the graph."""
    dom = cover.domain
    if isinstance(dom, Angular):
        # in cube coordinates the graph is x2 = 0; scaling commutes with the shear
        c = cover._anchors[:, 1] + cover._sides / 2
        return float(np.max(2 * c / cover._sides)) if len(cover) else 1.0
    f = dom.f
    worst = 1.0
    for anchor, a in zip(cover._anchors, cover._sides):
        ctr = anchor + a / 2

        def meets(t):
            half = t * a / 2
            return f.max_on(ctr[:-1] - half, ctr[:-1] + half) >= ctr[-1] - half

        lo_t, hi_t = 1.0, 2.0
        while not meets(hi_t):
            hi_t *= 2
            if hi_t > 1e6:
                raise CoverError("cell does not approach the graph")
        for _ in range(_BISECT_STEPS):
            mid = 0.5 * (lo_t + hi_t)
            lo_t, hi_t = (lo_t, mid) if meets(mid) else (mid, hi_t)
        worst = max(worst, hi_t)
    return worst


def _measure_c1(cover: WhitneyCover, points, rng):
    lo = cover._anchors.min(axis=0)
    hi = (cover._anchors + cover._sides[:, None]).max(axis=0)
    Y = lo + (hi - lo) * rng.random((points, cover.dim))
    X = cover.from_cube(Y)
    best = 0
    for start in range(0, points, 2000):
        best = max(best, int(cover.membership(X[start:start + 2000], doubled=True).sum(axis=1).max()))
    return best


def build_whitney_cover(domain, truncation=None, min_generation=-6, overlap_points=100_000,
                        seed=0):
    """Whitney cover of a truncated epigraph or wedge.

    Epigraph: dyadic cubes of the window are accepted as soon as the centred
    doubled cube lies on or above the graph, otherwise split, down to side
    ``2**min_generation``. Wedge: rows of identical cubes of side 2^k on the
    strips 2^k <= x2 <= 2^(k+1) of [0, R]², sheared onto the wedge.

    ``truncation`` overrides the domain's own window (a Box for epigraphs,
    a radius for wedges). Both c1 and c2 are measured on the result.
    """
    if isinstance(domain, Angular):
        if truncation is not None:
            domain = Angular(domain.alpha, float(truncation))
        if not np.isfinite(domain.radius):
            raise ParameterError("wedge cover needs a finite truncation radius")
        cells = _angular_cells(domain, min_generation)
        alpha = float(domain.alpha)
    elif isinstance(domain, Epigraph):
        if truncation is not None:
            domain = type(domain)(domain.f, truncation)
        lo, hi = domain.box.bbox()
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ParameterError("epigraph cover needs a bounded truncation box")
        cells = _epigraph_cells(domain, min_generation)
        alpha = 0.0
    else:
        raise ParameterError(f"no Whitney cover for domain kind {getattr(domain, 'kind', domain)!r}")
    if not cells:
        raise CoverError("no cell fits in the truncation window")
    cells.sort(key=lambda c: c.anchor)
    cover = WhitneyCover(tuple(cells), domain, c1=0, c2=1.0, alpha=alpha,
                         uncovered_side=2.0 ** min_generation)
    rng = np.random.default_rng(seed)
    c2 = _measure_c2(cover)
    c1 = _measure_c1(cover, overlap_points, rng)
    return WhitneyCover(tuple(cells), domain, c1=c1, c2=c2, alpha=alpha,
                        uncovered_side=2.0 ** min_generation)


@dataclass
class CoverReport:
    disjoint: bool
    doubled_inside: bool
    c1: int
    c2: float
    lower_ok: bool
    upper_ok: bool
    min_lower_slack: float
    min_upper_slack: float

    @property
    def ok(self):
        return self.disjoint and self.doubled_inside and self.lower_ok and self.upper_ok


def check_cover(cover: WhitneyCover, samples_per_cell=100, seed=1):
    """Verify disjointness, doubled-cell inclusion and the distance bounds.

    The bounds are a/2 <= |x_n - f(x')| <= c2 sqrt(n) (2 + M) a for sampled x in
    each cell, with the cover's measured c2.
    """
    dom = cover.domain
    A, S = cover._anchors, cover._sides
    n = cover.dim
    hi = A + S[:, None]
    sep = np.zeros((len(A), len(A)), dtype=bool)
    for d in range(n):
        sep |= (hi[:, None, d] <= A[None, :, d]) | (hi[None, :, d] <= A[:, None, d])
    np.fill_diagonal(sep, True)
    disjoint = bool(np.all(sep))

    if isinstance(dom, Angular):
        doubled_inside = bool(np.all(A >= 0))
        M = abs(dom.alpha)
    else:
        f = dom.f
        M = f.M
        doubled_inside = all(
            a_[-1] - s / 2 >= f.max_on(a_[:-1] - s / 2, a_[:-1] + 1.5 * s)
            for a_, s in zip(A, S))

    rng = np.random.default_rng(seed)
    lower, upper = np.inf, np.inf
    for i in range(len(A)):
        X = cover.sample_cell(i, samples_per_cell, rng)
        dist = np.abs(dom.height(X))
        a = S[i]
        lower = min(lower, float(np.min(dist - a / 2)) / a)
        upper = min(upper, float(np.min(cover.c2 * np.sqrt(n) * (2 + M) * a - dist)) / a)
    return CoverReport(disjoint, doubled_inside, cover.c1, cover.c2,
                       lower >= -1e-12, upper >= -1e-12, lower, upper)
