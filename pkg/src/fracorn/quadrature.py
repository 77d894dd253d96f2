"""Lattice grids on domains and quadrature of singular double integrals.

The target is

    I = ∬ g(x, y) / |x - y|^(n + beta) dx dy

over grid_x × grid_y. Cell pairs at lattice distance >= 2 use the midpoint
rule. Coincident and touching cell pairs use a precomputed reference stencil:
coincident pairs are split 2^n-fold recursively down to ``depth`` where the
remaining coincident sub-pairs are dropped; touching sub-pairs are split only
while their level is below ``adj_depth``; everything else is a midpoint leaf.
Summation is tiled with a fixed reduction order, so results do not depend on
the number of worker threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Callable, Optional

import numpy as np

from .errors import QuadratureError, ResolutionError, InvalidInputError
from .geometry.domains import TransformedDomain

TILE = 64
_MC_PER_DIM = {1: 256, 2: 32, 3: 8}
_MC_SEED = 20240229
_CORNER_EPS = 1e-10
_NEAR_BUDGET = 1 << 22


# -- grids -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Grid:
    """Cells of a lattice x = origin + frame @ (idx + xi), xi in [0, 1]^n.

    ``frame`` is h times an orthogonal matrix. Cells fully inside the domain
    have volume h^n and their centre as node; clipped cells carry a Monte Carlo
    volume and the centroid of their inside samples.
    """

    domain: object
    h: float
    origin: np.ndarray = field(repr=False)
    frame: np.ndarray = field(repr=False)
    idx: np.ndarray = field(repr=False)
    centers: np.ndarray = field(repr=False)
    volumes: np.ndarray = field(repr=False)
    clipped: np.ndarray = field(repr=False)
    _masks: dict = field(default_factory=dict, repr=False)

    @property
    def n(self):
        return self.frame.shape[0]

    @property
    def size(self):
        return len(self.volumes)

    def __len__(self):
        return self.size

    @property
    def total_volume(self):
        return math.fsum(self.volumes)

    def to_physical(self, ref):
        """Map lattice coordinates (…, n) to physical points."""
        return self.origin + np.asarray(ref, float) @ self.frame.T

    def lattice_key(self):
        return (self.origin, self.frame)

    def submask(self, depth):
        """Inside flags at every stencil sub-point of every cell, shape (N, |S|)."""
        if depth not in self._masks:
            ref = _subpoints(self.n, depth)
            mask = np.ones((self.size, len(ref)), dtype=bool)
            for i in np.flatnonzero(self.clipped):
                mask[i] = self.domain.contains(self.to_physical(self.idx[i] + ref))
            self._masks[depth] = mask
        return self._masks[depth]


def _stratified(n, q, rng):
    axes = np.stack(np.meshgrid(*[np.arange(q)] * n, indexing="ij"), axis=-1).reshape(-1, n)
    return (axes + rng.random(axes.shape)) / q


def _is_similarity(L):
    n = L.shape[0]
    G = L.T @ L
    tau2 = np.trace(G) / n
    tau = math.sqrt(tau2)
    if abs(tau - 1.0) < 1e-12:
        tau = 1.0  # rotations: keep the base spacing bitwise
    return np.allclose(G, tau2 * np.eye(n), atol=1e-12 * tau2), tau


def make_grid(domain, h, origin=None, mc_per_dim=None, min_cells=4):
    """Uniform lattice of spacing ``h`` restricted to ``domain``.

    ``origin`` fixes the lattice alignment (default: the lower bbox corner).
    For a TransformedDomain with a similarity map the grid of the base domain
    is built and mapped, so rigid motions and dilations act exactly on nodes.
    """
    if not h > 0:
        raise InvalidInputError("h must be positive")
    if isinstance(domain, TransformedDomain):
        ok, tau = _is_similarity(domain.linear)
        if ok:
            base_origin = None if origin is None else domain.to_base(np.asarray(origin, float))[0]
            g = make_grid(domain.base, h / tau, base_origin, mc_per_dim, min_cells)
            return Grid(domain, h, domain.linear @ g.origin + domain.shift, domain.linear @ g.frame,
                        g.idx, domain.from_base(g.centers), g.volumes * tau ** g.n, g.clipped)
    lo, hi = domain.bbox()
    n = len(lo)
    org = np.asarray(lo, float) if origin is None else np.asarray(origin, float)
    k_lo = np.floor((lo - org) / h + 1e-9).astype(int)
    k_hi = np.ceil((hi - org) / h - 1e-9).astype(int)
    counts = k_hi - k_lo
    if np.min(counts) < min_cells:
        raise ResolutionError(f"h={h} gives {counts.tolist()} cells per dimension, need >= {min_cells}")
    frame = h * np.eye(n)
    q = mc_per_dim or _MC_PER_DIM.get(n, 6)
    ref = _stratified(n, q, np.random.default_rng(_MC_SEED))
    # corners pulled in by 1e-10 h: a cell overhanging by round-off counts as full
    corners = np.array(list(product((_CORNER_EPS, 1.0 - _CORNER_EPS), repeat=n)))
    all_idx = np.stack(np.meshgrid(*[np.arange(a, b) for a, b in zip(k_lo, k_hi)], indexing="ij"),
                       axis=-1).reshape(-1, n)
    keep_idx, centers, vols, clipped = [], [], [], []
    chunk = max(1, 200_000 // len(ref))
    for start in range(0, len(all_idx), chunk):
        I = all_idx[start:start + chunk]
        pts = org + (I[:, None, :] + ref[None]) * h
        inside = domain.contains(pts.reshape(-1, n)).reshape(len(I), len(ref))
        cin = domain.contains((org + (I[:, None, :] + corners[None]) * h).reshape(-1, n))
        cin = cin.reshape(len(I), len(corners)).all(axis=1)
        frac = inside.mean(axis=1)
        for r in np.flatnonzero(frac > 0):
            full = frac[r] == 1.0 and cin[r]
            keep_idx.append(I[r])
            clipped.append(not full)
            if full:
                centers.append(org + (I[r] + 0.5) * h)
                vols.append(h ** n)
            else:
                P = pts[r][inside[r]]
                c = P.mean(axis=0)
                if not domain.contains(c[None])[0]:
                    c = P[np.argmin(np.sum((P - c) ** 2, axis=1))]
                centers.append(c)
                vols.append(frac[r] * h ** n)
    if not keep_idx:
        raise ResolutionError("no lattice cell meets the domain")
    return Grid(domain, float(h), org, frame, np.array(keep_idx), np.array(centers),
                np.array(vols), np.array(clipped, dtype=bool))


def cell_integral(grid: Grid, func):
    """Σ vol_i func(node_i) with func: (m, n) -> (m,)."""
    vals = np.asarray(func(grid.centers), dtype=float)
    return math.fsum(grid.volumes * vals)


# -- reference stencils --------------------------------------------------------

@lru_cache(maxsize=None)
def _subpoints(n, depth):
    """Centres of all dyadic sub-cells of [0,1]^n for levels 0..depth, level-major."""
    out = []
    for lvl in range(depth + 1):
        m = 2 ** lvl
        c = np.stack(np.meshgrid(*[np.arange(m)] * n, indexing="ij"), axis=-1).reshape(-1, n)
        out.append((c + 0.5) / m)
    pts = np.concatenate(out)
    pts.setflags(write=False)
    return pts


def _subpoint_id(n, lvl, c):
    base = sum(2 ** (n * k) for k in range(lvl))
    return base + np.ravel_multi_index(tuple(c.T), (2 ** lvl,) * n)


@dataclass(frozen=True)
class Stencil:
    a: np.ndarray       # sub-point ids in the first cell
    b: np.ndarray       # sub-point ids in the second cell
    delta: np.ndarray   # reference displacement y - x
    vol: np.ndarray     # reference volume product


@lru_cache(maxsize=None)
def near_stencil(n, d, depth, adj_depth):
    """Leaves of the recursive pair splitting for cells at lattice offset ``d``."""
    d = np.asarray(d, dtype=int)
    kids = np.array(list(product((0, 1), repeat=n)), dtype=int)
    P = np.zeros((1, n), dtype=int)
    Q = np.zeros((1, n), dtype=int)
    A, B, D, V = [], [], [], []
    for lvl in range(depth + 1):
        m = 2 ** lvl
        gap = Q + d * m - P
        coinc = np.all(gap == 0, axis=1)
        touch = (np.max(np.abs(gap), axis=1) <= 1) & ~coinc
        split = (coinc & (lvl < depth)) | (touch & (lvl < adj_depth))
        leaf = ~coinc & ~split
        if np.any(leaf):
            A.append(_subpoint_id(n, lvl, P[leaf]))
            B.append(_subpoint_id(n, lvl, Q[leaf]))
            D.append((gap[leaf]).astype(float) / m)
            V.append(np.full(int(leaf.sum()), float(m) ** (-2 * n)))
        if not np.any(split):
            break
        Ps, Qs = P[split], Q[split]
        shape = (len(Ps), len(kids), len(kids), n)
        P = np.broadcast_to(2 * Ps[:, None, None, :] + kids[None, :, None, :], shape).reshape(-1, n)
        Q = np.broadcast_to(2 * Qs[:, None, None, :] + kids[None, None, :, :], shape).reshape(-1, n)
    st = Stencil(np.concatenate(A), np.concatenate(B), np.concatenate(D), np.concatenate(V))
    for arr in (st.a, st.b, st.delta, st.vol):
        arr.setflags(write=False)
    return st


# -- kernel specification --------------------------------------------------------

def _scalar_reducer(g):
    def reduce(w, X, Y, FX, FY):
        vals = g(X, Y, FX, FY)
        terms = w * vals
        if not np.all(np.isfinite(terms)):
            k = int(np.flatnonzero(~np.isfinite(terms))[0])
            raise QuadratureError("non-finite integrand at an off-diagonal pair", pair=(X[k], Y[k]))
        return np.sum(terms)
    return reduce


@dataclass(frozen=True, eq=False)
class PairKernelSpec:
    """Integrand g(x, y, F(x), G(y)) / |x - y|^(n + beta).

    ``numerator(X, Y, FX, FY)`` works on (P, n) points and (P, k) field values.
    ``field_x``/``field_y`` map (m, n) points to (m, k) values; ``field_y``
    defaults to ``field_x``. ``reducer`` replaces the scalar sum w·g with any
    array-valued accumulation (e.g. Gram matrices); its partials are added in a
    fixed order. ``symmetric`` declares g(x, y, F, G) = g(y, x, G, F) and
    F = G, allowing the half-sum over a single grid.
    """

    beta: float
    numerator: Optional[Callable] = None
    field_x: Optional[Callable] = None
    field_y: Optional[Callable] = None
    depth: Optional[int] = None
    adj_depth: int = 2
    symmetric: bool = True
    reducer: Optional[Callable] = None

    def resolved_depth(self, n):
        if self.depth is not None:
            return int(self.depth)
        return 4 if n <= 2 else 2

    def make_reducer(self):
        if self.reducer is not None:
            return self.reducer
        if self.numerator is None:
            raise InvalidInputError("PairKernelSpec needs a numerator or a reducer")
        return _scalar_reducer(self.numerator)


def _no_field(P):
    return np.zeros((len(P), 0))


# -- double integral ------------------------------------------------------------------

def _combine(parts):
    if not parts:
        return 0.0
    if np.ndim(parts[0]) == 0:
        return math.fsum(float(p) for p in parts)
    return np.sum(np.stack(parts), axis=0)


def _check_compatible(gx: Grid, gy: Grid):
    if gx.n != gy.n:
        raise InvalidInputError("grids have different dimensions")
    if not np.allclose(gx.frame, gy.frame, rtol=0, atol=1e-14 * gx.h):
        raise InvalidInputError("grids must share the lattice frame")
    off = np.linalg.solve(gx.frame, gy.origin - gx.origin)
    if not np.allclose(off, np.round(off), atol=1e-9):
        raise InvalidInputError("grid origins differ by a non-lattice vector")
    return np.round(off).astype(int)


def _key(grid: Grid):
    return (grid.size, grid.centers.tobytes(), grid.volumes.tobytes())


class _Plan:
    """Everything needed to evaluate one double integral, shared by all tiles."""

    def __init__(self, gx, gy, spec, same):
        self.gx, self.gy, self.spec, self.same = gx, gy, spec, same
        self.n = gx.n
        self.beta = float(spec.beta)
        self.depth = spec.resolved_depth(self.n)
        self.reduce = spec.make_reducer()
        self.fx = spec.field_x or _no_field
        self.fy = (spec.field_y or spec.field_x) or _no_field
        self.swapped = False
        self.h = abs(np.linalg.det(gx.frame)) ** (1.0 / self.n)
        self.ref = _subpoints(self.n, self.depth)

    def call(self, w, X, Y, FX, FY):
        if self.swapped:
            return self.reduce(w, Y, X, FY, FX)
        return self.reduce(w, X, Y, FX, FY)

    # far field: midpoint rule on cell pairs with lattice distance >= 2
    def far_tile(self, task):
        I0, J0, factor = task
        gx, gy = self.gx, self.gy
        I = np.arange(I0, min(I0 + TILE, gx.size))
        J = np.arange(J0, min(J0 + TILE, gy.size))
        di = np.abs(gx.idx[I][:, None, :] - self.idx_y[J][None, :, :]).max(axis=2)
        far = di >= 2
        if self.same and I0 == J0:
            far &= ~np.eye(len(I), len(J), dtype=bool)
        ii, jj = np.nonzero(far)
        if ii.size == 0:
            return None
        X = gx.centers[I[ii]]
        Y = gy.centers[J[jj]]
        r = np.sqrt(np.sum((X - Y) ** 2, axis=1))
        w = gx.volumes[I[ii]] * gy.volumes[J[jj]] * r ** (-(self.n + self.beta))
        FX = self.FXc[I[ii]]
        FY = self.FYc[J[jj]]
        part = self.call(w, X, Y, FX, FY)
        return part * factor if factor != 1 else part

    # near field: reference stencil on lattice-adjacent cell pairs
    def near_chunk(self, task):
        d, pairs_i, pairs_j, factor = task
        st = near_stencil(self.n, d, self.depth, self.spec.adj_depth)
        gx, gy = self.gx, self.gy
        ua, inv_a = np.unique(st.a, return_inverse=True)
        ub, inv_b = np.unique(st.b, return_inverse=True)
        XA = gx.to_physical(gx.idx[pairs_i][:, None, :] + self.ref[ua][None])
        YB = gy.to_physical(gy.idx[pairs_j][:, None, :] + self.ref[ub][None])
        m = len(pairs_i)
        FA = np.asarray(self.fx(XA.reshape(-1, self.n))).reshape(m, len(ua), -1)
        FB = np.asarray(self.fy(YB.reshape(-1, self.n))).reshape(m, len(ub), -1)
        mask = self.mask_x[pairs_i][:, st.a] & self.mask_y[pairs_j][:, st.b]
        kern = st.vol * np.sqrt(np.sum(st.delta ** 2, axis=1)) ** (-(self.n + self.beta))
        w = (kern * self.h ** (self.n - self.beta))[None, :] * mask
        sel = mask.ravel()
        X = XA[:, inv_a].reshape(-1, self.n)[sel]
        Y = YB[:, inv_b].reshape(-1, self.n)[sel]
        FX = FA[:, inv_a].reshape(m * len(st.a), -1)[sel]
        FY = FB[:, inv_b].reshape(m * len(st.b), -1)[sel]
        part = self.call(w.ravel()[sel], X, Y, FX, FY)
        return part * factor if factor != 1 else part


def double_integral(grid_x: Grid, grid_y: Grid, spec: PairKernelSpec, threads: int = 1,
                    return_parts: bool = False):
    """∬ g / |x - y|^(n + beta) over grid_x × grid_y.

    Both grids must live on the same lattice. When they are the same object and
    the kernel is symmetric, each unordered cell pair is visited once and doubled.
    Otherwise the grids are put in a canonical order first, so swapping the
    arguments gives a bitwise-identical value for symmetric integrands.
    """
    same = grid_x is grid_y and spec.symmetric and spec.field_y in (None, spec.field_x)
    plan = _Plan(grid_x, grid_y, spec, same)
    if not same:
        _check_compatible(grid_x, grid_y)
        if _key(grid_y) < _key(grid_x):
            plan = _Plan(grid_y, grid_x, _swap_fields(spec), False)
            plan.swapped = True
    gx, gy = plan.gx, plan.gy
    shift = np.zeros(gx.n, dtype=int) if same else _check_compatible(gx, gy)
    plan.shift_y = shift
    plan.idx_y = gy.idx + shift  # gy cells in gx lattice coordinates
    plan.FXc = np.asarray(plan.fx(gx.centers)).reshape(gx.size, -1)
    plan.FYc = plan.FXc if same else np.asarray(plan.fy(gy.centers)).reshape(gy.size, -1)
    plan.mask_x = gx.submask(plan.depth)
    plan.mask_y = plan.mask_x if same else gy.submask(plan.depth)

    far_tasks = []
    for I0 in range(0, gx.size, TILE):
        for J0 in range(0, gy.size, TILE):
            if same and J0 < I0:
                continue
            far_tasks.append((I0, J0, 2.0 if same and J0 > I0 else 1.0))

    near_tasks = []
    lookup = {tuple(k): j for j, k in enumerate(plan.idx_y)}
    offsets = list(product((-1, 0, 1), repeat=gx.n))
    for d in offsets:
        if same and d < (0,) * gx.n:
            continue
        factor = 2.0 if same and any(d) else 1.0
        pi, pj = [], []
        for i, k in enumerate(gx.idx):
            j = lookup.get(tuple(k + d))
            if j is not None:
                pi.append(i)
                pj.append(j)
        if not pi:
            continue
        st = near_stencil(gx.n, d, plan.depth, spec.adj_depth)
        k_width = max(1, plan.FXc.shape[1])
        chunk = max(1, _NEAR_BUDGET // (len(st.a) * (2 * gx.n + 2 * k_width)))
        pi, pj = np.array(pi), np.array(pj)
        for s in range(0, len(pi), chunk):
            near_tasks.append((d, pi[s:s + chunk], pj[s:s + chunk], factor))

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            far = list(ex.map(plan.far_tile, far_tasks))
            near = list(ex.map(plan.near_chunk, near_tasks))
    else:
        far = [plan.far_tile(t) for t in far_tasks]
        near = [plan.near_chunk(t) for t in near_tasks]
    far_total = _combine([p for p in far if p is not None])
    near_total = _combine(near)
    total = _combine([far_total, near_total]) if np.ndim(far_total) == 0 else far_total + near_total
    if return_parts:
        return total, far_total, near_total
    return total


def _swap_fields(spec):
    fx, fy = spec.field_x, spec.field_y or spec.field_x
    return PairKernelSpec(spec.beta, spec.numerator, fy, fx, spec.depth, spec.adj_depth,
                          spec.symmetric, spec.reducer)


# -- convergence ---------------------------------------------------------------------

@dataclass
class ConvergenceTable:
    h: list
    values: list
    order: Optional[float]
    extrapolate: Optional[float]
    monotone: bool
    orders: list = field(default_factory=list)

    def rows(self):
        out = [{"h": h, "value": v} for h, v in zip(self.h, self.values)]
        out.append({"h": 0.0, "value": self.extrapolate, "order": self.order})
        return out


def richardson(hs, values):
    """Empirical order from the last three values and the extrapolated limit."""
    hs = [float(h) for h in hs]
    v = [float(x) for x in values]
    if len(v) < 3:
        raise InvalidInputError("need at least three grid sizes")
    orders = []
    for k in range(len(v) - 2):
        r = hs[k] / hs[k + 1]
        num, den = v[k] - v[k + 1], v[k + 1] - v[k + 2]
        orders.append(math.log(abs(num / den)) / math.log(r) if num != 0 and den != 0 else math.inf)
    q = orders[-1]
    r = hs[-2] / hs[-1]
    if math.isfinite(q) and q > 0:
        ext = v[-1] + (v[-1] - v[-2]) / (r ** q - 1)
    else:
        ext = v[-1]
    diffs = np.diff(v)
    monotone = bool(np.all(diffs >= 0) or np.all(diffs <= 0))
    return q, ext, monotone, orders


def convergence_study(value_fn, hs):
    """Tabulate value_fn(h) over a geometrically decreasing h sequence.

    ``value_fn`` is any callable h -> float, typically wrapping make_grid and
    double_integral or a seminorm.
    """
    hs = [float(h) for h in hs]
    if len(hs) < 3:
        raise InvalidInputError("need at least three grid sizes")
    ratios = [hs[k] / hs[k + 1] for k in range(len(hs) - 1)]
    if min(ratios) <= 1 or not np.allclose(ratios, ratios[0], rtol=1e-9):
        raise InvalidInputError("h sequence must decrease geometrically")
    vals = [float(value_fn(h)) for h in hs]
    q, ext, mono, orders = richardson(hs, vals)
    return ConvergenceTable(hs, vals, q, ext, mono, orders)
