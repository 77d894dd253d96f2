import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracorn.errors import DomainError, InvalidInputError, InvalidPolygonError
from fracorn.geometry import (Angular, Box, ConvexPolygon, Epigraph, LipschitzFn, PhiMap,
                              TransformedDomain, build_whitney_cover, check_cover, extension_window,
                              half_space, lemma_a1_bound, lemma_a1_ratio, mcshane_extend,
                              phi_gradient_norm, rigid_chart_map, rotation_2d, scaled)

slopes = st.floats(-3, 3, allow_nan=False)
etas = st.floats(0.05, 3.0)


# -- boundary functions ---------------------------------------------------------------

def test_affine_constant_and_shift():
    f = LipschitzFn.affine([0.5], 1.0)
    assert f.M == 0.5
    np.testing.assert_allclose(f(np.array([0.0, 2.0])), [1.0, 2.0])
    np.testing.assert_allclose(f.shifted(-1.0)(np.array([2.0])), [1.0])
    assert LipschitzFn.constant(3.0).M == 0.0


def test_piecewise_linear_lipschitz_constant_and_kinks():
    f = LipschitzFn.piecewise_linear([0, 1, 2], [0.0, 2.0, 1.5])
    assert f.M == pytest.approx(2.0)
    assert list(f.kinks) == [0.0, 1.0, 2.0]
    assert f.max_on(np.array([0.0]), np.array([2.0])) == pytest.approx(2.0)


def test_outside_native_interval_raises():
    f = LipschitzFn.piecewise_linear([0, 1], [0.0, 1.0])
    with pytest.raises(DomainError):
        f(np.array([1.5]))


def test_analytic_checks_the_bound():
    with pytest.raises(InvalidInputError):
        LipschitzFn.analytic(np.sin, 0.5, native_interval=(-3, 3))
    f = LipschitzFn.analytic(np.sin, 1.0, native_interval=(-3, 3))
    assert f.M == 1.0


def _mcshane_brute(xs, ys, M, x):
    # y -> f(y) + M|x - y| is piecewise linear with breaks at the knots and at x
    xc = np.clip(x, xs[0], xs[-1])
    cand = np.column_stack([ys[None, :] + M * np.abs(x[:, None] - xs[None, :]),
                            np.interp(xc, xs, ys) + M * np.abs(x - xc)])
    return cand.min(axis=1)


def test_mcshane_matches_brute_force():
    xs = np.array([0.0, 0.3, 0.7, 1.0])
    ys = np.array([0.0, 0.4, 0.1, 0.3])
    f = LipschitzFn.piecewise_linear(xs, ys)
    g = mcshane_extend(f)
    x = np.linspace(-2, 3, 401)
    np.testing.assert_allclose(g(x), _mcshane_brute(xs, ys, f.M, x), atol=1e-12)
    inside = np.linspace(0, 1, 101)
    np.testing.assert_allclose(g(inside), f(inside), atol=1e-12)


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=6))
def test_mcshane_keeps_lipschitz_constant(vals):
    xs = np.linspace(0, 1, len(vals))
    f = LipschitzFn.piecewise_linear(xs, vals)
    g = mcshane_extend(f)
    x = np.sort(np.random.default_rng(0).uniform(-3, 4, 300))
    gx = g(x)
    q = np.abs(np.diff(gx)) / np.diff(x)
    assert np.all(q <= f.M * (1 + 1e-9) + 1e-12)


# -- domains -------------------------------------------------------------------------

def test_box_and_half_space_volume():
    assert Box.unit(2).volume() == 1.0
    assert half_space(Box.from_bounds([0, 0], [2, 1])).volume() == pytest.approx(2.0)


def test_epigraph_volume_matches_monte_carlo():
    f = LipschitzFn.piecewise_linear([0, 0.5, 1], [0.2, 0.6, 0.3])
    dom = Epigraph(f, Box.from_bounds([0, 0], [1, 1]))
    X = np.random.default_rng(3).uniform(0, 1, (400_000, 2))
    mc = np.mean(X[:, 1] >= np.interp(X[:, 0], [0, 0.5, 1], [0.2, 0.6, 0.3]))
    assert dom.volume() == pytest.approx(mc, abs=3e-3)
    assert dom.volume() == pytest.approx(1 - 0.425, abs=1e-10)  # trapezoid rule is exact here


def test_polygon_shoelace_and_angles():
    sq = ConvexPolygon([[0, 0], [1, 0], [1, 1], [0, 1]])
    assert sq.volume() == pytest.approx(1.0)
    np.testing.assert_allclose(sq.interior_angles(), [math.pi / 2] * 4)
    tri = ConvexPolygon([[0, 0], [2, 0], [0, 1]])
    assert tri.volume() == pytest.approx(1.0)
    assert sum(tri.interior_angles()) == pytest.approx(math.pi)


@pytest.mark.parametrize("verts", [
    [[0, 0], [0, 1], [1, 1], [1, 0]],          # clockwise
    [[0, 0], [1, 0], [2, 0], [1, 1]],          # collinear
    [[0, 0], [2, 0], [0.5, 0.5], [0, 2]],      # reflex
])
def test_polygon_rejects_bad_input(verts):
    with pytest.raises(InvalidPolygonError):
        ConvexPolygon(verts)


def test_transformed_domain_roundtrip(rng):
    R = rotation_2d(0.3)
    D = TransformedDomain(Box.unit(2), 2 * R, np.array([1.0, -1.0]))
    X = rng.uniform(0, 1, (50, 2))
    np.testing.assert_allclose(D.to_base(D.from_base(X)), X, atol=1e-14)
    assert D.volume() == pytest.approx(4.0)
    assert scaled(Box.unit(2), 0.5).volume() == pytest.approx(0.25)


def test_angular_contains():
    A = Angular(1.0, 1.0)
    assert A.contains(np.array([[0.5, 0.6]]))[0]
    assert not A.contains(np.array([[0.5, 0.4]]))[0]


def test_extension_window_follows_graph():
    f = LipschitzFn.affine([0.5], 0.2)
    minus, union = extension_window(Epigraph(f, Box.from_bounds([0, 0], [1, 2])), 1.2)
    x = np.linspace(0, 1, 11)
    below = np.column_stack([x, f(x) - 1e-3])
    assert np.all(minus.contains(below)) and np.all(union.contains(below))


# -- maps ----------------------------------------------------------------------------

@given(slopes, etas)
def test_phi_inverse_roundtrip(m, eta):
    f = LipschitzFn.affine([m], 0.1)
    phi = PhiMap(f, eta)
    X = np.random.default_rng(1).uniform(-1, 1, (40, 2))
    X[:, 1] = f(X[:, 0]) - np.abs(X[:, 1]) - 1e-3
    np.testing.assert_allclose(phi.inverse(phi(X)), X, atol=1e-12)


@pytest.mark.parametrize("direction, sign", [("forward", -1), ("graph", 1)])
def test_phi_jacobian_matches_finite_differences(direction, sign):
    f = LipschitzFn.affine([0.7], 0.0)
    phi = PhiMap(f, 1.3, direction)
    x = np.array([[0.2, -0.5]])
    e = 1e-6
    J = np.column_stack([(phi(x + e * d, check=False) - phi(x - e * d, check=False))[0] / (2 * e)
                         for d in np.eye(2)])
    assert np.linalg.det(J) == pytest.approx(phi.jacobian_det(), rel=1e-6)
    assert np.sign(phi.jacobian_det()) == sign
    assert np.linalg.norm(J) <= phi_gradient_norm(phi) + 1e-6


def test_phi_forward_rejects_points_above_graph():
    phi = PhiMap(LipschitzFn.constant(0.0), 1.0)
    with pytest.raises(DomainError):
        phi(np.array([[0.0, 1.0]]))


@given(st.floats(0, 3), st.floats(0.3, 1.5))
def test_lemma_a1_ratio_below_bound(M, lam):
    f = LipschitzFn.piecewise_linear([-2, 0, 2], [-2 * M, 0.0, -M])
    rng = np.random.default_rng(7)
    X = rng.uniform(-1, 1, (2000, 2))
    Y = rng.uniform(-1, 1, (2000, 2))
    X[:, 1] = f(X[:, 0]) + np.abs(X[:, 1])
    Y[:, 1] = f(Y[:, 0]) + np.abs(Y[:, 1])
    assert np.max(lemma_a1_ratio(f, lam, X, Y)) <= lemma_a1_bound(M, lam)


def test_lemma_a1_coincident_points_give_zero():
    f = LipschitzFn.constant(0.0)
    X = np.array([[0.3, 0.0]])
    assert lemma_a1_ratio(f, 1.0, X, X)[0] == 0.0


# -- Whitney covers ------------------------------------------------------------------

@pytest.mark.parametrize("dom", [
    half_space(Box.from_bounds([0, 0], [1, 1])),
    Epigraph(LipschitzFn.affine([0.5], 0.0), Box.from_bounds([0, 0], [1, 1.5])),
    Angular(0.5, 1.0), Angular(1.0, 1.0), Angular(2.0, 1.0),
])
def test_whitney_invariants(dom):
    cov = build_whitney_cover(dom, overlap_points=20_000)
    rep = check_cover(cov, samples_per_cell=30)
    assert rep.ok
    assert 1 <= cov.c1 <= 12


def test_half_space_cover_frozen_counts():
    # frozen from the construction: rows of 2^k cubes down to generation -6
    cov = build_whitney_cover(half_space(Box.from_bounds([0, 0], [1, 1])))
    assert len(cov) == 126
    assert cov.c2 == pytest.approx(3.0)


def test_locate_returns_containing_cell():
    cov = build_whitney_cover(Angular(1.0, 1.0), overlap_points=5000)
    X = cov.sample_cell(3, 20, np.random.default_rng(0))
    assert np.all(cov.locate(X) == 3)


# -- charts --------------------------------------------------------------------------

def test_unit_square_chart():
    sq = ConvexPolygon([[0, 0], [1, 0], [1, 1], [0, 1]])
    for j in range(4):
        T, alpha, r = rigid_chart_map(sq, j)
        assert abs(alpha) < 1e-12
        assert r == pytest.approx(0.5)
        np.testing.assert_allclose(T(sq.vertices[j][None]), [[0.0, 0.0]], atol=1e-15)


def test_chart_alpha_is_cot_of_angle():
    tri = ConvexPolygon([[0, 0], [1, 0], [0, 1]])
    angles = tri.interior_angles()
    for j in range(3):
        _, alpha, _ = rigid_chart_map(tri, j)
        assert alpha == pytest.approx(1 / math.tan(angles[j]), abs=1e-12)
