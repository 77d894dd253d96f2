import numpy as np
import pytest

from fracorn.errors import CoverError, DomainError, InvalidInputError, ParameterError
from fracorn.fields import (AnalyticField, BasisSet, GridField, ProductField, RigidMotion, cutoff_partition,
                            field_library, fields_basis, make_basis, make_rigid, random_rigid,
                            rigid_basis, skew_entries, skew_from_entries)
from fracorn.geometry import Box, ConvexPolygon, rotation_2d
from fracorn.fields import polygon_boundary_points


def test_skew_roundtrip_and_sign_convention():
    A = skew_from_entries([1.0], 2)
    np.testing.assert_array_equal(A, [[0, 1], [-1, 0]])
    # A12 = 1 sends (1, 0) to (0, -1)
    np.testing.assert_array_equal(A @ [1.0, 0.0], [0.0, -1.0])
    B = skew_from_entries([1.0, 2.0, 3.0], 3)
    np.testing.assert_array_equal(B, -B.T)
    np.testing.assert_array_equal(skew_entries(B), [1.0, 2.0, 3.0])


def test_rigid_motion_evaluation(rng):
    r = make_rigid([0.5], [1.0, -1.0])
    X = rng.uniform(size=(10, 2))
    np.testing.assert_allclose(r(X), X @ r.A.T + [1.0, -1.0])
    assert random_rigid(3, rng).n == 3


def test_rigid_basis_layout():
    B = rigid_basis(2, center=[0.5, 0.5])
    assert len(B) == 3
    np.testing.assert_allclose(B[2](np.array([[0.5, 0.5]])), [[0.0, 0.0]])


@pytest.mark.parametrize("name", ["identity", "shear", "bump_gradient", "trig", "random_trig", "constant",
                                  "component_power", "rigid", "concentrated"])
def test_library_shapes(name, rng):
    u = field_library(name)
    X = rng.uniform(size=(7, 2))
    assert u(X).shape == (7, 2)
    assert np.all(np.isfinite(u(X)))


def test_library_errors():
    with pytest.raises(InvalidInputError):
        field_library("nope")
    with pytest.raises(InvalidInputError):
        field_library("shear", {"bogus": 1})


def test_random_trig_reproducible(rng):
    X = rng.uniform(size=(5, 2))
    a = field_library("random_trig", {"seed": 4})(X)
    b = field_library("random_trig", {"seed": 4})(X)
    np.testing.assert_array_equal(a, b)


def test_field_algebra_and_pushforward(rng):
    u, v = field_library("shear"), field_library("identity")
    X = rng.uniform(size=(6, 2))
    np.testing.assert_allclose((u + 2 * v)(X), u(X) + 2 * v(X))
    np.testing.assert_allclose((u - v)(X), u(X) - v(X))
    R, c = rotation_2d(0.4), np.array([1.0, 2.0])
    np.testing.assert_allclose(u.transformed(R, c)(X @ R.T + c), u(X) @ R.T, atol=1e-14)
    np.testing.assert_allclose(u.dilated(2.0)(2 * X), u(X))


def test_grid_field_interpolates_linear_fields_exactly(rng):
    u = field_library("identity")
    g = GridField.from_function(u, [0, 0], [1, 1], 0.25)
    X = rng.uniform(size=(20, 2))
    np.testing.assert_allclose(g(X), X, atol=1e-14)
    with pytest.raises(DomainError):
        g(np.array([[1.5, 0.5]]))


def test_product_field_zero_outside_support():
    psi = lambda X: np.where(X[:, 0] < 0.5, 1.0, 0.0)
    calls = []

    def ones(X):
        calls.append(len(X))
        return np.ones_like(X)
    pf = ProductField(psi, AnalyticField(ones, 2))
    out = pf(np.array([[0.2, 0.0], [0.8, 0.0]]))
    np.testing.assert_array_equal(out, [[1, 1], [0, 0]])
    assert calls == [1]


def test_basis_nested_ordering():
    b2 = make_basis(Box.unit(2), 2)
    b3 = make_basis(Box.unit(2), 3)
    X = np.random.default_rng(0).uniform(size=(9, 2))
    np.testing.assert_array_equal(b3.values(X)[:, :b2.size], b2.values(X))
    assert b2.n_rigid == 3
    # the constant mode is left out: translations already span it
    assert b2.size == 3 + 2 * 8


def test_basis_field_is_linear(rng):
    b = make_basis(Box.unit(2), 1)
    c = rng.standard_normal(b.size)
    X = rng.uniform(size=(4, 2))
    np.testing.assert_allclose(b.field(c)(X), np.einsum("mbn,b->mn", b.values(X), c))
    np.testing.assert_allclose(b.element(0)(X), b.values(X)[:, 0])


def test_fields_basis_wraps_list(rng):
    fb = fields_basis([field_library("identity"), field_library("shear")])
    X = rng.uniform(size=(3, 2))
    assert fb.values(X).shape == (3, 2, 2)


def test_cutoff_partition_of_unity_on_square():
    sq = ConvexPolygon([[0, 0], [1, 0], [1, 1], [0, 1]])
    C = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]], float)
    cuts = cutoff_partition(sq, C, [0.8] * 5, [0.7] * 5, boundary_points=polygon_boundary_points(sq))
    X = np.random.default_rng(1).uniform(size=(2000, 2))
    total = sum(c(X) for c in cuts)
    np.testing.assert_allclose(total, 1.0, atol=1e-12)
    for c in cuts:
        assert c.w1inf >= 1.0 - 1e-12
        far = np.linalg.norm(X - c.centers[c.index], axis=1) >= c.support[c.index]
        assert np.all(c(X[far]) == 0.0)


def test_cutoff_gradient_matches_finite_differences():
    sq = ConvexPolygon([[0, 0], [1, 0], [1, 1], [0, 1]])
    cuts = cutoff_partition(sq, [[0.3, 0.3], [0.7, 0.7]], [1.2, 1.2], [1.0, 1.0])
    x = np.array([[0.45, 0.55]])
    e = 1e-6
    fd = np.array([(cuts[0](x + e * d) - cuts[0](x - e * d))[0] / (2 * e) for d in np.eye(2)])
    np.testing.assert_allclose(cuts[0].gradient(x)[0], fd, rtol=1e-6)


def test_cutoff_gap_raises():
    with pytest.raises(CoverError):
        cutoff_partition(Box.unit(2), [[0.0, 0.0]], [0.3], [0.2])
    with pytest.raises(ParameterError):
        cutoff_partition(Box.unit(2), [[0.0, 0.0]], [0.3], [0.5])
