import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from fracorn.errors import DomainError, ParameterError
from fracorn.fields import AnalyticField, GridField, cutoff_partition, field_library, random_rigid
from fracorn.geometry import Box, LipschitzFn, half_space, scaled
from fracorn.quadrature import make_grid
from fracorn.seminorms import (FracParams, gagliardo, guarded_ratio, hardy_lhs, hardy_ratio,
                               lemma_a2_integral, lemma_a2_profile, loglog_slope, lp_norm, perienergy,
                               product_ratio, projected)

INV_DIST_SQUARE = 4 * (math.log(1 + math.sqrt(2)) - (math.sqrt(2) - 1) / 3)


def test_params_validation():
    with pytest.raises(ParameterError):
        FracParams(1.0, 2.0)
    with pytest.raises(ParameterError):
        FracParams(0.5, 1.0)
    assert FracParams(0.5, 2.0).regime == "ps=1"
    assert FracParams(0.3, 2.0).regime == "ps<1"
    assert FracParams(0.7, 3.0).regime == "ps>1"


def test_identity_gagliardo_closed_form(unit_grid16, P52):
    # |x|_W^2 with s = 1/2, p = 2 is ∬ |x - y|^-1 over the square
    raw = gagliardo(field_library("identity"), unit_grid16, P52).raw_p_power
    assert raw == pytest.approx(INV_DIST_SQUARE, rel=0.02)


@pytest.mark.parametrize("s, p", [(0.5, 2.0), (0.3, 2.0), (0.7, 3.0), (0.2, 1.5)])
def test_identity_field_equality(unit_grid8, s, p):
    P = FracParams(s, p)
    u = field_library("identity")
    w, x = gagliardo(u, unit_grid8, P).value, projected(u, unit_grid8, P).value
    assert abs(w - x) <= 1e-12 * w


def test_rigid_fields_have_zero_projected_seminorm(unit_grid8, P52, rng):
    for _ in range(5):
        r = random_rigid(2, rng)
        assert projected(r, unit_grid8, P52).value < 1e-8 * gagliardo(r, unit_grid8, P52).value


def test_constants_vanish(unit_grid8, P52):
    c = field_library("constant", {"value": [2.0, -1.0]})
    assert gagliardo(c, unit_grid8, P52).value == 0.0
    assert projected(c, unit_grid8, P52).value == 0.0


@given(st.integers(0, 10_000), st.sampled_from([(0.5, 2.0), (0.3, 2.0), (0.7, 3.0), (0.4, 1.5)]))
def test_projected_never_exceeds_gagliardo(seed, sp):
    g = make_grid(Box.unit(2), 1 / 4)
    u = field_library("random_trig", {"seed": seed, "degree": 3})
    P = FracParams(*sp)
    assert projected(u, g, P).raw_p_power <= gagliardo(u, g, P).raw_p_power


@pytest.mark.parametrize("name", ["shear", "random_trig", "bump_gradient"])
def test_unnormalized_form_agrees(unit_grid8, P52, name):
    u = field_library(name)
    a = projected(u, unit_grid8, P52).raw_p_power
    b = projected(u, unit_grid8, P52, form="unnormalized").raw_p_power
    assert b == pytest.approx(a, rel=1e-12)


@pytest.mark.parametrize("s", [0.2, 0.5, 0.9])
def test_peridynamic_energy_equals_projected_square(unit_grid8, s):
    u = field_library("random_trig", {"seed": 2})
    assert perienergy(u, unit_grid8, s) == pytest.approx(
        projected(u, unit_grid8, FracParams(s, 2.0)).raw_p_power, rel=1e-12)


def test_lp_norm_of_identity():
    g = make_grid(Box.unit(2), 1 / 32)
    assert lp_norm(field_library("identity"), g, 2.0) == pytest.approx(math.sqrt(2 / 3), rel=2e-4)


def test_one_dimensional_gagliardo_against_dblquad():
    s, p = 0.3, 2.0
    u = AnalyticField(lambda X: X ** 2, 1)
    exact, _ = integrate.dblquad(lambda y, x: (x + y) ** 2 * abs(x - y) ** (1 - 2 * s), 0, 1, 0, 1)
    g = make_grid(Box.unit(1), 1 / 64)
    got = gagliardo(u, g, FracParams(s, p, 1)).raw_p_power
    assert got == pytest.approx(exact, rel=5e-3)


def test_scaling_of_raw_p_powers(P52):
    u = field_library("random_trig", {"seed": 5})
    base = make_grid(Box.unit(2), 1 / 8)
    w1 = gagliardo(u, base, P52).raw_p_power
    for tau in (0.5, 2.0):
        g = make_grid(scaled(Box.unit(2), tau), tau / 8)
        wt = gagliardo(u.dilated(tau), g, P52).raw_p_power
        assert wt == pytest.approx(w1 * tau ** (2 - 1.0), rel=1e-12)


def test_isometry_invariance(P52):
    from fracorn.geometry import TransformedDomain, rotation_2d
    u = field_library("random_trig", {"seed": 8})
    ref = projected(u, make_grid(Box.unit(2), 1 / 8), P52).value
    R, t = rotation_2d(2.2), np.array([0.3, -4.0])
    g = make_grid(TransformedDomain(Box.unit(2), R, t), 1 / 8)
    assert projected(u.transformed(R, t), g, P52).value == pytest.approx(ref, rel=1e-10)


# -- Hardy-type integral ------------------------------------------------------------

@pytest.fixture(scope="module")
def half_grid():
    return make_grid(half_space(Box.from_bounds([0, 0], [1, 1])), 1 / 8)


def test_hardy_kills_rigid_motions(half_grid, P52, rng):
    f = LipschitzFn.constant(0.0)
    for _ in range(3):
        assert hardy_lhs(random_rigid(2, rng), f, 0.8, 1.2, half_grid, P52) == 0.0


def test_hardy_ratio_excludes_rigid(half_grid, P52):
    r = hardy_ratio(field_library("rigid", {"entries": [1.0], "b": [0, 0]}), LipschitzFn.constant(0.0),
                    0.8, 1.2, half_grid, P52)
    assert r.excluded and r.value == math.inf


def test_hardy_ratio_finite_for_identity(half_grid, P52):
    r = hardy_ratio(field_library("identity"), LipschitzFn.constant(0.0), 0.8, 1.2, half_grid, P52)
    assert 0 < r.value < math.inf and not r.excluded


def test_hardy_window_enlargement(half_grid, P52):
    u = field_library("identity")

    def factory(window):
        lo, hi = window
        return GridField.from_function(u, lo, hi, 1 / 16)
    v = hardy_lhs(factory, LipschitzFn.constant(0.0), 0.8, 1.2, half_grid, P52)
    assert v == pytest.approx(hardy_lhs(u, LipschitzFn.constant(0.0), 0.8, 1.2, half_grid, P52), rel=1e-12)
    with pytest.raises(DomainError):
        hardy_lhs(factory, LipschitzFn.constant(0.0), 0.8, 40.0, half_grid, P52, max_retries=1)


def test_guarded_ratio():
    assert guarded_ratio(1.0, 1e-15).excluded
    assert guarded_ratio(1.0, 2.0).value == 0.5


# -- localization ------------------------------------------------------------------

def test_product_ratio_is_finite(P52):
    g = make_grid(Box.unit(2), 1 / 8)
    cuts = cutoff_partition(Box.unit(2), [[0.25, 0.5], [0.75, 0.5]], [0.9, 0.9], [0.8, 0.8])
    r = product_ratio(cuts[0], field_library("shear"), g, P52)
    assert 0 < r.value < math.inf


# -- boundary-distance integral ------------------------------------------------------

@pytest.mark.parametrize("s, p", [(0.3, 2.0), (0.5, 2.0), (0.7, 3.0)])
def test_boundary_distance_exponent(s, p):
    P = FracParams(s, p)
    zs = np.array([[0.0, d] for d in np.geomspace(1e-3, 1e-1, 5)])
    d, I = zip(*lemma_a2_profile(LipschitzFn.constant(0.0), 0.9, P, zs))
    assert loglog_slope(d, I) == pytest.approx(-P.ps, abs=0.15)


def test_boundary_distance_integral_against_dblquad():
    P = FracParams(0.5, 2.0)
    lam, z = 0.9, np.array([0.0, 0.1])
    zm = np.array([0.0, -0.1 / lam])

    def integrand(r, t):
        y = np.array([t, r])
        return np.sum((z - y) ** 2) / np.sum((zm - y) ** 2) ** ((2 + 2 + 1) / 2)
    exact, _ = integrate.dblquad(integrand, -10, 10, 0, 10, epsabs=1e-12, epsrel=1e-10)
    got = lemma_a2_integral(LipschitzFn.constant(0.0), lam, P, z, radius=10.0)
    assert got == pytest.approx(exact, rel=1e-6)


def test_boundary_distance_rejects_points_below():
    with pytest.raises(DomainError):
        lemma_a2_integral(LipschitzFn.constant(0.0), 0.9, FracParams(0.5, 2.0), [0.0, -0.1])
