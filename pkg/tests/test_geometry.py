import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphere_feynman.geometry import (
    AntipodeError,
    BumpProfile,
    Point3,
    action,
    bump,
    bump_deriv,
    corrected_residual_bracket,
    curvature_bracket,
    d_over_sin,
    geodesic_distance,
    kernel,
    pde_residual_analytic,
    pde_residual_numeric,
    residual_bracket,
    spherical_distance,
    van_vleck,
    van_vleck_numeric,
)

NORTH = Point3(0.0, 0.0, 1.0)


def test_point3_rejects_non_unit():
    with pytest.raises(ValueError):
        Point3(1.0, 1.0, 0.0)


@pytest.mark.parametrize(
    "p, q, expected",
    [
        (NORTH, NORTH, 0.0),
        (NORTH, Point3(0.0, 0.0, -1.0), math.pi),
        (Point3(1.0, 0.0, 0.0), Point3(0.0, 1.0, 0.0), math.pi / 2),
    ],
)
def test_geodesic_distance_examples(p, q, expected):
    assert geodesic_distance(p, q) == pytest.approx(expected, abs=1e-15)


def test_geodesic_distance_clamps_rounding():
    # slightly overlong vectors would give arccos(1 + eps) = nan without clamping
    v = np.array([0.6, 0.8, 0.0]) * (1 + 1e-15)
    assert geodesic_distance(v, v) == 0.0


@given(st.floats(0, math.pi), st.floats(0, 2 * math.pi), st.floats(0, math.pi), st.floats(0, 2 * math.pi))
def test_geodesic_distance_symmetric(t1, p1, t2, p2):
    a, b = Point3.from_spherical(t1, p1), Point3.from_spherical(t2, p2)
    assert geodesic_distance(a, b) == geodesic_distance(b, a)
    assert geodesic_distance(a, b) == pytest.approx(spherical_distance(t1, p1, t2, p2), abs=1e-7)


def test_action_examples():
    assert action(1, 0) == 0
    assert action(2, math.pi / 2) == pytest.approx(math.pi**2 / 16)
    assert action(-1, 1) == -0.5
    with pytest.raises(ValueError):
        action(0, 1.0)


def test_van_vleck_examples():
    assert van_vleck(1, 0.0) == 1.0
    assert van_vleck(1, 1e-9) == pytest.approx(1.0, rel=1e-15)
    assert van_vleck(1, math.pi / 2) == pytest.approx(math.pi / 2)
    assert van_vleck(2, math.pi / 2) == pytest.approx(math.pi / 8)


def test_van_vleck_rejects_antipode():
    with pytest.raises(AntipodeError):
        van_vleck(1, math.pi - 1e-7)
    # configurable guard
    assert van_vleck(1, math.pi - 1e-7, pole_guard=1e-8) > 1e6


def test_van_vleck_numeric_example():
    d = spherical_distance(1.0, 0.3, 1.8, 2.0)
    num = van_vleck_numeric(1, 1.0, 0.3, 1.8, 2.0, h=1e-4)
    assert num == pytest.approx(van_vleck(1, d), rel=1e-5)


def test_van_vleck_numeric_scales_as_inverse_t_squared():
    v1 = van_vleck_numeric(1, 1.0, 0.3, 1.8, 2.0)
    v3 = van_vleck_numeric(3, 1.0, 0.3, 1.8, 2.0)
    assert v3 == pytest.approx(v1 / 9, rel=1e-7)


def test_van_vleck_numeric_second_order():
    d = spherical_distance(1.0, 0.3, 1.8, 2.0)
    exact = van_vleck(1, d)
    e1 = abs(van_vleck_numeric(1, 1.0, 0.3, 1.8, 2.0, h=2e-3) - exact)
    e2 = abs(van_vleck_numeric(1, 1.0, 0.3, 1.8, 2.0, h=1e-3) - exact)
    assert e1 / e2 == pytest.approx(4.0, rel=0.05)


def test_van_vleck_numeric_preconditions():
    with pytest.raises(ValueError):
        van_vleck_numeric(1, 0.05, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        van_vleck_numeric(1, 1.0, 0.3, 1.0, 0.3)


@settings(max_examples=100, deadline=None)
@given(
    st.floats(0.3, 3.0),
    st.floats(0.1002, math.pi - 0.1002),
    st.floats(0, 2 * math.pi),
    st.floats(0.1002, math.pi - 0.1002),
    st.floats(0, 2 * math.pi),
)
def test_van_vleck_matches_finite_differences(t, th1, ph1, th2, ph2):
    d = spherical_distance(th1, ph1, th2, ph2)
    if not 0.05 <= d <= math.pi - 1e-3:
        return
    exact = van_vleck(t, d)
    assert exact > 0
    assert van_vleck_numeric(t, th1, ph1, th2, ph2, h=1e-4) == pytest.approx(exact, rel=1e-4)


def test_kernel_examples():
    k = kernel(1, 0.0)
    assert (k.amplitude, k.phase) == pytest.approx((1.0, 1 / 6))
    k = kernel(1, math.pi / 2)
    assert k.amplitude == pytest.approx(math.sqrt(math.pi / 2))
    assert k.phase == pytest.approx(math.pi**2 / 8 + 1 / 6)
    k = kernel(0.5, 0.0)
    assert (k.amplitude, k.phase) == pytest.approx((2.0, 1 / 12))


def test_kernel_value_is_amplitude_times_phase():
    k = kernel(0.7, 1.3)
    assert k.value == pytest.approx(k.amplitude * np.exp(1j * k.phase))


@given(st.floats(0.01, 5.0), st.floats(0.0, 3.0))
def test_kernel_modulus_even_in_t(t, d):
    a, b = kernel(t, d), kernel(-t, d)
    assert abs(a.value) == pytest.approx(abs(b.value), rel=1e-12)
    # negative time folds the sign of 1/t into the phase
    assert b.value == pytest.approx(np.sqrt(d_over_sin(d)) / -t * np.exp(1j * (d * d / (-2 * t) - t / 6)), rel=1e-9)


def test_small_d_series_against_high_precision():
    mp.mp.dps = 40
    for d in (1e-6, 1e-5, 5e-5, 9.9e-5, 1.01e-4, 1e-3):
        x = mp.mpf(d)
        assert float(d_over_sin(d)) == pytest.approx(float(x / mp.sin(x)), rel=1e-15)
    for d in (1e-6, 1e-4, 1e-2, 0.0999, 0.1001, 0.3, 1.0, 2.5):
        x = mp.mpf(d)
        ref = (x**2 - mp.sin(x) ** 2) / (8 * x**2 * mp.sin(x) ** 2)
        assert float(curvature_bracket(d)) == pytest.approx(float(ref), rel=1e-13)


def test_residual_bracket_limits():
    assert residual_bracket(0.0) == pytest.approx(1 / 6, abs=1e-15)
    assert residual_bracket(1e-8) == pytest.approx(1 / 6, abs=1e-15)
    mp.mp.dps = 40
    half_pi = mp.pi / 2
    expected = mp.mpf(1) / 8 + (half_pi**2 - 1) / (8 * half_pi**2)
    assert float(residual_bracket(math.pi / 2)) == pytest.approx(float(expected), rel=1e-15)
    assert float(expected) == pytest.approx(0.25 - 1 / (2 * math.pi**2), rel=1e-15)
    assert corrected_residual_bracket(0.0) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_pde_residual_matches_finite_differences(t):
    d = np.linspace(0.2, 2.5, 40)
    exact = pde_residual_analytic(t, d)
    num = pde_residual_numeric(t, d, h=1e-4)
    assert np.max(np.abs(num - exact) / np.abs(exact)) < 1e-4


def test_dewitt_phase_removes_constant_residual():
    d = np.array([0.2, 0.5, 1.0])
    k = kernel(1.0, d).value
    ratio = pde_residual_numeric(1.0, d, dewitt=True) / k
    np.testing.assert_allclose(ratio, corrected_residual_bracket(d), atol=1e-6)


def test_bump_examples():
    b = BumpProfile()
    assert bump(b, 0.0) == 1.0 and bump_deriv(b, 0.0) == 0.0
    assert bump(b, math.pi) == 0.0 and bump_deriv(b, math.pi) == 0.0
    mid = 0.5 * (b.r_flat + b.r_cut)
    assert 0.0 < bump(b, mid) < 1.0
    h = 1e-5
    fd = (bump(b, mid + h) - bump(b, mid - h)) / (2 * h)
    assert fd == pytest.approx(bump_deriv(b, mid), abs=1e-8)


def test_bump_flat_regions():
    b = BumpProfile(0.5, 2.0)
    d = np.linspace(0, 0.5, 50)
    assert np.all(b.value(d) == 1.0) and np.all(b.deriv(d) == 0.0)
    d = np.linspace(2.0, math.pi, 50)
    assert np.all(b.value(d) == 0.0) and np.all(b.deriv(d) == 0.0)
    d = np.linspace(0, math.pi, 2001)
    v = b.value(d)
    assert np.all((0 <= v) & (v <= 1)) and np.all(np.diff(v) <= 0)


@pytest.mark.parametrize("profile", [BumpProfile(), BumpProfile(0.3, 2.8), BumpProfile(1.0, 1.2)])
def test_bump_derivatives_by_finite_differences(profile):
    d = np.linspace(0, math.pi, 3001)
    h = 1e-6
    fd1 = (profile.value(d + h) - profile.value(d - h)) / (2 * h)
    fd2 = (profile.deriv(d + h) - profile.deriv(d - h)) / (2 * h)
    scale = 1 + np.max(np.abs(profile.second_deriv(d)))
    assert np.max(np.abs(fd1 - profile.deriv(d))) < 1e-6 * scale
    assert np.max(np.abs(fd2 - profile.second_deriv(d))) < 1e-5 * scale**1.5


def test_bump_profile_validation():
    with pytest.raises(ValueError):
        BumpProfile(2.0, 1.0)
    with pytest.raises(ValueError):
        BumpProfile(0.5, math.pi)
