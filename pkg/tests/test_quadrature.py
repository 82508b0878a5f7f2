import math

import numpy as np
import pytest

from sphere_feynman.quadrature import (
    MIN_PANELS,
    OscillatorySpec,
    PanelRule,
    QuadratureError,
    choose_panels,
    integrate_1d,
    integrate_with_error,
)


def test_constant_and_cosine():
    assert integrate_1d(np.ones_like, PanelRule(10, 8, 0.0, 2.0)) == pytest.approx(2.0, abs=1e-15)
    assert integrate_1d(np.cos, PanelRule(10, 8, 0.0, math.pi / 2)) == pytest.approx(1.0, abs=1e-14)


def test_quadratic_phase_converged():
    spec = OscillatorySpec(0.01, 3.0)
    rule = choose_panels(spec, 0)
    f = lambda x: np.exp(1j * x * x / (2 * spec.t_phase))
    ref = integrate_1d(f, rule.refined(10))
    assert abs(integrate_1d(f, rule) - ref) < 1e-9


def test_leading_axes_are_kept():
    rule = PanelRule(8, 4, 0.0, 1.0)
    out = integrate_1d(lambda x: np.stack([x, x**2]), rule)
    np.testing.assert_allclose(out, [0.5, 1 / 3])


def test_error_estimate_small_for_smooth_integrand():
    val, err = integrate_with_error(np.exp, PanelRule(10, 8, 0.0, 1.0))
    assert val == pytest.approx(math.e - 1)
    assert err < 1e-13


def test_choose_panels_floor_and_growth():
    assert choose_panels(OscillatorySpec(100.0, 1.0), 0).panels == MIN_PANELS
    a = choose_panels(OscillatorySpec(0.1, 2.0), 5).panels
    assert choose_panels(OscillatorySpec(0.05, 2.0), 5).panels > a
    assert choose_panels(OscillatorySpec(0.1, 2.0), 50).panels > a


def test_conjugate_integrand():
    rule = PanelRule(10, 20, 0.0, 2.0)
    f = lambda x: np.exp(1j * 7 * x) * x
    assert integrate_1d(lambda x: np.conj(f(x)), rule) == pytest.approx(np.conj(integrate_1d(f, rule)))


def test_non_finite_integrand_raises():
    with pytest.raises(QuadratureError, match="non-finite"):
        integrate_1d(lambda x: np.where(x > 0.5, np.nan, x), PanelRule(4, 2, 0.0, 1.0))


def test_rule_validation():
    with pytest.raises(ValueError):
        PanelRule(10, 0, 0.0, 1.0)
    with pytest.raises(ValueError):
        PanelRule(10, 2, 1.0, 1.0)
    with pytest.raises(ValueError):
        OscillatorySpec(0.0, 1.0)
