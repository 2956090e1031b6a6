import math

import numpy as np
import pytest

from ptorsion.quadrature import (
    QuadratureError,
    QuadratureSpec,
    composite_gauss_legendre,
    gauss_legendre,
    integrate,
    integrate_panels,
    log_gauss_legendre,
)


@pytest.mark.parametrize("f, a, b, exact", [
    (np.sin, 0.0, math.pi, 2.0),
    (np.exp, -1.0, 2.0, math.e**2 - math.exp(-1)),
    (lambda x: np.sqrt(x), 0.0, 1.0, 2 / 3),
    (lambda x: 1 / (1 + x * x), -10.0, 10.0, 2 * math.atan(10.0)),
])
def test_adaptive_integral_matches_antiderivative(f, a, b, exact):
    spec = QuadratureSpec(abs_tolerance=1e-13)
    assert integrate(f, a, b, spec) == pytest.approx(exact, abs=1e-12)


def test_empty_interval_is_zero():
    assert integrate(np.exp, 1.5, 1.5) == 0.0


def test_non_convergence_carries_estimate():
    spec = QuadratureSpec(abs_tolerance=1e-15, max_subdivisions=4)
    with pytest.raises(QuadratureError) as info:
        integrate(lambda x: np.abs(x - 1 / 3) ** 0.5, 0.0, 1.0, spec)
    assert info.value.estimate > 1e-15


@pytest.mark.parametrize("kwargs", [
    {"abs_tolerance": 0.0}, {"max_subdivisions": 3}, {"method": "simpson"},
])
def test_quadrature_settings_validation(kwargs):
    with pytest.raises(ValueError):
        QuadratureSpec(**kwargs)


def test_panels_sum_to_whole():
    edges = np.linspace(0.0, 2.0, 33)
    pieces = integrate_panels(lambda x: x ** 1.5, edges)
    assert pieces.sum() == pytest.approx(2 ** 2.5 / 2.5, abs=1e-12)
    exact = (edges[1:] ** 2.5 - edges[:-1] ** 2.5) / 2.5
    np.testing.assert_allclose(pieces, exact, atol=1e-13)


def test_fixed_rules_broadcast():
    a = np.array([0.0, 1.0])
    b = np.array([1.0, 3.0])
    np.testing.assert_allclose(gauss_legendre(lambda x: x**3, a, b), (b**4 - a**4) / 4)
    np.testing.assert_allclose(composite_gauss_legendre(np.cos, a, b, 4), np.sin(b) - np.sin(a))


def test_log_substitution_handles_reciprocal():
    a = np.array([1e-12, 1e-3, 0.5])
    np.testing.assert_allclose(log_gauss_legendre(lambda s: 1 / s, a, np.ones(3)), -np.log(a),
                               rtol=1e-13)
    with pytest.raises(ValueError):
        log_gauss_legendre(lambda s: s, [0.0], [1.0])
