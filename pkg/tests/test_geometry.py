import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptorsion.geometry import (
    ball_quantities,
    eta,
    half_gamma,
    make_profile,
    parse_profile,
    sphere_constant,
)
from ptorsion.quadrature import QuadratureError, QuadratureSpec


def test_preset_values():
    assert make_profile("euclidean", 2).rho(1.0) == 1.0
    sph = make_profile("spherical", 2)
    assert sph.max_radius == math.pi
    assert sph.rho(math.pi / 2) == pytest.approx(1.0)
    assert make_profile("hyperbolic", 2).rho(1.0) == pytest.approx(1.1752012, abs=1e-7)
    assert make_profile("hyperbolic", 3).max_radius == math.inf


@pytest.mark.parametrize("kind, n, t, expected", [
    ("euclidean", 2, 2.0, 0.5),
    ("euclidean", 3, 1.0, 2.0),
    ("hyperbolic", 2, 5.0, math.cosh(5) / math.sinh(5)),
])
def test_eta_examples(kind, n, t, expected):
    assert eta(make_profile(kind, n), t) == pytest.approx(expected, rel=1e-14)


def test_eta_rejects_out_of_range():
    sph = make_profile("spherical", 2)
    for bad in (0.0, -1.0, math.pi, 4.0):
        with pytest.raises(ValueError):
            eta(sph, bad)


def test_profile_rejections():
    with pytest.raises(ValueError):
        make_profile("euclidean", 1)
    with pytest.raises(ValueError):
        make_profile("custom", 2, lambda t: t * (1 - t), lambda t: 1 - 2 * t, max_radius=2.0)
    with pytest.raises(ValueError):
        make_profile("custom", 2, lambda t: t + 1, lambda t: np.ones_like(t), max_radius=1.0)
    with pytest.raises(ValueError):
        make_profile("custom", 2, np.sinh, np.sinh, max_radius=3.0)
    with pytest.raises(ValueError):
        make_profile("custom", 2, np.sinh, np.cosh)
    with pytest.raises(ValueError):
        make_profile("torus", 2)


def test_pole_slope_warning():
    with pytest.warns(UserWarning):
        make_profile("cone", 2, a=2.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        make_profile("sinh-scaled", 2, a=2.0)


def test_named_forms_parse():
    prof = parse_profile("sin-scaled: a=2", 3)
    assert prof.max_radius == pytest.approx(math.pi / 2)
    assert prof.rho(0.3) == pytest.approx(math.sin(0.6) / 2)
    assert parse_profile("hyperbolic", 2).kind == "hyperbolic"
    with pytest.raises(ValueError):
        parse_profile("hyperbolic: a=2", 2)
    with pytest.raises(ValueError):
        parse_profile("sinh-scaled: b=2", 2)


def test_sphere_constants():
    assert half_gamma(1) == pytest.approx(math.sqrt(math.pi))
    for k in range(1, 12):
        assert half_gamma(k) == pytest.approx(math.gamma(k / 2), rel=1e-14)
    assert sphere_constant(2) == pytest.approx(2 * math.pi)
    assert sphere_constant(3) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("kind, p, t, expected", [
    ("euclidean", 2.0, 1.0, 0.5),
    ("hyperbolic", 2.0, 1.0, math.tanh(0.5)),
    ("spherical", 2.0, math.pi / 2, 1.0),
    ("euclidean", 3.0, 1.0, math.sqrt(0.5)),
])
def test_phi_examples(kind, p, t, expected):
    assert ball_quantities(make_profile(kind, 2), p).phi(t) == pytest.approx(expected, abs=1e-12)


def test_rejects_small_exponent():
    with pytest.raises(ValueError):
        ball_quantities(make_profile("euclidean", 2), 1.0)


def _closed_volume(kind, n, t):
    if kind == "euclidean":
        return sphere_constant(n) * t**n / n
    if kind == "hyperbolic":
        return 2 * math.pi * (math.cosh(t) - 1)
    return 2 * math.pi * (1 - math.cos(t))


@pytest.mark.parametrize("kind, n", [
    ("euclidean", 2), ("euclidean", 3), ("euclidean", 4), ("hyperbolic", 2), ("spherical", 2),
])
def test_volume_matches_closed_forms(kind, n):
    prof = make_profile(kind, n)
    bq = ball_quantities(prof, 2.0)
    upper = 0.9 * (prof.max_radius if math.isfinite(prof.max_radius) else 6.0)
    for t in np.random.default_rng(11).uniform(0.0, upper, 10):
        assert bq.ball_volume(t) == pytest.approx(_closed_volume(kind, n, t), rel=1e-9)


@pytest.mark.parametrize("kind", ["hyperbolic", "spherical"])
def test_cached_volume_matches_direct_quadrature_at_midpoints(kind):
    from ptorsion.quadrature import integrate

    prof = make_profile(kind, 3)
    bq = ball_quantities(prof, 2.0)
    mids = (np.arange(40) + 0.5) / 32
    direct = [integrate(lambda x: bq.sphere_area(x), 0.0, m) for m in mids]
    np.testing.assert_allclose(bq.ball_volume(mids), direct, rtol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["euclidean", "hyperbolic", "spherical"]),
       st.lists(st.floats(1e-3, 2.8), min_size=2, max_size=12, unique=True))
def test_volume_strictly_increasing(kind, ts):
    bq = ball_quantities(make_profile(kind, 2), 2.0)
    vals = bq.ball_volume(np.sort(ts))
    assert np.all(np.diff(vals) > 0)
    assert np.all(bq.sphere_area(np.array(ts)) > 0)


@pytest.mark.parametrize("kind", ["euclidean", "hyperbolic", "spherical"])
@pytest.mark.parametrize("n", [2, 3, 5])
def test_eta_pole_asymptotics(kind, n):
    prof = make_profile(kind, n)
    for t in (1e-4, 1e-6):
        assert eta(prof, t) * t == pytest.approx(n - 1, rel=1e-3)
    bq = ball_quantities(prof, 2.0)
    assert bq.eta(1e-6) > bq.eta(1e-3) > bq.eta(0.5)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_phi_small_ball_limit(p):
    bq = ball_quantities(make_profile("hyperbolic", 3), p)
    for t in (1e-9, 1e-7, 1e-5):
        assert bq.phi(t) == pytest.approx((t / 3) ** (1 / (p - 1)), rel=1e-4)
    assert bq.phi(0.0) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["euclidean", "hyperbolic", "spherical"]), st.floats(0.01, 2.5),
       st.floats(1.2, 4.0))
def test_phi_continuity(kind, t, p):
    bq = ball_quantities(make_profile(kind, 2), p)
    slope = abs(bq.phi(t + 1e-3) - bq.phi(t - 1e-3)) / 2e-3 + 1e-12
    for h in (1e-5, 1e-7):
        assert abs(bq.phi(t + h) - bq.phi(t)) <= 10 * h * slope


def test_quadrature_failure_propagates():
    prof = make_profile("custom", 2, lambda t: t + np.abs(t) ** 2.5,
                        lambda t: 1 + 2.5 * np.abs(t) ** 1.5, max_radius=math.inf)
    bq = ball_quantities(prof, 2.0, QuadratureSpec(abs_tolerance=1e-15, max_subdivisions=4))
    with pytest.raises(QuadratureError):
        bq.ball_volume(0.5)


def test_concurrent_cache_growth():
    from concurrent.futures import ThreadPoolExecutor

    bq = ball_quantities(make_profile("hyperbolic", 2), 2.0)
    ts = np.linspace(0.1, 9.0, 64)
    with ThreadPoolExecutor(8) as pool:
        vals = list(pool.map(bq.ball_volume, ts))
    np.testing.assert_allclose(vals, 2 * np.pi * (np.cosh(ts) - 1), rtol=1e-11)
