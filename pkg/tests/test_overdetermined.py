import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptorsion.fem import BoundarySamples, SolverConfig, StarDomain, build_mesh, solve_torsion
from ptorsion.geometry import ball_quantities, make_profile
from ptorsion.overdetermined import (
    OverdeterminedData,
    TangencyRadii,
    bin_boundary_samples,
    check_case_i,
    check_case_ii,
    classify,
    comparison_bounds,
    euclidean_F,
    extract_f_of_d,
    phi_multiple,
    ratio,
    sampled_f,
    tangency_radii,
)

EUC = make_profile("euclidean", 2)
BQ = ball_quantities(EUC, 2.0)


def with_ratio(g, bq=BQ):
    """Data whose ratio f/phi is exactly ``g``."""
    return OverdeterminedData(lambda t: np.asarray(bq.phi(t)) * g(np.asarray(t)), bq)


@pytest.mark.parametrize("domain, expected", [
    (StarDomain.disk(1.0), (1.0, 1.0)),
    (StarDomain(1.0, (0.0, 0.3)), (0.7, 1.3)),
    (StarDomain(1.0, (), (0.0, 0.0, 0.1)), (0.9, 1.1)),
])
def test_tangency_radii(domain, expected):
    radii = tangency_radii(domain)
    assert (radii.r0, radii.r1) == pytest.approx(expected, abs=1e-12)


def test_tangency_radii_validation():
    with pytest.raises(ValueError):
        TangencyRadii(1.0, 0.5)
    with pytest.raises(ValueError):
        TangencyRadii(0.0, 0.5)


def test_ratio_examples():
    assert ratio(OverdeterminedData(lambda t: t / 2, BQ), 0.7) == pytest.approx(1.0, abs=1e-15)
    assert ratio(OverdeterminedData(lambda t: t**2 / 2, BQ), 0.5) == pytest.approx(0.5, abs=1e-15)
    # phi's small-ball limit below 1e-8
    assert ratio(OverdeterminedData(lambda t: t / 2, BQ), 1e-10) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        ratio(OverdeterminedData(lambda t: t, BQ), 0.0)


def test_euclidean_F_examples():
    np.testing.assert_allclose(euclidean_F(lambda t: t / 3, 3, np.array([0.1, 1.0, 7.0])), 1.0)
    assert euclidean_F(lambda t: np.ones_like(t), 2, 4.0) == 0.5
    with pytest.raises(ValueError):
        euclidean_F(lambda t: t, 2, -1.0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(1e-3, 50.0), min_size=16, max_size=16),
       st.floats(0.1, 3.0), st.floats(0.5, 3.0))
def test_euclidean_identity(ts, c, k):
    def f(t):
        return c * np.asarray(t) ** k

    t = np.array(ts)
    np.testing.assert_allclose(euclidean_F(f, 2, t), ratio(OverdeterminedData(f, BQ), t),
                               rtol=1e-12)


def test_case_i_examples():
    ok, margin = check_case_i(with_ratio(np.ones_like), (0.01, 1.0))
    assert ok and margin == 0.0
    assert check_case_i(with_ratio(lambda t: t), (0.01, 1.0))[0]
    assert not check_case_i(with_ratio(lambda t: np.exp(-t)), (0.01, 1.0))[0]


def test_case_ii_examples():
    res = check_case_ii(with_ratio(lambda t: t), (0.1, 2.0))
    assert res.R == pytest.approx(1.0, abs=1e-10) and res.crossings == 1
    assert check_case_ii(with_ratio(lambda t: np.exp(-t)), (0.1, 2.0)).R is None
    down = check_case_ii(with_ratio(lambda t: 2 - t), (0.5, 1.5))
    assert down.R is None and "downward" in down.reason
    many = check_case_ii(with_ratio(lambda t: 1 + 0.5 * np.sin(6 * t)), (0.1, 3.0))
    assert many.R is None and many.reason == "multiple crossings"


def test_constant_ratio_routed_to_case_i():
    data = with_ratio(np.ones_like)
    assert check_case_ii(data, (0.01, 2.0)).R is None
    assert check_case_i(data, (0.01, 2.0))[0]


def test_comparison_bounds_examples():
    assert comparison_bounds(with_ratio(np.ones_like), TangencyRadii(0.3, 2.0)) == (True, True)
    linear = with_ratio(lambda t: t)
    assert comparison_bounds(linear, TangencyRadii(0.5, 1.5)) == (False, False)
    assert comparison_bounds(linear, TangencyRadii(1.0, 1.0)) == (True, True)


def test_classify_truth_table():
    disk, star = StarDomain.disk(1.0), StarDomain(1.0, (0.0, 0.3))
    assert classify(OverdeterminedData(phi_multiple(BQ, "const"), BQ), disk).kind == \
        "BallForcedCaseI"
    v = classify(OverdeterminedData(phi_multiple(BQ, "linear"), BQ), disk)
    assert v.kind == "BallOfRadius" and abs(v.R - 1.0) < 1e-8
    v = classify(OverdeterminedData(phi_multiple(BQ, "linear"), BQ), star)
    assert v.kind == "Inconsistent" and "r0=0.7" in v.reason
    assert v.ratio_at_r0 == pytest.approx(0.7)
    v = classify(OverdeterminedData(phi_multiple(BQ, "exp"), BQ), disk)
    assert v.kind == "NotApplicable"


@pytest.mark.parametrize("kind", ["hyperbolic", "spherical"])
def test_classify_curved_ball_of_radius(kind):
    bq = ball_quantities(make_profile(kind, 2), 3.0)
    v = classify(OverdeterminedData(phi_multiple(bq, "linear", a=0.0, b=1 / 0.9), bq),
                 StarDomain.disk(0.9))
    assert v.kind == "BallOfRadius" and v.R == pytest.approx(0.9, abs=1e-8)


def test_spherical_beyond_hemisphere_not_applicable():
    bq = ball_quantities(make_profile("spherical", 2), 2.0)
    v = classify(OverdeterminedData(phi_multiple(bq, "const"), bq), StarDomain.disk(1.8))
    assert v.kind == "NotApplicable" and "hemisphere" in v.reason


CASES = [("const", {}), ("linear", {}), ("linear", {"a": 0.5, "b": 0.5}), ("exp", {}),
         ("power", {"k": 2.0}), ("exp", {"k": 0.5})]


@pytest.mark.parametrize("form, params", CASES)
@pytest.mark.parametrize("domain", [StarDomain.disk(1.0), StarDomain(1.0, (0.0, 0.3))])
def test_classify_grid_refinement(form, params, domain):
    data = OverdeterminedData(phi_multiple(BQ, form, **params), BQ)
    coarse, fine = classify(data, domain, 1024), classify(data, domain, 4096)
    assert coarse.kind == fine.kind
    if coarse.R is not None:
        assert abs(coarse.R - fine.R) < 1e-8


@pytest.mark.parametrize("form, params", CASES)
def test_ball_verdict_consistent_with_bounds(form, params):
    data = OverdeterminedData(phi_multiple(BQ, form, **params), BQ)
    v = classify(data, StarDomain.disk(1.0))
    if v.kind == "BallOfRadius":
        radii = tangency_radii(StarDomain.disk(v.R))
        assert comparison_bounds(data, radii) == (True, True)


def test_verdict_report_keys():
    v = classify(OverdeterminedData(phi_multiple(BQ, "linear"), BQ), StarDomain.disk(1.0))
    text = v.report()
    keys = {line.split(" = ")[0] for line in text.splitlines() if not line.startswith("#")}
    assert {"verdict", "R", "r0", "r1", "crossings", "case_i_margin"} <= keys
    assert len(v.ratio_samples) == 1024


def test_phi_multiple_rejects_unknown():
    with pytest.raises(ValueError):
        phi_multiple(BQ, "cubic")
    with pytest.raises(ValueError):
        phi_multiple(BQ, "const", k=2.0)


@pytest.fixture(scope="module")
def disk_field():
    mesh = build_mesh(StarDomain.disk(1.0), EUC, 64, 128)
    return solve_torsion(mesh, EUC, SolverConfig(p=2.0))


def test_extract_from_disk(disk_field):
    table, spread = extract_f_of_d(disk_field.boundary_samples)
    assert table is not None and len(table.d) == 1
    assert table.f[0] == pytest.approx(0.5, rel=0.01)
    assert spread < 0.01


def test_extract_rejects_non_ball():
    mesh = build_mesh(StarDomain(1.0, (0.0, 0.3)), EUC, 48, 96)
    field = solve_torsion(mesh, EUC, SolverConfig(p=2.0))
    table, spread = extract_f_of_d(field.boundary_samples)
    assert table is None and spread > 0.01


def test_extract_exact_dependence():
    # eight distinct distances, each seen eight times: one distance per bin
    d = np.repeat(np.linspace(0.5, 1.5, 8), 8)
    table, spread = extract_f_of_d(BoundarySamples(np.zeros(64), d, d.copy()), n_bins=16)
    assert spread == 0.0
    assert len(table.d) == 8
    np.testing.assert_allclose(table.f, table.d)
    assert sampled_f(table.d, table.f)(0.77) == pytest.approx(0.77)
    with pytest.raises(ValueError):
        extract_f_of_d(BoundarySamples(np.zeros(8), d[:8], d[:8]))


def test_bin_pairs_input():
    pairs = [(1.0, 2.0), (1.0, 2.2), (2.0, 3.0)] * 6
    binned = bin_boundary_samples(pairs, 4)
    assert len(binned.d) == 2
    assert binned.abs_spread[0] == pytest.approx(0.2)


def test_necessity_on_fem_ball(disk_field):
    table, _ = extract_f_of_d(disk_field.boundary_samples)
    data = OverdeterminedData(sampled_f(table.d, table.f), BQ)
    assert comparison_bounds(data, TangencyRadii(1.0, 1.0), tie_tol=0.01) == (True, True)
    assert math.isclose(ratio(data, 1.0), 1.0, rel_tol=0.01)
