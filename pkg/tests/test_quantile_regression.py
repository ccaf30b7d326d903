import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridprice import quantile_regression as qr
from gridprice.errors import InsufficientDataError, InvalidParameterError
from gridprice.spline_basis import make_spec


def test_pinball_examples():
    np.testing.assert_allclose(qr.pinball_loss([2.0, -2.0, 0.0], 0.25), [0.5, 1.5, 0.0])


def test_intercept_only_is_sample_median():
    y = np.array([3.0, 1.0, 2.0, 5.0, 4.0])
    fit = qr.fit_quantile(np.zeros(5), y, 0.5, None)
    assert fit.intercept == pytest.approx(np.sort(y)[2], abs=1e-9)


def test_exact_linear_fit():
    x = np.linspace(0, 10, 50)
    spec = make_spec(0, 10, 0, 1)
    fit = qr.fit_quantile(x, 2 * x, 0.75, spec)
    assert fit.objective == pytest.approx(0.0, abs=1e-9)
    assert qr.predict_quantile(fit, 3.0) == pytest.approx(6.0, abs=1e-8)
    assert qr.quantile_derivative(fit, 3.0) == pytest.approx(2.0, abs=1e-8)
    assert fit.coef[0] == 0.0


def test_constant_response_flat(rng):
    x = rng.uniform(0, 40, 300)
    spec = make_spec(0, 40, 3, 3, data=x)
    fit = qr.fit_quantile(x, np.full(300, 7.5), 0.9, spec)
    grid = np.linspace(0.5, 39.5, 50)
    np.testing.assert_allclose(qr.quantile_derivative(fit, grid), 0.0, atol=1e-8)
    np.testing.assert_allclose(qr.predict_quantile(fit, grid), 7.5, atol=1e-8)


def _enumerate_optimum(X, y, tau):
    """Oracle: an optimal LP vertex interpolates p observations."""
    n, p = X.shape
    best = np.inf
    for idx in itertools.combinations(range(n), p):
        A = X[list(idx)]
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        theta = np.linalg.solve(A, y[list(idx)])
        best = min(best, np.sum(qr.pinball_loss(y - X @ theta, tau)))
    return best


@pytest.mark.parametrize("tau", [0.25, 0.5, 0.9])
def test_intercept_only_enumeration(rng, tau):
    y = rng.standard_t(3, 15)
    fit = qr.fit_quantile(np.zeros(15), y, tau, None)
    assert fit.objective == pytest.approx(_enumerate_optimum(np.ones((15, 1)), y, tau), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("tau", [0.25, 0.75])
def test_single_knot_enumeration(rng, tau):
    x = rng.uniform(0, 10, 14)
    y = np.abs(x - 4) + rng.normal(0, 1, 14)
    spec = make_spec(0, 10, 1, 1, data=x)
    fit = qr.fit_quantile(x, y, tau, spec)
    X = qr.design_matrix(spec, x)
    assert X.shape[1] == 3
    assert fit.objective == pytest.approx(_enumerate_optimum(X, y, tau), rel=1e-9)
    assert qr.subgradient_check(fit, x, y)


def _sample(rng, n):
    x = rng.uniform(0, 38.5, n)
    y = 40 - 0.5 * x + (1 + 0.05 * x) * rng.standard_t(4, n) * 8
    return x, y


def test_subgradient_optimality(rng):
    x, y = _sample(rng, 1500)
    spec = make_spec(0, 38.5, 3, 3, data=x)
    for tau in qr.PRICE_TAUS:
        assert qr.subgradient_check(qr.fit_quantile(x, y, tau, spec), x, y)


def test_coverage_and_continuity(rng):
    x, y = _sample(rng, 10_000)
    spec = make_spec(x.min(), x.max(), 3, 3, data=x)
    for tau in (0.25, 0.5, 0.9):
        fit = qr.fit_quantile(x, y, tau, spec)
        cover = np.mean(y <= qr.predict_quantile(fit, x))
        assert abs(cover - tau) <= 0.01
    grid = np.linspace(spec.lower, spec.upper, 4001)
    q = qr.predict_quantile(fit, grid)
    assert np.max(np.abs(np.diff(q))) < 0.05


@settings(max_examples=8, deadline=None)
@given(st.floats(0.1, 50), st.floats(-100, 100), st.sampled_from([0.25, 0.5, 0.9]))
def test_affine_equivariance(a, b, tau):
    rng = np.random.default_rng(11)
    x, y = _sample(rng, 400)
    spec = make_spec(0, 38.5, 2, 3, data=x)
    grid = np.linspace(1, 37, 25)
    base = qr.predict_quantile(qr.fit_quantile(x, y, tau, spec), grid)
    moved = qr.predict_quantile(qr.fit_quantile(x, a * y + b, tau, spec), grid)
    scale = np.max(np.abs(a * base + b))
    assert np.max(np.abs(moved - (a * base + b))) <= 1e-8 * max(1.0, scale) * 10


def test_negative_scale_swaps_tau(rng):
    x, y = _sample(rng, 400)
    spec = make_spec(0, 38.5, 2, 3, data=x)
    f1 = qr.fit_quantile(x, y, 0.75, spec)
    f2 = qr.fit_quantile(x, -y, 0.25, spec)
    assert f1.objective == pytest.approx(f2.objective, rel=1e-8)


def test_insufficient_and_invalid():
    spec = make_spec(0, 10, 3, 3)
    with pytest.raises(InsufficientDataError):
        qr.fit_quantile(np.linspace(0, 10, 5), np.ones(5), 0.5, spec)
    with pytest.raises(InvalidParameterError):
        qr.fit_quantile([1.0, 2.0], [1.0, 2.0], 1.0, None)
    with pytest.raises(InvalidParameterError):
        qr.fit_quantile([1.0, np.nan], [1.0, 2.0], 0.5, None)


def test_boundary_derivative_warns():
    spec = make_spec(0, 10, 0, 1)
    x = np.linspace(0, 10, 20)
    fit = qr.fit_quantile(x, x, 0.5, spec)
    with pytest.warns(RuntimeWarning):
        qr.quantile_derivative(fit, 10.0)


def test_crossing_diagnostic():
    x = np.linspace(0, 10, 40)
    spec = make_spec(0, 10, 0, 1)
    low = qr.fit_quantile(x, x, 0.25, spec)       # q = x
    high = qr.fit_quantile(x, 10 - x, 0.75, spec)  # q = 10 - x
    issues = qr.crossing_diagnostic([high, low], np.linspace(0, 10, 11))
    assert {i["vre_pct"] for i in issues} == {6.0, 7.0, 8.0, 9.0, 10.0}
    assert qr.crossing_diagnostic([low], x) == []


def test_fit_serialises():
    x = np.linspace(0, 10, 40)
    fit = qr.fit_quantile(x, x ** 2, 0.5, make_spec(0, 10, 2, 3))
    d = fit.to_dict()
    assert d["tau"] == 0.5 and len(d["coefficients"]) == 6
