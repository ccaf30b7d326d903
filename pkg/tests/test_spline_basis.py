import numpy as np
import pytest
from scipy.interpolate import BSpline

from gridprice.errors import InvalidParameterError
from gridprice.spline_basis import BSplineSpec, eval_basis, eval_basis_derivative, make_spec


def test_bernstein_spec():
    s = make_spec(0, 1, 0, 3)
    np.testing.assert_array_equal(s.knots, [0, 0, 0, 0, 1, 1, 1, 1])
    assert s.dim == 4


def test_equal_spacing_fallback():
    s = make_spec(0, 10, 2, 3)
    np.testing.assert_allclose(s.interior, [10 / 3, 20 / 3])
    assert s.dim == 6
    s = make_spec(0, 10, 2, 3, data=np.linspace(0, 10, 1001))
    np.testing.assert_allclose(s.interior, [10 / 3, 20 / 3])


def test_dimension_formula():
    assert make_spec(0, 1, 5, 3).dim == 9


def test_quantile_knots_follow_data():
    data = np.r_[np.zeros(10), np.linspace(0.1, 1, 90)] ** 2 * 40
    s = make_spec(0, 40, 3, 3, data=data)
    np.testing.assert_allclose(s.interior, np.quantile(data, [0.25, 0.5, 0.75]))


def test_tied_quantiles_fall_back():
    with pytest.warns(RuntimeWarning):
        s = make_spec(0, 10, 3, 3, data=np.r_[np.zeros(100), 10.0])
    np.testing.assert_allclose(s.interior, [2.5, 5, 7.5])


@pytest.mark.parametrize("args", [(1, 1, 0, 3), (2, 1, 0, 3), (0, 1, -1, 3), (0, 1, 2, 0)])
def test_bad_spec(args):
    with pytest.raises(InvalidParameterError):
        make_spec(*args)


def test_bernstein_midpoint_hand_oracle():
    # Bernstein cubic at 1/2: C(3,k) / 8
    row = eval_basis(make_spec(0, 1, 0, 3), 0.5)[0]
    np.testing.assert_allclose(row, [0.125, 0.375, 0.375, 0.125], rtol=0, atol=1e-12)


def test_endpoints():
    s = make_spec(0, 10, 3, 3)
    np.testing.assert_array_equal(eval_basis(s, 0.0)[0], np.eye(s.dim)[0])
    np.testing.assert_allclose(eval_basis(s, 10.0)[0], np.eye(s.dim)[-1], atol=1e-15)


def test_bernstein_derivative_at_zero():
    d = eval_basis_derivative(make_spec(0, 1, 0, 3), 0.0)[0]
    assert d[0] == pytest.approx(-3.0, abs=1e-12)


@pytest.mark.parametrize("degree, n_int", [(1, 2), (2, 1), (3, 3), (3, 7), (4, 2)])
def test_basis_properties(degree, n_int):
    rng = np.random.default_rng(degree * 10 + n_int)
    s = make_spec(-2.0, 38.5, n_int, degree)
    x = rng.uniform(s.lower, s.upper, 1000)
    B = eval_basis(s, x)
    assert np.max(np.abs(B.sum(axis=1) - 1)) <= 1e-12
    assert B.min() >= 0 and B.max() <= 1 + 1e-15
    assert np.max((B > 0).sum(axis=1)) <= degree + 1
    # independent implementation
    ref = BSpline.design_matrix(x, s.knots, degree).toarray()
    np.testing.assert_allclose(B, ref, atol=1e-13)


@pytest.mark.parametrize("degree, n_int", [(2, 1), (3, 3), (3, 6)])
def test_derivative_against_finite_difference(degree, n_int):
    rng = np.random.default_rng(7)
    s = make_spec(0.0, 40.0, n_int, degree)
    h = 1e-5
    x = rng.uniform(s.lower + 2 * h, s.upper - 2 * h, 1000)
    if degree == 2:
        # quadratic derivative kinks at knots; keep away from them
        x = x[np.min(np.abs(x[:, None] - np.asarray(s.interior)[None, :]), axis=1) > 2 * h]
    fd = (eval_basis(s, x + h) - eval_basis(s, x - h)) / (2 * h)
    D = eval_basis_derivative(s, x)
    assert np.max(np.abs(D - fd)) <= 1e-6
    assert np.max(np.abs(D.sum(axis=1))) <= 1e-10


def test_clamp_and_warn():
    s = make_spec(0, 10, 2, 3)
    with pytest.warns(RuntimeWarning, match="clamped"):
        B = eval_basis(s, [-1.0, 11.0])
    np.testing.assert_allclose(B, eval_basis(s, [0.0, 10.0]))


def test_spec_round_trip():
    s = make_spec(0.5, 30, 3, 3, data=0.5 + 29.5 * np.linspace(0, 1, 50) ** 2)
    assert BSplineSpec.from_dict(s.to_dict()) == s
