import math

import numpy as np
import pytest
from scipy import integrate

from modules.errors import OrderTooLargeError, ParameterError, ZeroDenominatorError
from modules.math_kernel import (
    LimitOrder,
    check_epsilon,
    hermite_prob,
    lambda_eps,
    log_std_normal_cdf,
    logistic,
    n_ratio,
    sigma_m_eps,
    std_normal_cdf,
    std_normal_pdf,
)


def test_check_epsilon_bounds():
    assert check_epsilon(1) == 1.0
    for bad in (0.0, -0.1, 1.5, float("nan")):
        with pytest.raises(ParameterError):
            check_epsilon(bad)


def test_normal_helpers_match_closed_forms():
    assert std_normal_cdf(0.0) == pytest.approx(0.5)
    assert std_normal_pdf(0.0) == pytest.approx(1.0 / math.sqrt(2.0 * math.pi))
    assert std_normal_cdf(-1.0) == pytest.approx(0.15865525393145707, rel=1e-12)
    assert logistic(0.0) == pytest.approx(0.5)
    # deep tail stays finite in log space
    assert np.isfinite(log_std_normal_cdf(-40.0))
    assert log_std_normal_cdf(-40.0) == pytest.approx(-804.608, rel=1e-4)


def test_hermite_low_orders():
    x = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(hermite_prob(0, x), np.ones_like(x))
    np.testing.assert_allclose(hermite_prob(1, x), x)
    np.testing.assert_allclose(hermite_prob(2, x), x ** 2 - 1)
    np.testing.assert_allclose(hermite_prob(3, x), x ** 3 - 3 * x)
    np.testing.assert_allclose(hermite_prob(4, x), x ** 4 - 6 * x ** 2 + 3)
    assert isinstance(hermite_prob(2, 2.0), float)


def test_hermite_order_limit():
    hermite_prob(64, 0.5)
    with pytest.raises(OrderTooLargeError):
        hermite_prob(65, 0.5)
    with pytest.raises(ParameterError):
        hermite_prob(-1, 0.5)


def test_lambda_eps_values():
    assert lambda_eps(1.0) == pytest.approx(1.52514, rel=1e-4)
    values = [lambda_eps(e) for e in (0.5, 0.1, 0.01, 1e-4)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert abs(lambda_eps(1e-4) - 1.0) < 2e-4


def test_sigma_m_eps_closed_forms():
    for eps in (0.5, 0.1, 0.01):
        assert sigma_m_eps(1, eps) == pytest.approx(1.0, rel=1e-12)
        assert sigma_m_eps(2, eps) == pytest.approx(1.0 - eps, rel=1e-10)


def test_sigma_m_eps_zero_denominator():
    # He_2(-1) = 0 at eps = 1
    with pytest.raises(ZeroDenominatorError):
        sigma_m_eps(3, 1.0)
    with pytest.raises(ParameterError):
        sigma_m_eps(0, 0.1)


def test_n_ratio_identity_at_zero():
    for m in (0, 1, 2, 3):
        assert n_ratio(m, 0.1, 0.0) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("m", [0, 1, 2])
def test_n_ratio_tends_to_exponential(m):
    x = np.array([-2.0, -1.0, 0.5, 1.0, 2.0])
    np.testing.assert_allclose(n_ratio(m, 1e-4, x), np.exp(x), rtol=1e-2)


def test_n_ratio_accepts_limit_order():
    assert n_ratio(LimitOrder(1), 0.05, 0.7) == pytest.approx(n_ratio(1, 0.05, 0.7))
    with pytest.raises(ParameterError):
        LimitOrder(-1)


def _slope(eps_values, errors):
    return np.polyfit(np.log(eps_values), np.log(errors), 1)[0]


def test_n_ratio_error_is_first_order_in_epsilon():
    coarse = np.array([0.1, 0.05, 0.025])
    fine = np.array([0.025, 0.0125, 0.00625])
    for grid, tolerance in ((coarse, 0.25), (fine, 0.15)):
        errors = [abs(n_ratio(0, eps, 1.0) - math.e) for eps in grid]
        assert _slope(grid, errors) == pytest.approx(1.0, abs=tolerance)


def test_hermite_parity():
    x = np.linspace(0.1, 3.0, 12)
    for m in range(21):
        np.testing.assert_allclose(hermite_prob(m, -x), (-1) ** m * hermite_prob(m, x), rtol=1e-12, atol=1e-9)


def test_normal_cdf_symmetry():
    x = np.concatenate([np.linspace(-8.0, 8.0, 33), [-30.0, 30.0]])
    np.testing.assert_allclose(std_normal_cdf(x) + std_normal_cdf(-x), 1.0, rtol=0, atol=1e-14)


@pytest.mark.parametrize("eps", [1.0, 0.5, 0.1, 0.01])
def test_lambda_eps_matches_quadrature(eps):
    # Φ(-a)/φ(a) = ∫_0^∞ exp(-a s - s²/2) ds
    a = 1.0 / math.sqrt(eps)
    mills, _ = integrate.quad(lambda s: math.exp(-a * s - 0.5 * s * s), 0.0, np.inf, epsabs=0.0, epsrel=1e-12)
    assert lambda_eps(eps) == pytest.approx(math.sqrt(eps) / mills, rel=1e-10)


def test_lambda_eps_at_one():
    assert lambda_eps(1.0) == pytest.approx(1.525135276, rel=1e-9)
