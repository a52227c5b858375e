"""
Special functions for the Langevin machine.

The cumulative Gaussian Φ evaluated far in its lower tail behaves like an
exponential once the argument is shifted by -1/√ε and rescaled:

    Φ(-1/√ε + √ε·x/λ_ε) / Φ(-1/√ε)  ->  exp(x)   (error O(ε x²))

All such ratios are computed in log space. ε here is the small parameter of
the update rule, so Φ is always evaluated at -1/√ε (the alternative convention
that writes √ε for ε moves the error order to O(ε² x²); nothing else changes).
"""

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special

from .errors import OrderTooLargeError, ParameterError, ZeroDenominatorError

MAX_HERMITE_ORDER = 64
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class LimitOrder:
    """Derivative order m of Φ used in the generalized limit ratio."""

    m: int = 0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 0:
            raise ParameterError(f"limit order must be a non-negative integer, got {self.m}")


def check_epsilon(epsilon: float) -> float:
    """Validates 0 < ε ≤ 1 and returns it as float."""
    epsilon = float(epsilon)
    if not (0.0 < epsilon <= 1.0):
        raise ParameterError(f"epsilon must lie in (0, 1], got {epsilon}")
    return epsilon


def std_normal_pdf(x):
    return np.exp(-0.5 * np.square(x) - _LOG_SQRT_2PI)


def log_std_normal_pdf(x):
    return -0.5 * np.square(x) - _LOG_SQRT_2PI


def std_normal_cdf(x):
    """
    Cumulative standard normal Φ(x).

    Uses erfc so the lower tail keeps full relative accuracy down to x ≈ -38.
    """
    return 0.5 * special.erfc(-np.asarray(x, dtype=float) / np.sqrt(2.0))


def log_std_normal_cdf(x):
    """log Φ(x); scipy switches to the asymptotic Mills-ratio series in the deep tail."""
    return special.log_ndtr(x)


def logistic(x):
    """σ(x) = 1 / (1 + exp(-x))."""
    return special.expit(x)


def hermite_prob(m: int, x):
    """
    Probabilists' Hermite polynomial He_m(x) by the three-term recurrence.

    Args:
        m: Polynomial order, 0 <= m <= 64
        x: Scalar or array argument

    Returns:
        He_m(x) with the shape of x
    """
    if m < 0:
        raise ParameterError(f"Hermite order must be non-negative, got {m}")
    if m > MAX_HERMITE_ORDER:
        raise OrderTooLargeError(f"Hermite order {m} exceeds {MAX_HERMITE_ORDER}")

    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if m == 0:
        return prev if prev.ndim else float(prev)
    curr = x.copy()
    for k in range(1, m):
        prev, curr = curr, x * curr - k * prev
    return curr if curr.ndim else float(curr)


def lambda_eps(epsilon: float) -> float:
    """
    Scaling factor λ_ε = √ε·φ(-1/√ε)/Φ(-1/√ε).

    λ_1 = φ(1)/Φ(-1) ≈ 1.5251 and λ_ε -> 1 as ε -> 0.
    """
    epsilon = check_epsilon(epsilon)
    a = 1.0 / np.sqrt(epsilon)
    log_value = 0.5 * np.log(epsilon) + log_std_normal_pdf(-a) - log_std_normal_cdf(-a)
    return float(np.exp(log_value))


def sigma_m_eps(m: int, epsilon: float) -> float:
    """
    Scaling factor σ_{m,ε} = -√ε·He_m(-1/√ε)/He_{m-1}(-1/√ε) of the m-th derivative limit.

    Args:
        m: Derivative order, m >= 1
        epsilon: Small parameter in (0, 1]

    Returns:
        σ_{m,ε}; σ_{1,ε} = 1 and σ_{2,ε} = 1 - ε
    """
    if m < 1:
        raise ParameterError(f"sigma_m_eps needs m >= 1, got {m}")
    epsilon = check_epsilon(epsilon)
    a = 1.0 / np.sqrt(epsilon)
    denominator = hermite_prob(m - 1, -a)
    if denominator == 0.0:
        raise ZeroDenominatorError(f"He_{m - 1}(-1/sqrt(eps)) vanishes at eps={epsilon}")
    return float(-np.sqrt(epsilon) * hermite_prob(m, -a) / denominator)


def n_ratio(m: Union[int, LimitOrder], epsilon: float, x):
    """
    Generalized limit ratio n_{ε,m}(x) that tends to exp(x) as ε -> 0.

    For m = 0 this is Φ(-a + √ε·x/λ_ε)/Φ(-a) with a = 1/√ε. For m >= 1 the
    m-th derivatives of Φ replace Φ and σ_{m,ε} replaces λ_ε:

        Φ^(m)(y)/Φ^(m)(-a) = He_{m-1}(y)/He_{m-1}(-a) · exp((a² - y²)/2),
        y = -a + √ε·x/σ_{m,ε}

    Args:
        m: Derivative order (int or LimitOrder)
        epsilon: Small parameter in (0, 1]
        x: Scalar or array argument

    Returns:
        Ratio with the shape of x
    """
    order = m.m if isinstance(m, LimitOrder) else LimitOrder(m).m
    epsilon = check_epsilon(epsilon)
    a = 1.0 / np.sqrt(epsilon)
    x = np.asarray(x, dtype=float)

    if order == 0:
        y = -a + np.sqrt(epsilon) * x / lambda_eps(epsilon)
        result = np.exp(log_std_normal_cdf(y) - log_std_normal_cdf(-a))
    else:
        y = -a + np.sqrt(epsilon) * x / sigma_m_eps(order, epsilon)
        polynomial = hermite_prob(order - 1, y) / hermite_prob(order - 1, -a)
        result = polynomial * np.exp(0.5 * (a * a - y * y))
    return result if result.ndim else float(result)
