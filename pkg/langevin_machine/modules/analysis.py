"""
Observables and statistics: configuration histograms, KL divergence,
exact enumeration, integrated autocorrelation time, jackknife errors and
extrapolation to ε = 0.

Configurations are packed little-endian: z_0 is the least significant bit.
"""

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special

from .boltzmann_networks import NetworkParams, all_configurations, energy
from .errors import DimensionError, InsufficientDataError, ParameterError, SeriesTooShortError

MAX_ENUMERATION_NEURONS = 20
MIN_SERIES_LENGTH = 1000


def pack_configurations(z) -> np.ndarray:
    """Configuration index of each row of z, shape (..., n) -> (...)."""
    z = np.asarray(z, dtype=np.int64)
    return (z << np.arange(z.shape[-1])).sum(axis=-1)


@dataclass
class ConfigHistogram:
    """Visit counts per configuration index over 2^n states."""

    n: int
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros(2 ** self.n, dtype=np.int64)
        elif len(self.counts) != 2 ** self.n:
            raise DimensionError(f"histogram needs {2 ** self.n} cells, got {len(self.counts)}")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def add(self, z) -> "ConfigHistogram":
        """Counts every row of a state batch (chains, n)."""
        z = np.asarray(z)
        if z.shape[-1] != self.n:
            raise DimensionError(f"state has {z.shape[-1]} neurons, histogram has {self.n}")
        self.counts += np.bincount(pack_configurations(z).ravel(), minlength=2 ** self.n)
        return self

    def merge(self, other: "ConfigHistogram") -> "ConfigHistogram":
        if other.n != self.n:
            raise DimensionError("cannot merge histograms of different sizes")
        return ConfigHistogram(self.n, self.counts + other.counts)

    def probabilities(self) -> np.ndarray:
        if self.total == 0:
            raise InsufficientDataError("empty histogram")
        return self.counts / self.total


def exact_boltzmann(params: NetworkParams) -> np.ndarray:
    """exp(-E(z))/Z over all 2^n configurations, little-endian order."""
    if params.n > MAX_ENUMERATION_NEURONS:
        raise ParameterError(f"exact enumeration limited to n <= {MAX_ENUMERATION_NEURONS}, got {params.n}")
    log_weights = -np.atleast_1d(energy(params, all_configurations(params.n)))
    return np.exp(log_weights - special.logsumexp(log_weights))


def kl_divergence(p_exact, hist: Union[ConfigHistogram, np.ndarray]) -> float:
    """
    D_KL(P || Q) = Σ_c P(c) log(P(c)/Q(c)).

    A histogram is normalized after giving each empty cell one pseudo-count.
    A probability vector is used as it is.
    """
    p = np.asarray(p_exact, dtype=float)
    if isinstance(hist, ConfigHistogram):
        if hist.total == 0:
            raise InsufficientDataError("empty histogram")
        counts = np.where(hist.counts == 0, 1, hist.counts).astype(float)
        q = counts / counts.sum()
    else:
        q = np.asarray(hist, dtype=float)
    if p.shape != q.shape:
        raise DimensionError(f"distributions differ in size: {p.shape} vs {q.shape}")
    support = p > 0
    value = float(np.sum(p[support] * (np.log(p[support]) - np.log(q[support]))))
    return max(value, 0.0)


def total_variation(p, q) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))))


def _autocorrelation(x: np.ndarray) -> np.ndarray:
    n = len(x)
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x - x.mean(), n=size)
    acf = np.fft.irfft(f * np.conjugate(f), n=size)[:n]
    return acf / acf[0]


def autocorrelation_time(series, c: float = 5.0) -> float:
    """
    Integrated autocorrelation time τ = 1/2 + Σ_{t>=1} ρ(t).

    The sum is cut at the smallest window M with M >= c·τ(M). White noise
    gives 1/2, an AR(1) process with coefficient ρ gives (1+ρ)/(2(1-ρ)).
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise DimensionError("autocorrelation_time expects a 1-D series")
    if len(x) < MIN_SERIES_LENGTH:
        raise SeriesTooShortError(f"need at least {MIN_SERIES_LENGTH} points, got {len(x)}")
    if np.allclose(x, x[0]):
        raise InsufficientDataError("constant series has no autocorrelation")
    taus = np.cumsum(_autocorrelation(x)) - 0.5
    window = np.arange(len(taus)) < c * taus
    m = int(np.argmin(window)) if np.any(~window) else len(taus) - 1
    return float(taus[m])


def jackknife(series, blocks: int = 20, estimator: Callable[[np.ndarray], float] = np.mean) -> Tuple[float, float]:
    """
    Blocked jackknife estimate.

    Args:
        series: Samples along the first axis
        blocks: Number of contiguous blocks, capped at the sample count
        estimator: Statistic of a sample array

    Returns:
        (estimator on all samples, jackknife standard error)
    """
    data = np.asarray(series, dtype=float)
    if len(data) < 2:
        raise InsufficientDataError("jackknife needs at least two samples")
    blocks = max(2, min(blocks, len(data)))
    edges = np.linspace(0, len(data), blocks + 1).astype(int)
    leave_out = np.array(
        [estimator(np.concatenate([data[: edges[k]], data[edges[k + 1]:]])) for k in range(blocks)]
    )
    err = np.sqrt((blocks - 1) / blocks * np.sum((leave_out - leave_out.mean()) ** 2))
    return float(estimator(data)), float(err)


@dataclass(frozen=True)
class Extrapolation:
    value: float
    err: float
    coefficients: Tuple[float, ...]


def extrapolate_to_zero_eps(points: Iterable[Sequence[float]], degree: int = 1) -> Extrapolation:
    """
    Weighted least-squares polynomial in ε through (ε, value, err) points.

    Args:
        points: Triples (epsilon, value, err) with err > 0
        degree: 1 (linear) or 2 (quadratic)

    Returns:
        Extrapolation with the intercept at ε = 0 and its fit error
    """
    data = np.array(sorted(tuple(map(float, point)) for point in points))
    if data.ndim != 2 or data.shape[0] < 3:
        raise InsufficientDataError("extrapolation needs at least three (epsilon, value, err) points")
    if degree not in (1, 2):
        raise ParameterError(f"extrapolation degree must be 1 or 2, got {degree}")
    if data.shape[0] <= degree:
        raise InsufficientDataError(f"degree {degree} needs more than {degree} points")
    eps, values, errs = data.T
    if np.any(errs <= 0):
        raise ParameterError("extrapolation errors must be positive")
    coefficients, cov = np.polyfit(eps, values, degree, w=1.0 / errs, cov="unscaled")
    return Extrapolation(float(coefficients[-1]), float(np.sqrt(cov[-1, -1])), tuple(float(c) for c in coefficients))


def stationary_distribution(matrix) -> np.ndarray:
    """Left eigenvector π T = π of a row-stochastic matrix, normalized to one."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(f"transition matrix must be square, got {matrix.shape}")
    if not np.allclose(matrix.sum(axis=1), 1.0, atol=1e-9):
        raise ParameterError("transition matrix rows must sum to one")
    size = matrix.shape[0]
    system = np.vstack([matrix.T - np.eye(size), np.ones(size)])
    rhs = np.zeros(size + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def empirical_distribution(samples, n_states: int, first_state: int = 0, weights: Optional[np.ndarray] = None) -> np.ndarray:
    """Normalized visit frequencies of integer states first_state .. first_state + n_states - 1."""
    counts = np.bincount(np.asarray(samples).ravel() - first_state, weights=weights, minlength=n_states)
    if counts.sum() == 0:
        raise InsufficientDataError("no samples")
    return counts / counts.sum()
