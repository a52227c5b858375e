"""
Boltzmann machine parameters and the discrete network samplers.

Energy: E(z) = -Σ_{i<j} W_ij z_i z_j - Σ_i b_i z_i with z_i in {0, 1}.
Total input of neuron i: m_i = -Σ_j W_ij z_j - b_i, so that flipping z_i from
0 to 1 changes E by m_i.

State arrays are batched over chains: z has shape (chains, n). The step
functions update one site per chain in place and return the state.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from rich.console import Console
from scipy import optimize

from .errors import ConvergenceError, DimensionError, InsufficientDataError, ParameterError
from .math_kernel import (
    check_epsilon,
    lambda_eps,
    log_std_normal_cdf,
    logistic,
    std_normal_cdf,
    std_normal_pdf,
)
from .noise import RngStream, TruncationSpec, sample_std_normal, sample_truncated_normal, sample_uniform

console = Console(stderr=True)


@dataclass(frozen=True)
class NetworkParams:
    """Symmetric weights with zero diagonal and biases of a Boltzmann machine."""

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float)
        biases = np.array(self.biases, dtype=float).reshape(-1)
        n = biases.size
        if weights.shape != (n, n):
            raise DimensionError(f"weights shape {weights.shape} does not match {n} biases")
        if not np.allclose(weights, weights.T, rtol=0.0, atol=1e-12):
            raise ParameterError("weights must be symmetric")
        if np.any(np.diag(weights) != 0.0):
            raise ParameterError("weights must have a zero diagonal")
        weights.setflags(write=False)
        biases.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def n(self) -> int:
        return self.biases.size

    @property
    def delta_max(self) -> float:
        """Bound on |m_i| over all states: max_i Σ_j |W_ij| + |b_i|."""
        return float(np.max(np.abs(self.weights).sum(axis=1) + np.abs(self.biases)))

    @classmethod
    def free(cls, biases: Sequence[float]) -> "NetworkParams":
        """Uncoupled neurons, one per bias."""
        biases = np.asarray(biases, dtype=float)
        return cls(np.zeros((biases.size, biases.size)), biases)

    @classmethod
    def random(cls, n: int, scale: float, rng: RngStream) -> "NetworkParams":
        """Weights and biases uniform in [-scale, scale]."""
        upper = np.triu(rng.generator.uniform(-scale, scale, size=(n, n)), k=1)
        return cls(upper + upper.T, rng.generator.uniform(-scale, scale, size=n))

    def shifted(self, delta: float) -> "NetworkParams":
        """Same network with every bias moved by delta."""
        return NetworkParams(self.weights, self.biases + delta)

    def to_text(self) -> str:
        """Plain-text form: n, then n rows of W, then the biases."""
        lines = [str(self.n)]
        lines += [" ".join(repr(float(w)) for w in row) for row in self.weights]
        lines.append(" ".join(repr(float(b)) for b in self.biases))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "NetworkParams":
        rows = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
        try:
            n = int(rows[0][0])
            weights = np.array([[float(v) for v in row] for row in rows[1:1 + n]])
            biases = np.array([float(v) for v in rows[1 + n]])
        except (IndexError, ValueError) as e:
            raise DimensionError(f"malformed network text: {e}") from e
        if len(rows) != n + 2:
            raise DimensionError(f"expected {n + 2} non-empty lines, found {len(rows)}")
        return cls(weights, biases)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "NetworkParams":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class TransformedParams:
    """
    Parameters of the sign-dependent machine.

    W'_ii = 2/√ε, W'_ij = c·W_ij, b'_i = c·b_i - 1/√ε with c = √ε/(2λ_ε),
    or c = √ε/2 when lambda_used is False.
    """

    wp_diag: float
    wp: np.ndarray
    bp: np.ndarray
    epsilon: float
    lambda_used: bool = True

    @property
    def scale(self) -> float:
        lam = lambda_eps(self.epsilon) if self.lambda_used else 1.0
        return np.sqrt(self.epsilon) / (2.0 * lam)

    def to_network(self) -> NetworkParams:
        c = self.scale
        return NetworkParams(self.wp / c, (self.bp + 1.0 / np.sqrt(self.epsilon)) / c)


@dataclass
class BinaryState:
    """
    Neuron states z in {0, 1} for a batch of chains, shape (chains, n).

    counters hold the remaining refractory visits per neuron (zero when unused).
    """

    z: np.ndarray
    counters: np.ndarray = field(default=None)

    def __post_init__(self):
        self.z = np.atleast_2d(np.asarray(self.z, dtype=np.int8))
        if np.any((self.z != 0) & (self.z != 1)):
            raise ParameterError("binary states must be 0 or 1")
        if self.counters is None:
            self.counters = np.zeros(self.z.shape, dtype=np.int64)
        elif np.shape(self.counters) != self.z.shape:
            raise DimensionError("counters must match the state shape")

    @property
    def chains(self) -> int:
        return self.z.shape[0]

    @classmethod
    def zeros(cls, chains: int, n: int) -> "BinaryState":
        return cls(np.zeros((chains, n), dtype=np.int8))

    @classmethod
    def random(cls, chains: int, n: int, rng: RngStream) -> "BinaryState":
        return cls(rng.integers(2, size=(chains, n)).astype(np.int8))


def all_configurations(n: int) -> np.ndarray:
    """All 2^n states in little-endian order: row k has z_i = bit i of k."""
    return ((np.arange(2 ** n)[:, None] >> np.arange(n)) & 1).astype(np.int8)


def energy(params: NetworkParams, z) -> Union[float, np.ndarray]:
    """E(z) for a single state (n,) or a batch (..., n)."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != params.n:
        raise DimensionError(f"state has {z.shape[-1]} neurons, network has {params.n}")
    values = -0.5 * np.einsum("...i,ij,...j->...", z, params.weights, z) - z @ params.biases
    return float(values) if np.ndim(values) == 0 else values


def total_input(params: NetworkParams, z, i) -> Union[float, np.ndarray]:
    """
    m_i = -Σ_j W_ij z_j - b_i.

    Args:
        params: Network parameters
        z: One state (n,) or chain batch (chains, n)
        i: Neuron index, or one index per chain

    Returns:
        m_i per chain (float for a single state)
    """
    z = np.asarray(z)
    i = np.asarray(i)
    if z.shape[-1] != params.n:
        raise DimensionError(f"state has {z.shape[-1]} neurons, network has {params.n}")
    if np.any(i < 0) or np.any(i >= params.n):
        raise DimensionError(f"neuron index out of range for n={params.n}")
    m = -np.sum(params.weights[i] * z, axis=-1) - params.biases[i]
    return float(m) if np.ndim(m) == 0 else m


def transform_params(params: NetworkParams, epsilon: float, use_lambda: bool = True) -> TransformedParams:
    epsilon = check_epsilon(epsilon)
    lam = lambda_eps(epsilon) if use_lambda else 1.0
    c = np.sqrt(epsilon) / (2.0 * lam)
    return TransformedParams(
        wp_diag=2.0 / np.sqrt(epsilon),
        wp=c * params.weights,
        bp=c * params.biases - 1.0 / np.sqrt(epsilon),
        epsilon=epsilon,
        lambda_used=use_lambda,
    )


@dataclass(frozen=True)
class LogisticFit:
    """Activation fit Φ((x - mu0)/r) ≈ σ(x)."""

    r: float = 1.0
    mu0: float = 0.0
    residual: float = 0.0

    def __post_init__(self):
        if not self.r > 0:
            raise ParameterError(f"fit scale r must be positive, got {self.r}")


IDENTITY_FIT = LogisticFit()


def _site_rows(state: BinaryState, sites):
    return np.arange(state.chains), np.broadcast_to(np.asarray(sites), (state.chains,))


def gibbs_step(params: NetworkParams, state: BinaryState, sites, rng: RngStream) -> BinaryState:
    """Sets z_i = 1 with probability σ(-m_i), independent of the current z_i."""
    rows, sites = _site_rows(state, sites)
    m = total_input(params, state.z, sites)
    r = sample_uniform(rng, size=state.chains)
    state.z[rows, sites] = r < logistic(-m)
    return state


def lm1_step(params: NetworkParams, state: BinaryState, sites, rng: RngStream, fit: Optional[LogisticFit] = None) -> BinaryState:
    """Threshold unit z_i = Θ[-m_i - μ⁰ + r·η]; activation Φ((-m_i - μ⁰)/r)."""
    fit = fit or IDENTITY_FIT
    rows, sites = _site_rows(state, sites)
    m = total_input(params, state.z, sites)
    eta = sample_std_normal(rng, size=state.chains)
    state.z[rows, sites] = (-m - fit.mu0 + fit.r * eta) >= 0.0
    return state


def lm2_step(tp: TransformedParams, state: BinaryState, sites, truncation: Optional[TruncationSpec], rng: RngStream) -> BinaryState:
    """
    Sign-dependent update z_i = Θ[W'_ii z_i + Σ_j W'_ij z_j + b'_i + η^T].

    The flip in either direction happens iff η^T >= 1/√ε + c·ΔE, ΔE = ±m_i. An
    active neuron uses the mirrored draw, which leaves untruncated statistics
    unchanged and keeps the truncated rule exact for both directions.
    """
    rows, sites = _site_rows(state, sites)
    drive = np.sum(tp.wp[sites] * state.z, axis=-1) + tp.bp[sites]
    current = state.z[rows, sites]
    threshold = np.where(current == 1, tp.wp_diag + drive, -drive)
    lower = truncation.lower if truncation is not None else -np.inf
    eta = sample_truncated_normal(rng, lower, size=state.chains)
    state.z[rows, sites] = current ^ (eta >= threshold)
    return state


class Process(str, Enum):
    """Processes with a closed-form 0 -> 1 transition probability."""

    BM = "bm"
    LM1 = "lm1"
    LM2 = "lm2"
    OU2 = "ou2"

    @classmethod
    def parse(cls, name: Union[str, "Process"]) -> "Process":
        if isinstance(name, Process):
            return name
        aliases = {"gibbs": "bm"}
        key = str(name).strip().lower()
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ParameterError(f"Unknown process: {name}. Supported: bm, lm1, lm2, ou2") from None


def activation_table(process, m, epsilon: Optional[float] = None, tau_ref: float = 1.0, use_lambda: bool = True):
    """
    Probability of a 0 -> 1 transition per update (per unit time for OU2).

    A refractory time τ_ref shifts the input to m + log τ_ref.
    """
    process = Process.parse(process)
    if tau_ref < 1.0:
        raise ParameterError(f"tau_ref must be >= 1, got {tau_ref}")
    m = np.asarray(m, dtype=float) + np.log(tau_ref)
    if process is Process.BM:
        value = logistic(-m)
    elif process is Process.LM1:
        value = std_normal_cdf(-m)
    else:
        if epsilon is None:
            raise ParameterError(f"process {process.value} needs epsilon")
        epsilon = check_epsilon(epsilon)
        a = 1.0 / np.sqrt(epsilon)
        if process is Process.LM2:
            lam = lambda_eps(epsilon) if use_lambda else 1.0
            value = np.exp(log_std_normal_cdf(-a - np.sqrt(epsilon) / (2.0 * lam) * m))
        else:
            value = std_normal_pdf(-a - 0.5 * np.sqrt(epsilon) * m)
    return float(value) if np.ndim(value) == 0 else value


def lm2_transition_rates(m, epsilon: float, use_lambda: bool = True, truncation: Optional[TruncationSpec] = None):
    """(W01, W10) of the sign-dependent machine for input m."""
    epsilon = check_epsilon(epsilon)
    a = 1.0 / np.sqrt(epsilon)
    c = np.sqrt(epsilon) / (2.0 * (lambda_eps(epsilon) if use_lambda else 1.0))
    m = np.asarray(m, dtype=float)
    log_norm = 0.0
    if truncation is not None and truncation.truncated:
        log_norm = log_std_normal_cdf(-truncation.lower)
    w01 = np.exp(log_std_normal_cdf(-a - c * m) - log_norm)
    w10 = np.exp(log_std_normal_cdf(-a + c * m) - log_norm)
    return w01, w10


def lm2_stationary_activation(b, epsilon: float, use_lambda: bool = True):
    """Two-state stationary P(z=1) = W01/(W01 + W10) for a free neuron with bias b."""
    w01, w10 = lm2_transition_rates(-np.asarray(b, dtype=float), epsilon, use_lambda)
    # ratio form stays finite when both rates underflow
    value = 1.0 / (1.0 + w10 / w01)
    return float(value) if np.ndim(value) == 0 else value


def transition_matrix(params: NetworkParams, on_probability: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    """
    Exact random-sequential transition matrix over all 2^n states.

    Args:
        params: Network parameters
        on_probability: (z_i, m_i) -> P(z_i' = 1), vectorized

    Returns:
        Row-stochastic matrix T[s, s'] in little-endian state order
    """
    states = all_configurations(params.n)
    size = states.shape[0]
    matrix = np.zeros((size, size))
    for i in range(params.n):
        m = total_input(params, states, np.full(size, i))
        p_on = on_probability(states[:, i], m)
        up = np.arange(size) | (1 << i)
        down = np.arange(size) & ~(1 << i)
        np.add.at(matrix, (np.arange(size), up), p_on / params.n)
        np.add.at(matrix, (np.arange(size), down), (1.0 - p_on) / params.n)
    return matrix


@dataclass
class ActivationCurve:
    """Empirical P(z=1) per bias with standard errors."""

    biases: np.ndarray
    p: np.ndarray
    err: np.ndarray
    samples: int = 0

    @property
    def deviation(self) -> np.ndarray:
        """P(b) - σ(b)."""
        return self.p - logistic(self.biases)


def measure_activation(
    factory: Callable[[NetworkParams], "BaseSampler"],
    b_grid: Sequence[float],
    samples: int,
    rng: RngStream,
    chains: int = 64,
    burn_in: float = 100.0,
) -> ActivationCurve:
    """
    Free-neuron activation function of a sampler.

    Every bias of the grid becomes one uncoupled neuron of a single network,
    so all grid points are sampled together. The error per point is the larger
    of the binomial error and the spread of the independent chain means.

    Args:
        factory: Builds a sampler for given network parameters
        b_grid: Biases to scan
        samples: Recorded samples per bias, split over the chains
        rng: Random stream
        chains: Independent chains
        burn_in: Discarded time units before recording

    Returns:
        ActivationCurve over b_grid
    """
    if samples <= 0:
        raise InsufficientDataError("samples must be positive")
    sampler = factory(NetworkParams.free(b_grid))
    state = sampler.init_state(chains, rng)
    state = sampler.run(state, int(math.ceil(burn_in * sampler.ticks_per_unit)), rng)

    ticks = int(math.ceil(samples / chains))
    totals = np.zeros((chains, len(b_grid)))

    def accumulate(_tick, current):
        np.add(totals, sampler.spikes(current), out=totals)

    sampler.run(state, ticks, rng, observer=accumulate)
    chain_means = totals / ticks
    p = chain_means.mean(axis=0)
    total = ticks * chains
    binomial = np.sqrt(np.maximum(p * (1.0 - p), 1.0 / total) / total)
    spread = chain_means.std(axis=0, ddof=1) / np.sqrt(chains) if chains > 1 else np.zeros_like(p)
    return ActivationCurve(np.asarray(b_grid, dtype=float), p, np.maximum(binomial, spread), total)


FIT_GRID = np.round(np.arange(-6.0, 6.0 + 1e-9, 0.05), 10)


def fit_logistic(target: Union[None, Callable, ActivationCurve] = None, grid: Optional[np.ndarray] = None) -> LogisticFit:
    """
    Least-squares fit of Φ((x - μ⁰)/r) to an activation target.

    Args:
        target: Callable x -> probability (default σ), or a measured curve
        grid: Evaluation grid for callables, default [-6, 6] step 0.05

    Returns:
        LogisticFit with the sup-norm residual on the grid
    """
    if isinstance(target, ActivationCurve):
        x, y = target.biases, target.p
    else:
        x = FIT_GRID if grid is None else np.asarray(grid, dtype=float)
        y = (target or logistic)(x)

    def model(values, r, mu0):
        return std_normal_cdf((values - mu0) / r)

    try:
        (r, mu0), _ = optimize.curve_fit(model, x, y, p0=(1.6, 0.0), bounds=([1e-3, -np.inf], [np.inf, np.inf]))
    except (RuntimeError, ValueError) as e:
        raise ConvergenceError(f"activation fit failed: {e}") from e
    residual = float(np.max(np.abs(model(x, r, mu0) - y)))
    console.print(f"[dim]fit_logistic: r={r:.6f} mu0={mu0:.2e} residual={residual:.4f}[/dim]")
    return LogisticFit(float(r), float(mu0), residual)

