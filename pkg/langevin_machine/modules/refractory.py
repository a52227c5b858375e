"""
Asymmetric refractory mechanism with a rectangular PSP.

After an activation a neuron stays active for τ_ref and its interaction
W_ij acts for that whole period. The reduced rate of fresh activations is
compensated by shifting every bias by -log τ'_ref.

Discrete samplers keep a counter c in {0..τ} per neuron with z = [c >= 1]:
a visit with c >= 2 only decrements c; otherwise the base rule runs and an
active outcome sets c = τ, an inactive one c = 0. With τ = 1 this is the
unwrapped sampler.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from rich.console import Console
from scipy import optimize

from .analysis import stationary_distribution
from .boltzmann_networks import BinaryState, NetworkParams, measure_activation, total_input
from .errors import BracketError, ParameterError
from .noise import RngStream
from .samplers import BaseSampler, ContinuousSampler, DiscreteSampler

console = Console(stderr=True)


@dataclass(frozen=True)
class RefractoryConfig:
    """τ_ref (visits for discrete samplers, time for continuous ones) and the shift τ'_ref."""

    tau_ref: float
    tau_prime: Optional[float] = None

    def __post_init__(self):
        if not self.tau_ref > 0:
            raise ParameterError(f"tau_ref must be positive, got {self.tau_ref}")
        if self.tau_prime is None:
            object.__setattr__(self, "tau_prime", float(self.tau_ref))
        if not self.tau_prime > 0:
            raise ParameterError(f"tau_prime must be positive, got {self.tau_prime}")

    @property
    def shift(self) -> float:
        return math.log(self.tau_prime)


def discrete_refractory_steps(tau_ref: float) -> int:
    if tau_ref < 1:
        raise ParameterError(f"discrete refractory time must be >= 1 visit, got {tau_ref}")
    return int(round(tau_ref))


class RefractorySampler(DiscreteSampler):
    """Counter-chain decorator around a discrete sampler with shifted biases."""

    def __init__(self, base: DiscreteSampler, config: RefractoryConfig):
        self.steps = discrete_refractory_steps(config.tau_ref)
        self.config = config
        self.unshifted = base
        self.base = base.with_params(base.params.shifted(-config.shift))
        super().__init__(self.base.params)
        self.process = base.process

    def init_state(self, chains: int, rng: RngStream) -> BinaryState:
        state = self.base.init_state(chains, rng)
        state.counters = state.z.astype(np.int64)
        return state

    def update_sites(self, state: BinaryState, sites: np.ndarray, rng: RngStream) -> BinaryState:
        rows = np.arange(state.chains)
        counters = state.counters[rows, sites]
        forced = counters > 1
        # the base rule always draws, so the random stream does not depend on the counters
        self.base.update_sites(state, sites, rng)
        new = np.where(forced, 1, state.z[rows, sites]).astype(np.int8)
        state.z[rows, sites] = new
        state.counters[rows, sites] = np.where(forced, counters - 1, np.where(new == 1, self.steps, 0))
        return state

    def transition_rates(self, m):
        return self.base.transition_rates(m)

    def with_params(self, params: NetworkParams) -> "RefractorySampler":
        return RefractorySampler(self.unshifted.with_params(params), self.config)

    def describe(self):
        info = self.base.describe()
        info.update(tau_ref=self.config.tau_ref, tau_prime=self.config.tau_prime)
        return info


def wrap_refractory(sampler: BaseSampler, config: RefractoryConfig) -> BaseSampler:
    """
    Adds refractoriness and the -log τ'_ref bias shift to a sampler.

    Continuous samplers hold the neuron (and its self term) active for
    round(τ_ref/dt) integrator steps while u keeps evolving; u is not reset.
    """
    if isinstance(sampler, DiscreteSampler):
        return RefractorySampler(sampler, config)
    if isinstance(sampler, ContinuousSampler):
        wrapped = sampler.with_params(sampler.params.shifted(-config.shift))
        wrapped.refractory_ticks = max(1, sampler.config.ticks(config.tau_ref))
        return wrapped
    raise ParameterError(f"cannot add refractoriness to {type(sampler).__name__}")


def counter_chain_matrix(w01: float, w10: float, steps: int) -> np.ndarray:
    """Per-visit transition matrix of one neuron's counter c in {0..steps}."""
    matrix = np.zeros((steps + 1, steps + 1))
    matrix[0, steps] = w01
    matrix[0, 0] = 1.0 - w01
    matrix[1, steps] += 1.0 - w10
    matrix[1, 0] += w10
    for c in range(2, steps + 1):
        matrix[c, c - 1] = 1.0
    return matrix


def counter_chain_activation(w01: float, w10: float, steps: int) -> float:
    """Stationary P(z=1) of a single refractory neuron; equals τ·W01/(τ·W01 + W10)."""
    pi = stationary_distribution(counter_chain_matrix(w01, w10, steps))
    return float(1.0 - pi[0])


def refractory_stationary(sampler: RefractorySampler) -> np.ndarray:
    """
    Exact stationary distribution over z of a small refractory network.

    Enumerates the product chain of all counters, (τ+1)^n states, and
    marginalizes onto the 2^n binary configurations (little-endian).
    """
    n, steps = sampler.params.n, sampler.steps
    base = sampler.base
    levels = steps + 1
    counters = np.array(np.unravel_index(np.arange(levels ** n), (levels,) * n)).T
    size = counters.shape[0]
    matrix = np.zeros((size, size))
    strides = np.array([levels ** (n - 1 - k) for k in range(n)])
    for index in range(size):
        c = counters[index]
        z = (c > 0).astype(np.int8)
        for i in range(n):
            if c[i] > 1:
                matrix[index, index - strides[i]] += 1.0 / n
                continue
            p_on = float(base.on_probability(z[i], total_input(base.params, z, i)))
            matrix[index, index + (steps - c[i]) * strides[i]] += p_on / n
            matrix[index, index - c[i] * strides[i]] += (1.0 - p_on) / n
    pi = stationary_distribution(matrix)
    z_index = ((counters > 0) * (1 << np.arange(n))).sum(axis=1)
    return np.bincount(z_index, weights=pi, minlength=2 ** n)


@dataclass(frozen=True)
class CalibrationResult:
    process: str
    epsilon: Optional[float]
    tau_ref: float
    tau_prime: float
    residual: float


def calibrate_tau_prime(
    factory: Callable[[NetworkParams], BaseSampler],
    tau_ref: float,
    rng: Optional[RngStream] = None,
    samples: int = 10 ** 6,
    chains: int = 64,
    burn_in: float = 200.0,
    tolerance: float = 2e-3,
    bracket: Optional[Tuple[float, float]] = None,
) -> CalibrationResult:
    """
    Finds τ'_ref with P(z=1) = 1/2 for a free neuron at b = 0.

    Bisection on log τ'. Discrete samplers use the exact counter chain;
    continuous ones are simulated with the same stream for every evaluation, so the
    measured function is deterministic.

    Args:
        factory: Builds the unwrapped sampler for given parameters
        tau_ref: Refractory time
        rng: Stream for simulated evaluations
        samples: Samples per simulated evaluation
        chains: Chains per simulated evaluation
        burn_in: Discarded time units per simulated evaluation
        tolerance: Target |P - 1/2|
        bracket: Search interval in log τ'

    Returns:
        CalibrationResult
    """
    base = factory(NetworkParams.free([0.0]))
    rng = rng or RngStream(0)
    exact = isinstance(base, DiscreteSampler)

    def offset(log_tau_prime: float) -> float:
        config = RefractoryConfig(tau_ref, math.exp(log_tau_prime))
        if exact:
            wrapped = wrap_refractory(base, config)
            w01, w10 = wrapped.transition_rates(-wrapped.params.biases[0])
            return counter_chain_activation(float(w01), float(w10), wrapped.steps) - 0.5
        stream = rng.spawn(0)
        curve = measure_activation(
            lambda p: wrap_refractory(factory(p), config), [0.0], samples, stream, chains=chains, burn_in=burn_in
        )
        return float(curve.p[0]) - 0.5

    low, high = bracket or (math.log(tau_ref) - 3.0, math.log(tau_ref) + 6.0)
    f_low, f_high = offset(low), offset(high)
    if f_low * f_high > 0:
        raise BracketError(
            f"no sign change for {base.process} tau_ref={tau_ref} on log tau' in [{low:.3f}, {high:.3f}] "
            f"(offsets {f_low:.4f}, {f_high:.4f})"
        )
    log_tau_prime = optimize.bisect(offset, low, high, xtol=1e-10 if exact else 1e-3, maxiter=200)
    residual = offset(log_tau_prime)
    if abs(residual) > tolerance:
        console.print(f"[yellow]Warning: calibration residual {residual:.4f} exceeds {tolerance}[/yellow]")
    result = CalibrationResult(base.process, getattr(base, "epsilon", None), tau_ref, math.exp(log_tau_prime), residual)
    console.print(f"[dim]calibrate_tau_prime: {result.process} tau_ref={tau_ref} tau_prime={result.tau_prime:.4f}[/dim]")
    return result


def rectangular_psp_interaction(params: NetworkParams, z: np.ndarray, counters: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Σ_j W_ij over neurons j that are active or inside their refractory window.

    Without counters this is the plain projection interaction Σ_j W_ij z_j.
    """
    active = np.asarray(z) > 0
    if counters is not None:
        active = active | (np.asarray(counters) > 0)
    return active.astype(float) @ params.weights
