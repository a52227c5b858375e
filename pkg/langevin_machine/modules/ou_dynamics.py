"""
Continuous membrane dynamics with a spiking projection.

Each neuron carries an effective potential u following an Ornstein-Uhlenbeck
process du = θ(μ - u)dt + σ dW. Interactions only see the projection
z = Θ[u - ϑ]. All neurons of a network advance together; the drift uses the
projection latched at the start of the step.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from rich.console import Console
from scipy import optimize

from .boltzmann_networks import ActivationCurve, IDENTITY_FIT, LogisticFit, NetworkParams, TransformedParams, activation_table
from .discrete_langevin import RunRecord
from .errors import ConvergenceError, DimensionError, InsufficientDataError, ParameterError, ZeroDenominatorError
from .math_kernel import check_epsilon, log_std_normal_cdf, logistic, std_normal_cdf, std_normal_pdf
from .noise import RngStream, sample_std_normal

console = Console(stderr=True)


@dataclass(frozen=True)
class OuConfig:
    theta: float = 1.0
    sigma: float = math.sqrt(2.0)
    dt: float = 0.02
    threshold: float = 0.0
    exact: bool = False

    def __post_init__(self):
        if not self.theta > 0 or not self.sigma >= 0:
            raise ParameterError(f"need theta > 0 and sigma >= 0, got {self.theta}, {self.sigma}")
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")

    @property
    def ticks_per_unit(self) -> int:
        """Integrator steps per unit of time."""
        return max(1, int(round(1.0 / self.dt)))

    def ticks(self, duration: float) -> int:
        return int(round(duration / self.dt))


@dataclass
class MembraneState:
    """
    Potentials u and projections z for a batch of chains, shape (chains, n).

    counters hold the remaining refractory integrator steps. Without an
    explicit z the projection starts as Θ[u - threshold].
    """

    u: np.ndarray
    z: np.ndarray = field(default=None)
    counters: np.ndarray = field(default=None)
    threshold: float = 0.0

    def __post_init__(self):
        self.u = np.atleast_2d(np.asarray(self.u, dtype=float))
        if self.counters is None:
            self.counters = np.zeros(self.u.shape, dtype=np.int64)
        if self.z is None:
            self.z = (self.u >= self.threshold).astype(np.int8)
        if self.z.shape != self.u.shape or self.counters.shape != self.u.shape:
            raise DimensionError("u, z and counters must share a shape")

    @property
    def chains(self) -> int:
        return self.u.shape[0]

    @classmethod
    def at(cls, u0, chains: int, n: int, threshold: float = 0.0) -> "MembraneState":
        u = np.full((chains, n), u0, dtype=float)
        return cls(u, threshold=threshold)

    def project(self, threshold: float, refractory_ticks: int = 0) -> "MembraneState":
        """
        Recomputes z after a step.

        Without refractoriness z = Θ[u - ϑ]. With it, a neuron that is not
        refractory and sits at or above threshold fires and stays active for
        refractory_ticks steps whatever u does; u itself is never reset.
        """
        if refractory_ticks > 0:
            np.subtract(self.counters, 1, out=self.counters, where=self.counters > 0)
            fire = (self.counters == 0) & (self.u >= threshold)
            self.counters[fire] = refractory_ticks
        self.z = ((self.u >= threshold) | (self.counters > 0)).astype(np.int8)
        return self


def ou_step(u, mu, config: OuConfig, rng: RngStream, theta_scale: float = 1.0):
    """
    One step of du = θ(μ - u)dt + σ dW.

    Euler-Maruyama by default; config.exact uses the exact Gaussian transition
    for a drift target held constant over the step.
    """
    u = np.asarray(u, dtype=float)
    theta = config.theta * theta_scale
    eta = sample_std_normal(rng, size=u.shape or None)
    if config.exact:
        decay = math.exp(-theta * config.dt)
        spread = config.sigma * math.sqrt((1.0 - decay * decay) / (2.0 * theta))
        return mu + (u - mu) * decay + spread * eta
    return u + theta * (mu - u) * config.dt + config.sigma * math.sqrt(config.dt) * eta


def ou_free_activation(mu, config: OuConfig = OuConfig()):
    """P(u >= ϑ) = Φ(√(2θ)/σ·(μ - ϑ)) under the stationary Gaussian."""
    return std_normal_cdf(math.sqrt(2.0 * config.theta) / config.sigma * (np.asarray(mu) - config.threshold))


def ou1_network_step(
    params: NetworkParams,
    state: MembraneState,
    fit: Optional[LogisticFit],
    config: OuConfig,
    rng: RngStream,
    refractory_ticks: int = 0,
) -> MembraneState:
    """Drift (θ/r²)[Σ_j W_ij z_j + b_i - μ⁰ - u_i]; activation Φ((x - μ⁰)/r)."""
    fit = fit or IDENTITY_FIT
    if state.u.shape[-1] != params.n:
        raise DimensionError(f"state has {state.u.shape[-1]} neurons, network has {params.n}")
    target = state.z @ params.weights + params.biases - fit.mu0
    state.u = ou_step(state.u, target, config, rng, theta_scale=1.0 / (fit.r * fit.r))
    return state.project(config.threshold, refractory_ticks)


def ou2_network_step(
    tp: TransformedParams,
    state: MembraneState,
    config: OuConfig,
    rng: RngStream,
    refractory_ticks: int = 0,
) -> MembraneState:
    """
    Sign-dependent drift θ[W'_ii z_i + Σ_j W'_ij z_j + b'_i - u_i].

    The self term uses the neuron's own projection, so an active neuron relaxes
    towards +1/√ε + (√ε/2)(Σ W z + b) and an inactive one towards
    -1/√ε + (√ε/2)(Σ W z + b).
    """
    if tp.lambda_used:
        raise ParameterError("the sign-dependent OU process uses parameters transformed without lambda")
    target = tp.wp_diag * state.z + state.z @ tp.wp + tp.bp
    state.u = ou_step(state.u, target, config, rng)
    return state.project(config.threshold, refractory_ticks)


def ou2_theoretical_transitions(m, epsilon: float):
    """
    Threshold densities of the opposite regime's stationary Gaussian.

    w01 = φ(-1/√ε - (√ε/2)m), w10 = φ(-1/√ε + (√ε/2)m); w01/(w01 + w10)
    equals σ(-m) for every ε.
    """
    epsilon = check_epsilon(epsilon)
    a = 1.0 / math.sqrt(epsilon)
    shift = 0.5 * math.sqrt(epsilon) * np.asarray(m, dtype=float)
    return std_normal_pdf(-a - shift), std_normal_pdf(-a + shift)


def ou2_stationary_activation(b, epsilon: float, config: OuConfig = OuConfig()):
    """
    Exact stationary P(z=1) of a free sign-dependent neuron in continuous time.

    Above threshold u relaxes towards μ₁ = 1/√ε + (√ε/2)b, below it towards
    μ₀ = -1/√ε + (√ε/2)b. The stationary density is the two Gaussians of
    variance σ²/(2θ) joined continuously at ϑ. For ϑ = 0 and unit variance
    the odds are e^b·Φ(1/√ε + (√ε/2)b)/Φ(1/√ε - (√ε/2)b), which tend to e^b
    as ε → 0.
    """
    epsilon = check_epsilon(epsilon)
    if not config.sigma > 0:
        raise ParameterError("the stationary activation needs sigma > 0")
    spread = config.sigma / math.sqrt(2.0 * config.theta)
    a = 1.0 / math.sqrt(epsilon)
    shift = 0.5 * math.sqrt(epsilon) * np.asarray(b, dtype=float)
    above = (a + shift - config.threshold) / spread
    below = (a - shift + config.threshold) / spread
    log_odds = 0.5 * (above * above - below * below) + log_std_normal_cdf(above) - log_std_normal_cdf(below)
    return logistic(log_odds)


def calibrate_r(epsilon: float, curve: ActivationCurve) -> float:
    """
    Post-hoc bias rescaling r with P_meas(b) ≈ σ(b/r).

    A process run at bias r·b then has activation ≈ σ(b).
    """
    check_epsilon(epsilon)
    b, p = np.asarray(curve.biases, dtype=float), np.asarray(curve.p, dtype=float)
    if b.min() > -4.0 + 1e-9 or b.max() < 4.0 - 1e-9:
        raise InsufficientDataError("calibration curve must cover b in [-4, 4]")
    if np.ptp(p) < 1e-9:
        raise ConvergenceError("activation curve is constant; r is undetermined")

    result = optimize.minimize_scalar(
        lambda r: float(np.sum(np.square(p - logistic(b / r)))),
        bounds=(0.05, 20.0),
        method="bounded",
        options={"xatol": 1e-9},
    )
    if not result.success:
        raise ConvergenceError(f"r calibration failed at eps={epsilon}: {result.message}")
    console.print(f"[dim]calibrate_r: eps={epsilon} r={result.x:.4f}[/dim]")
    return float(result.x)


def time_scale_factor(process_a, process_b, m: float, epsilon: Optional[float] = None, tau_ref: float = 1.0) -> float:
    """a = W_A(0 -> 1)/W_B(0 -> 1); A's record rescaled by a runs on B's clock."""
    numerator = activation_table(process_a, m, epsilon, tau_ref)
    denominator = activation_table(process_b, m, epsilon, tau_ref)
    if denominator == 0.0:
        raise ZeroDenominatorError(f"reference process {process_b} has zero transition probability at m={m}")
    return float(numerator / denominator)


def record_trajectory(sampler, state: MembraneState, duration: float, rng: RngStream, decimation: int = 1) -> RunRecord:
    """
    Records u and z of the first chain every `decimation` integrator steps.

    Args:
        sampler: Continuous sampler advancing MembraneState
        state: Initial state
        duration: Simulated time
        rng: Random stream
        decimation: Keep one step out of this many

    Returns:
        RunRecord in real time with observables u and z of shape (T, n)
    """
    if decimation < 1:
        raise ParameterError(f"decimation must be >= 1, got {decimation}")
    ticks = sampler.config.ticks(duration)
    times: List[float] = []
    us: List[np.ndarray] = []
    zs: List[np.ndarray] = []

    def keep(tick, current):
        if (tick + 1) % decimation == 0:
            times.append((tick + 1) * sampler.config.dt)
            us.append(current.u[0].copy())
            zs.append(current.z[0].copy())

    sampler.run(state, ticks, rng, observer=keep)
    n = state.u.shape[1]
    return RunRecord(
        np.asarray(times),
        {"u": np.asarray(us).reshape(-1, n), "z": np.asarray(zs).reshape(-1, n)},
        time_scale="real",
    )


def trajectory_rows(record: RunRecord) -> List[list]:
    """Flattens a trajectory into (t, neuron_index, u, z) rows."""
    rows = []
    for t, u_row, z_row in zip(record.times, record.observables["u"], record.observables["z"]):
        for index, (u, z) in enumerate(zip(u_row, z_row)):
            rows.append([float(t), index, float(u), int(z)])
    return rows


def regime_histograms(u: np.ndarray, z: np.ndarray, bins: int = 60, span=(-5.0, 5.0)) -> Dict[str, np.ndarray]:
    """
    Potential histograms split by the current projection.

    Densities are normalized over all samples, so active + inactive integrates
    to one and each part carries its regime occupancy.
    """
    u, z = np.ravel(u), np.ravel(z)
    if u.size == 0:
        raise InsufficientDataError("no samples for the regime histograms")
    edges = np.linspace(span[0], span[1], bins + 1)
    width = edges[1] - edges[0]
    active, _ = np.histogram(u[z == 1], bins=edges)
    inactive, _ = np.histogram(u[z == 0], bins=edges)
    return {
        "edges": edges,
        "centers": 0.5 * (edges[:-1] + edges[1:]),
        "active": active / (u.size * width),
        "inactive": inactive / (u.size * width),
        "occupancy": float(np.mean(z)),
    }


def ensemble_relaxation(sampler, state, units: int, rng: RngStream) -> RunRecord:
    """Chain-averaged z after each time unit, starting from the given state."""
    means = [sampler.spikes(state).mean(axis=0)]
    per_unit = sampler.ticks_per_unit

    def keep(tick, current):
        if (tick + 1) % per_unit == 0:
            means.append(sampler.spikes(current).mean(axis=0))

    sampler.run(state, units * per_unit, rng, observer=keep)
    return RunRecord(np.arange(units + 1, dtype=float), {"mean_z": np.asarray(means)}, time_scale=sampler.time_scale)
