"""
Langevin update rule for discrete systems.

A single-site proposal φ -> ν is accepted iff

    -1 - (ε/(2λ_ε))·ΔS(ν, φ) + √ε·η^T >= 0,    ΔS = S(ν) - S(φ),

with η^T standard normal, optionally truncated below at 1/√ε + α. The rule is
evaluated in the equivalent threshold form η^T >= 1/√ε + (√ε/(2λ_ε))·ΔS.

Every kernel works on a batch of independent chains: states have shape
(chains, n_sites) and one site per chain is updated per call.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .errors import DimensionError, ParameterError, TruncationBoundError
from .math_kernel import check_epsilon, lambda_eps, log_std_normal_cdf
from .noise import RngStream, TruncationSpec, sample_truncated_normal, sample_uniform


class DiscreteSystem(ABC):
    """
    Finite single-site state space with an action S.

    Site values run over first_state .. first_state + n_states - 1.
    """

    first_state: int = 0

    @property
    @abstractmethod
    def n_sites(self) -> int:
        pass

    @property
    @abstractmethod
    def n_states(self) -> int:
        pass

    @property
    @abstractmethod
    def delta_max(self) -> float:
        """Upper bound on |ΔS| over all single-site proposals."""
        pass

    @abstractmethod
    def action(self, states: np.ndarray) -> np.ndarray:
        """S for each chain, shape (chains,)."""
        pass

    @abstractmethod
    def delta_action(self, states: np.ndarray, sites: np.ndarray, proposals: np.ndarray) -> np.ndarray:
        """S(ν) - S(φ) for changing states[c, sites[c]] to proposals[c]."""
        pass

    def check_proposals(self, proposals: np.ndarray) -> None:
        low, high = self.first_state, self.first_state + self.n_states - 1
        if np.any(proposals < low) or np.any(proposals > high):
            raise ParameterError(f"proposal outside state range [{low}, {high}]")

    def propose(self, states: np.ndarray, sites: np.ndarray, rng: RngStream) -> np.ndarray:
        """Uniform proposal over the n_states - 1 values different from the current one."""
        rows = np.arange(states.shape[0])
        current = states[rows, sites] - self.first_state
        shift = rng.integers(self.n_states - 1, size=states.shape[0]) + 1
        return (current + shift) % self.n_states + self.first_state


class TabulatedSystem(DiscreteSystem):
    """One site with q states and a tabulated action S(k)."""

    def __init__(self, actions: Sequence[float]):
        self.actions = np.asarray(actions, dtype=float)
        if self.actions.ndim != 1 or self.actions.size < 2:
            raise DimensionError("need a 1-D action table with at least two states")

    @property
    def n_sites(self) -> int:
        return 1

    @property
    def n_states(self) -> int:
        return self.actions.size

    @property
    def delta_max(self) -> float:
        return float(self.actions.max() - self.actions.min())

    def action(self, states: np.ndarray) -> np.ndarray:
        return self.actions[states[:, 0]]

    def delta_action(self, states, sites, proposals):
        rows = np.arange(states.shape[0])
        return self.actions[proposals] - self.actions[states[rows, sites]]

    def boltzmann(self) -> np.ndarray:
        """Exact stationary target exp(-S)/Z."""
        weights = np.exp(-(self.actions - self.actions.min()))
        return weights / weights.sum()


@dataclass(frozen=True)
class DlmConfig:
    epsilon: float
    truncation: TruncationSpec = field(default=None)
    use_lambda: bool = True

    def __post_init__(self):
        check_epsilon(self.epsilon)
        if self.truncation is None:
            object.__setattr__(self, "truncation", TruncationSpec(epsilon=self.epsilon))
        elif not np.isclose(self.truncation.epsilon, self.epsilon, rtol=0.0, atol=1e-15):
            raise ParameterError("truncation epsilon differs from the update epsilon")

    @classmethod
    def for_system(cls, system: DiscreteSystem, epsilon: float, alpha="max", use_lambda: bool = True) -> "DlmConfig":
        """Config with α resolved against the system's Δ_max and validated."""
        truncation = TruncationSpec.from_setting(alpha, epsilon, system.delta_max, use_lambda)
        config = cls(epsilon, truncation, use_lambda)
        config.validate(system.delta_max)
        return config

    @property
    def lam(self) -> float:
        return lambda_eps(self.epsilon) if self.use_lambda else 1.0

    @property
    def scale(self) -> float:
        """√ε/(2λ_ε), the coefficient of ΔS in the threshold."""
        return np.sqrt(self.epsilon) / (2.0 * self.lam)

    def validate(self, delta_max: float) -> None:
        self.truncation.validate(delta_max, self.use_lambda)


def _log_transition(delta_s, config: DlmConfig):
    a = 1.0 / np.sqrt(config.epsilon)
    return log_std_normal_cdf(-a - config.scale * np.asarray(delta_s, dtype=float))


def transition_prob(delta_s, config: DlmConfig):
    """
    W(ΔS) = Φ(-1/√ε - (√ε/(2λ_ε))ΔS) / Φ(-1/√ε - α).

    The denominator is 1 for untruncated noise.
    """
    log_value = _log_transition(delta_s, config)
    if config.truncation.truncated:
        log_value = log_value - log_std_normal_cdf(-config.truncation.lower)
    value = np.exp(log_value)
    if np.any(value > 1.0 + 1e-12):
        raise TruncationBoundError("transition probability exceeds 1; alpha violates the delta_max bound")
    return np.minimum(value, 1.0) if np.ndim(value) else float(min(value, 1.0))


def detailed_balance_residual(delta_s, config: DlmConfig):
    """log[W(ΔS)/W(-ΔS)] + ΔS; zero for exact detailed balance. Truncation cancels."""
    delta_s = np.asarray(delta_s, dtype=float)
    residual = _log_transition(delta_s, config) - _log_transition(-delta_s, config) + delta_s
    return residual if residual.ndim else float(residual)


def _prepare(system: DiscreteSystem, states: np.ndarray, sites, proposals):
    sites = np.broadcast_to(np.asarray(sites), (states.shape[0],))
    proposals = np.broadcast_to(np.asarray(proposals), (states.shape[0],))
    if np.any(sites < 0) or np.any(sites >= system.n_sites):
        raise DimensionError("site index out of range")
    system.check_proposals(proposals)
    return sites, proposals


def _accept(states: np.ndarray, sites: np.ndarray, proposals: np.ndarray, accepted: np.ndarray) -> np.ndarray:
    rows = np.flatnonzero(accepted)
    states[rows, sites[rows]] = proposals[rows]
    return states


def dlm_step(system: DiscreteSystem, states: np.ndarray, sites, proposals, config: DlmConfig, rng: RngStream) -> np.ndarray:
    """
    One Langevin update per chain, in place.

    Args:
        system: System providing ΔS
        states: Chain states, shape (chains, n_sites)
        sites: Site to update per chain
        proposals: Proposed value per chain
        config: ε, truncation and λ flag
        rng: Owning random stream

    Returns:
        The updated states array
    """
    sites, proposals = _prepare(system, states, sites, proposals)
    delta_s = system.delta_action(states, sites, proposals)
    eta = sample_truncated_normal(rng, config.truncation.lower, size=states.shape[0])
    threshold = 1.0 / np.sqrt(config.epsilon) + config.scale * delta_s
    return _accept(states, sites, proposals, eta >= threshold)


def metropolis_equivalent_step(system: DiscreteSystem, states: np.ndarray, sites, proposals, rng: RngStream) -> np.ndarray:
    """Uniform-random form of the maximally truncated rule: accept with exp(-(ΔS + Δ_max)/2)."""
    sites, proposals = _prepare(system, states, sites, proposals)
    delta_s = system.delta_action(states, sites, proposals)
    r = sample_uniform(rng, size=states.shape[0])
    return _accept(states, sites, proposals, np.exp(-0.5 * (delta_s + system.delta_max)) - r >= 0.0)


def metropolis_step(system: DiscreteSystem, states: np.ndarray, sites, proposals, rng: RngStream) -> np.ndarray:
    """Reference Metropolis update, acceptance min(1, exp(-ΔS))."""
    sites, proposals = _prepare(system, states, sites, proposals)
    delta_s = system.delta_action(states, sites, proposals)
    r = sample_uniform(rng, size=states.shape[0])
    return _accept(states, sites, proposals, r < np.exp(-np.maximum(delta_s, 0.0)))


UPDATE_METHODS = ("dlm", "metropolis", "metropolis_equivalent")


def make_updater(method: str, config: Optional[DlmConfig] = None) -> Callable:
    """Returns update(system, states, sites, proposals, rng) for a method name."""
    if method == "dlm":
        if config is None:
            raise ParameterError("the dlm update needs a DlmConfig")
        return lambda system, states, sites, proposals, rng: dlm_step(system, states, sites, proposals, config, rng)
    if method == "metropolis":
        return metropolis_step
    if method == "metropolis_equivalent":
        return metropolis_equivalent_step
    raise ParameterError(f"Unknown update method: {method}. Supported: {', '.join(UPDATE_METHODS)}")


MAX_ENUMERATED_STATES = 4096


def all_states(system: DiscreteSystem) -> np.ndarray:
    """Every configuration, read as base-n_states digits with site 0 the most significant."""
    size = system.n_states ** system.n_sites
    if size > MAX_ENUMERATED_STATES:
        raise ParameterError(f"enumeration limited to {MAX_ENUMERATED_STATES} states, got {size}")
    digits = np.indices((system.n_states,) * system.n_sites).reshape(system.n_sites, -1).T
    return digits + system.first_state


def acceptance_prob(method: str, delta_s, delta_max: float, config: Optional[DlmConfig] = None):
    """Closed-form acceptance probability of an update method for a proposal with action change ΔS."""
    delta_s = np.asarray(delta_s, dtype=float)
    if method == "dlm":
        if config is None:
            raise ParameterError("the dlm update needs a DlmConfig")
        return transition_prob(delta_s, config)
    if method == "metropolis":
        return np.exp(-np.maximum(delta_s, 0.0))
    if method == "metropolis_equivalent":
        return np.minimum(np.exp(-0.5 * (delta_s + delta_max)), 1.0)
    raise ParameterError(f"Unknown update method: {method}. Supported: {', '.join(UPDATE_METHODS)}")


def update_matrix(system: DiscreteSystem, method: str, config: Optional[DlmConfig] = None) -> np.ndarray:
    """
    Exact transition matrix of one random-site step with a uniform proposal.

    Args:
        system: Small system, at most MAX_ENUMERATED_STATES configurations
        method: Update method name
        config: DlmConfig for the dlm method

    Returns:
        Row-stochastic matrix T[s, s'] in all_states order
    """
    states = all_states(system)
    size, n, q = states.shape[0], system.n_sites, system.n_states
    rows = np.arange(size)
    place = q ** np.arange(n - 1, -1, -1)
    matrix = np.zeros((size, size))
    for site in range(n):
        sites = np.full(size, site)
        current = states[:, site]
        for shift in range(1, q):
            proposals = (current - system.first_state + shift) % q + system.first_state
            accept = acceptance_prob(method, system.delta_action(states, sites, proposals), system.delta_max, config)
            matrix[rows, rows + (proposals - current) * place[site]] += accept / (n * (q - 1))
    matrix[rows, rows] += 1.0 - matrix.sum(axis=1)
    return matrix


def run_sweeps(
    system: DiscreteSystem,
    states: np.ndarray,
    sweeps: int,
    update: Callable,
    rng: RngStream,
    observer: Optional[Callable[[int, np.ndarray], None]] = None,
) -> np.ndarray:
    """
    Random sequential updates: each sweep is n_sites single-site steps per chain.

    observer(sweep_index, states) is called after every sweep.
    """
    chains = states.shape[0]
    for sweep in range(sweeps):
        for _ in range(system.n_sites):
            sites = rng.integers(system.n_sites, size=chains)
            proposals = system.propose(states, sites, rng)
            update(system, states, sites, proposals, rng)
        if observer is not None:
            observer(sweep, states)
    return states


@dataclass(frozen=True)
class RunRecord:
    """Time-stamped observables with the time convention ('computer' or 'real')."""

    times: np.ndarray
    observables: Dict[str, np.ndarray]
    time_scale: str = "computer"

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        for name, values in self.observables.items():
            if len(values) != len(times):
                raise DimensionError(f"observable {name} has {len(values)} rows for {len(times)} times")
        object.__setattr__(self, "times", times)


def rescale_time(record: RunRecord, a: float) -> RunRecord:
    """W -> a·W is equivalent to t -> t/a: divides every time stamp by a."""
    if not a > 0:
        raise ParameterError(f"time scale factor must be positive, got {a}")
    return replace(record, times=record.times / a)
