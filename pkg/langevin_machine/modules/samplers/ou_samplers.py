"""
Continuous-time samplers: OU processes with a spiking projection.
"""
from typing import Optional

import numpy as np

from ..boltzmann_networks import LogisticFit, NetworkParams, transform_params
from ..ou_dynamics import MembraneState, OuConfig, ou1_network_step, ou2_network_step
from ..noise import RngStream
from .base_sampler import BaseSampler


class ContinuousSampler(BaseSampler):
    """Parallel update of all neurons per integrator step; computer time equals real time."""

    time_scale = "real"

    def __init__(self, params: NetworkParams, config: Optional[OuConfig] = None):
        super().__init__(params)
        self.config = config or OuConfig()
        self.refractory_ticks = 0

    @property
    def ticks_per_unit(self) -> int:
        return self.config.ticks_per_unit

    def spikes(self, state: MembraneState) -> np.ndarray:
        return state.z

    def describe(self):
        info = super().describe()
        info.update(dt=self.config.dt, theta=self.config.theta, sigma=self.config.sigma, exact=self.config.exact)
        return info


class Ou1Sampler(ContinuousSampler):
    """Drift (θ/r²)[Σ W z + b - μ⁰ - u]; unfitted when fit is None."""

    def __init__(self, params: NetworkParams, fit: Optional[LogisticFit] = None, config: Optional[OuConfig] = None):
        super().__init__(params, config)
        self.fit = fit
        self.process = "ou1f" if fit is not None else "ou1"

    def init_state(self, chains: int, rng: RngStream) -> MembraneState:
        state = MembraneState(rng.normal((chains, self.params.n)), threshold=self.config.threshold)
        return state.project(self.config.threshold)

    def tick(self, state: MembraneState, rng: RngStream) -> MembraneState:
        return ou1_network_step(self.params, state, self.fit, self.config, rng, self.refractory_ticks)

    def with_params(self, params: NetworkParams) -> "Ou1Sampler":
        return Ou1Sampler(params, self.fit, self.config)


class Ou2Sampler(ContinuousSampler):
    """Sign-dependent OU process; parameters are transformed without λ_ε."""

    process = "ou2"

    def __init__(self, params: NetworkParams, epsilon: float, config: Optional[OuConfig] = None):
        super().__init__(params, config)
        self.epsilon = epsilon
        self.transformed = transform_params(params, epsilon, use_lambda=False)

    def init_state(self, chains: int, rng: RngStream) -> MembraneState:
        # start in a random regime, at its mean
        sign = 2.0 * rng.integers(2, size=(chains, self.params.n)) - 1.0
        state = MembraneState(sign / np.sqrt(self.epsilon) + self.config.threshold, threshold=self.config.threshold)
        return state.project(self.config.threshold)

    def tick(self, state: MembraneState, rng: RngStream) -> MembraneState:
        return ou2_network_step(self.transformed, state, self.config, rng, self.refractory_ticks)

    def with_params(self, params: NetworkParams) -> "Ou2Sampler":
        return Ou2Sampler(params, self.epsilon, self.config)

    def describe(self):
        info = super().describe()
        info.update(epsilon=self.epsilon)
        return info
