"""
Discrete-time network samplers with random sequential updates.
"""
from abc import abstractmethod
from typing import Optional, Tuple, Union

import numpy as np

from ..boltzmann_networks import (
    BinaryState,
    LogisticFit,
    NetworkParams,
    gibbs_step,
    lm1_step,
    lm2_step,
    lm2_transition_rates,
    transform_params,
)
from ..math_kernel import logistic, std_normal_cdf
from ..noise import RngStream, TruncationSpec
from .base_sampler import BaseSampler


class DiscreteSampler(BaseSampler):
    """Samplers over BinaryState; a tick is one sweep of n site updates per chain."""

    def init_state(self, chains: int, rng: RngStream) -> BinaryState:
        return BinaryState.random(chains, self.params.n, rng)

    def spikes(self, state: BinaryState) -> np.ndarray:
        return state.z

    def tick(self, state: BinaryState, rng: RngStream) -> BinaryState:
        for _ in range(self.params.n):
            sites = rng.integers(self.params.n, size=state.chains)
            self.update_sites(state, sites, rng)
        return state

    @abstractmethod
    def update_sites(self, state: BinaryState, sites: np.ndarray, rng: RngStream) -> BinaryState:
        """Applies the update rule to one site per chain, in place."""
        pass

    @abstractmethod
    def transition_rates(self, m) -> Tuple[np.ndarray, np.ndarray]:
        """
        Closed-form single-update transition probabilities.

        Args:
            m: Total input m_i (scalar or array)

        Returns:
            (W01, W10) for the visited neuron
        """
        pass

    def on_probability(self, z_self, m) -> np.ndarray:
        """P(z_i' = 1) given the current z_i and input m_i."""
        w01, w10 = self.transition_rates(m)
        return np.where(np.asarray(z_self) == 1, 1.0 - w10, w01)


class GibbsSampler(DiscreteSampler):
    process = "gibbs"

    def update_sites(self, state, sites, rng):
        return gibbs_step(self.params, state, sites, rng)

    def transition_rates(self, m):
        return logistic(-np.asarray(m, dtype=float)), logistic(np.asarray(m, dtype=float))

    def with_params(self, params: NetworkParams) -> "GibbsSampler":
        return GibbsSampler(params)


class Lm1Sampler(DiscreteSampler):
    """Threshold unit with Gaussian noise; the fitted variant maps Φ onto σ."""

    def __init__(self, params: NetworkParams, fit: Optional[LogisticFit] = None):
        super().__init__(params)
        self.fit = fit
        self.process = "lm1f" if fit is not None else "lm1"

    def update_sites(self, state, sites, rng):
        return lm1_step(self.params, state, sites, rng, fit=self.fit)

    def transition_rates(self, m):
        r, mu0 = (self.fit.r, self.fit.mu0) if self.fit is not None else (1.0, 0.0)
        w01 = std_normal_cdf((-np.asarray(m, dtype=float) - mu0) / r)
        return w01, 1.0 - w01

    def with_params(self, params: NetworkParams) -> "Lm1Sampler":
        return Lm1Sampler(params, self.fit)

    def describe(self):
        info = super().describe()
        if self.fit is not None:
            info.update(r=self.fit.r, mu0=self.fit.mu0)
        return info


class Lm2Sampler(DiscreteSampler):
    """
    Sign-dependent discrete Langevin machine.

    alpha is a number, -inf (untruncated) or 'max' for the largest truncation
    the network's Δ_max allows.
    """

    process = "lm2"

    def __init__(self, params: NetworkParams, epsilon: float, alpha: Union[float, str] = -np.inf, use_lambda: bool = True):
        super().__init__(params)
        self.epsilon = epsilon
        self.alpha = alpha
        self.use_lambda = use_lambda
        self.transformed = transform_params(params, epsilon, use_lambda)
        self.truncation = TruncationSpec.from_setting(alpha, epsilon, params.delta_max, use_lambda)
        self.truncation.validate(params.delta_max, use_lambda)

    def update_sites(self, state, sites, rng):
        return lm2_step(self.transformed, state, sites, self.truncation, rng)

    def transition_rates(self, m):
        return lm2_transition_rates(m, self.epsilon, self.use_lambda, self.truncation)

    def with_params(self, params: NetworkParams) -> "Lm2Sampler":
        return Lm2Sampler(params, self.epsilon, self.alpha, self.use_lambda)

    def describe(self):
        info = super().describe()
        info.update(epsilon=self.epsilon, alpha=float(self.truncation.alpha), use_lambda=self.use_lambda)
        return info
