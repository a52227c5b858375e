"""
Base abstract class for network samplers.
Defines the interface every sampler (Gibbs, LM1, LM2, OU1, OU2, refractory wrappers) implements.
"""
from abc import ABC, abstractmethod
from typing import Any, Callable, Dict, Optional

import numpy as np

from ..boltzmann_networks import NetworkParams
from ..noise import RngStream


class BaseSampler(ABC):
    """
    Abstract base class for samplers of a Boltzmann machine.

    A tick is the sampler's elementary advance: one sweep of n random site
    updates for discrete samplers, one integrator step for continuous ones.
    """

    process: str = ""
    time_scale: str = "computer"

    def __init__(self, params: NetworkParams):
        """
        Initialize the sampler.

        Args:
            params: Network weights and biases
        """
        self.params = params

    @property
    def ticks_per_unit(self) -> int:
        """Ticks per unit of the sampler's time axis."""
        return 1

    @abstractmethod
    def init_state(self, chains: int, rng: RngStream):
        """
        Creates a random initial state.

        Args:
            chains: Number of independent chains
            rng: Random stream

        Returns:
            State batched over chains
        """
        pass

    @abstractmethod
    def tick(self, state, rng: RngStream):
        """Advances every chain by one tick, in place."""
        pass

    @abstractmethod
    def spikes(self, state) -> np.ndarray:
        """Binary neuron states, shape (chains, n)."""
        pass

    @abstractmethod
    def with_params(self, params: NetworkParams) -> "BaseSampler":
        """
        Same sampler settings for other network parameters.

        Args:
            params: Replacement network

        Returns:
            New sampler instance
        """
        pass

    def describe(self) -> Dict[str, Any]:
        return {"process": self.process, "n": self.params.n, "time_scale": self.time_scale}

    def run(self, state, ticks: int, rng: RngStream, observer: Optional[Callable[[int, Any], None]] = None):
        """
        Advances the state by a number of ticks.

        Args:
            state: Initial state, updated in place
            ticks: Number of ticks
            rng: Random stream
            observer: Called as observer(tick_index, state) after each tick

        Returns:
            The final state
        """
        for index in range(ticks):
            state = self.tick(state, rng)
            if observer is not None:
                observer(index, state)
        return state
