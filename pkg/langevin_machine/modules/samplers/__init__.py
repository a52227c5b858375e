"""
Sampler package: discrete and continuous samplers of a Boltzmann machine.
"""
from typing import Optional, Union

import numpy as np

from ..boltzmann_networks import LogisticFit, NetworkParams, fit_logistic
from ..errors import ParameterError
from ..ou_dynamics import OuConfig
from .base_sampler import BaseSampler
from .discrete_samplers import DiscreteSampler, GibbsSampler, Lm1Sampler, Lm2Sampler
from .ou_samplers import ContinuousSampler, Ou1Sampler, Ou2Sampler

SUPPORTED_PROCESSES = ("gibbs", "lm1", "lm1f", "lm2", "ou1", "ou1f", "ou2")


def create_sampler(
    process: str,
    params: NetworkParams,
    epsilon: Optional[float] = None,
    fit: Optional[LogisticFit] = None,
    alpha: Union[float, str] = -np.inf,
    use_lambda: bool = True,
    ou_config: Optional[OuConfig] = None,
) -> BaseSampler:
    """Factory to create sampler instances. Fitted processes default to the logistic fit."""
    if process in ("lm2", "ou2") and epsilon is None:
        raise ParameterError(f"process {process} needs epsilon")
    if process in ("lm1f", "ou1f") and fit is None:
        fit = fit_logistic()

    if process == "gibbs":
        return GibbsSampler(params)
    elif process == "lm1":
        return Lm1Sampler(params)
    elif process == "lm1f":
        return Lm1Sampler(params, fit)
    elif process == "lm2":
        return Lm2Sampler(params, epsilon, alpha=alpha, use_lambda=use_lambda)
    elif process == "ou1":
        return Ou1Sampler(params, config=ou_config)
    elif process == "ou1f":
        return Ou1Sampler(params, fit, config=ou_config)
    elif process == "ou2":
        return Ou2Sampler(params, epsilon, config=ou_config)
    else:
        raise ParameterError(f"Unknown process: {process}. Supported: {', '.join(SUPPORTED_PROCESSES)}")


__all__ = [
    "BaseSampler",
    "ContinuousSampler",
    "DiscreteSampler",
    "GibbsSampler",
    "Lm1Sampler",
    "Lm2Sampler",
    "Ou1Sampler",
    "Ou2Sampler",
    "SUPPORTED_PROCESSES",
    "create_sampler",
]
