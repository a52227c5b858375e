"""
Seeded noise sources.

Each chain owns an RngStream: a Philox counter-based generator keyed by the
master seed plus a spawn key, so (seed, key) fully determines the sequence and
streams with different keys are independent.
"""

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .errors import ParameterError, TruncationBoundError
from .math_kernel import check_epsilon, lambda_eps

# Seeds are unsigned 64-bit; larger inputs are reduced.
_SEED_MASK = (1 << 64) - 1


@dataclass
class RngStream:
    """Single-owner random stream derived from (seed, key)."""

    seed: int = 0
    key: Tuple[int, ...] = ()
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.seed < 0:
            raise ParameterError(f"seed must be non-negative, got {self.seed}")
        self.seed = int(self.seed) & _SEED_MASK
        self.key = tuple(int(k) for k in self.key)
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def spawn(self, *key: int) -> "RngStream":
        """Returns the independent child stream (seed, self.key + key)."""
        return RngStream(self.seed, self.key + tuple(key))

    def integers(self, high: int, size=None):
        return self.generator.integers(0, high, size=size)

    def normal(self, size=None):
        return self.generator.standard_normal(size)

    def uniform(self, size=None):
        return self.generator.random(size)

    def exponential(self, size=None):
        return self.generator.standard_exponential(size)


@dataclass(frozen=True)
class TruncationSpec:
    """
    Lower truncation of the update noise: η^T >= 1/√ε + α.

    alpha = -inf means untruncated Gaussian noise.
    """

    alpha: float = -np.inf
    epsilon: float = 0.1

    def __post_init__(self):
        check_epsilon(self.epsilon)
        if np.isnan(self.alpha) or self.alpha == np.inf:
            raise ParameterError(f"alpha must be finite or -inf, got {self.alpha}")

    @property
    def truncated(self) -> bool:
        return np.isfinite(self.alpha)

    @property
    def lower(self) -> float:
        return 1.0 / np.sqrt(self.epsilon) + self.alpha

    @staticmethod
    def bound(epsilon: float, delta_max: float, use_lambda: bool = True) -> float:
        """Largest admissible α = -(√ε/(2λ_ε))·Δ_max."""
        scale = lambda_eps(epsilon) if use_lambda else 1.0
        return -np.sqrt(epsilon) / (2.0 * scale) * float(delta_max)

    @classmethod
    def maximal(cls, epsilon: float, delta_max: float, use_lambda: bool = True) -> "TruncationSpec":
        return cls(alpha=cls.bound(epsilon, delta_max, use_lambda), epsilon=epsilon)

    @classmethod
    def from_setting(cls, setting, epsilon: float, delta_max: float, use_lambda: bool = True) -> "TruncationSpec":
        """Builds a spec from a config value: a number, -inf, or the keyword 'max'."""
        if isinstance(setting, str) and setting.strip().lower() == "max":
            return cls.maximal(epsilon, delta_max, use_lambda)
        return cls(alpha=float(setting), epsilon=epsilon)

    def validate(self, delta_max: float, use_lambda: bool = True) -> None:
        if not self.truncated:
            return
        limit = self.bound(self.epsilon, delta_max, use_lambda)
        # relative slack for the float round trip through 'max'
        if self.alpha > limit + 1e-12 * max(1.0, abs(limit)):
            raise TruncationBoundError(
                f"alpha={self.alpha:.6g} exceeds the bound {limit:.6g} for delta_max={delta_max:.6g}"
            )


def sample_std_normal(rng: RngStream, size=None):
    return rng.normal(size)


def sample_uniform(rng: RngStream, size=None):
    """Uniform variates on [0, 1)."""
    return rng.uniform(size)


def sample_truncated_normal(rng: RngStream, lower: float, size=None):
    """
    Standard normal variates conditioned on value >= lower.

    lower <= 0 uses plain rejection from the full normal (acceptance >= 1/2).
    lower > 0 uses rejection from a shifted exponential proposal with the
    optimal rate (lower + sqrt(lower² + 4))/2, whose acceptance stays above
    0.75 for any lower > 0.

    Args:
        rng: Owning random stream
        lower: Truncation point, finite or -inf
        size: Output shape (None for a scalar)

    Returns:
        Samples with the requested shape
    """
    lower = float(lower)
    if lower == -np.inf:
        return rng.normal(size)

    count = 1 if size is None else int(np.prod(size))
    out = np.empty(count)
    filled = 0
    while filled < count:
        need = count - filled
        # oversample a little to keep the loop short
        batch = max(16, int(need * 1.3) + 8)
        if lower <= 0.0:
            draws = rng.normal(batch)
            accepted = draws[draws >= lower]
        else:
            rate = 0.5 * (lower + np.sqrt(lower * lower + 4.0))
            draws = lower + rng.exponential(batch) / rate
            keep = rng.uniform(batch) <= np.exp(-0.5 * np.square(draws - rate))
            accepted = draws[keep]
        take = min(need, accepted.size)
        out[filled:filled + take] = accepted[:take]
        filled += take

    if size is None:
        return float(out[0])
    return out.reshape(size)
