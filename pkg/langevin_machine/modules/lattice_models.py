"""
Benchmark lattice models on an L×L periodic square lattice.

Sites are numbered row-major, k = row·L + col. The action handed to the
samplers is S = βH, so every ΔS below already includes β.
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import special

from .analysis import jackknife
from .boltzmann_networks import NetworkParams
from .discrete_langevin import DiscreteSystem
from .errors import DimensionError, InsufficientDataError, ParameterError
from .noise import RngStream

ISING_CRITICAL_BETA = math.log(1.0 + math.sqrt(2.0)) / 2.0
MAX_EXACT_SIDE = 4


def neighbor_table(side: int) -> np.ndarray:
    """(N, 4) indices of the right, left, down and up neighbors."""
    if side < 2:
        raise ParameterError(f"lattice side must be at least 2, got {side}")
    row, col = np.divmod(np.arange(side * side), side)
    return np.stack(
        [
            row * side + (col + 1) % side,
            row * side + (col - 1) % side,
            ((row + 1) % side) * side + col,
            ((row - 1) % side) * side + col,
        ],
        axis=1,
    )


def bond_list(side: int) -> np.ndarray:
    """(2N, 2) pairs (i, right(i)) and (i, down(i)); each bond once."""
    table = neighbor_table(side)
    sites = np.arange(side * side)
    return np.concatenate([np.stack([sites, table[:, 0]], 1), np.stack([sites, table[:, 2]], 1)])


class SquareLattice(DiscreteSystem):
    def __init__(self, side: int, beta: float, coupling: float = 1.0):
        if not beta > 0:
            raise ParameterError(f"beta must be positive, got {beta}")
        self.side = side
        self.beta = float(beta)
        self.coupling = float(coupling)
        self.neighbors = neighbor_table(side)
        self.bonds = bond_list(side)

    @property
    def n_sites(self) -> int:
        return self.side * self.side

    def random_states(self, chains: int, rng: RngStream) -> np.ndarray:
        return rng.integers(self.n_states, size=(chains, self.n_sites)) + self.first_state

    def ordered_states(self, chains: int) -> np.ndarray:
        return np.full((chains, self.n_sites), self.first_state, dtype=np.int64)

    def energy(self, states: np.ndarray) -> np.ndarray:
        """H per chain (without β)."""
        return self.action(states) / self.beta

    def _check_states(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        if states.shape[-1] != self.n_sites:
            raise DimensionError(f"state has {states.shape[-1]} sites, lattice has {self.n_sites}")
        return states


class ClockLattice(SquareLattice):
    """q-state clock model, H = -J Σ_<ij> cos(θ_i - θ_j) with θ = 2πn/q, n in 1..q."""

    first_state = 1

    def __init__(self, side: int, q: int, beta: float, coupling: float = 1.0):
        if q < 2:
            raise ParameterError(f"clock model needs q >= 2, got {q}")
        super().__init__(side, beta, coupling)
        self.q = q

    @property
    def n_states(self) -> int:
        return self.q

    @property
    def delta_max(self) -> float:
        return 8.0 * self.beta * abs(self.coupling)

    def angles(self, states) -> np.ndarray:
        return 2.0 * np.pi * np.asarray(states) / self.q

    def action(self, states: np.ndarray) -> np.ndarray:
        theta = self.angles(self._check_states(states))
        bond_sum = np.cos(theta[:, self.bonds[:, 0]] - theta[:, self.bonds[:, 1]]).sum(axis=1)
        return -self.beta * self.coupling * bond_sum

    def delta_action(self, states, sites, proposals):
        rows = np.arange(states.shape[0])
        theta_nb = self.angles(states[rows[:, None], self.neighbors[sites]])
        old = self.angles(states[rows, sites])[:, None]
        new = self.angles(proposals)[:, None]
        change = np.cos(new - theta_nb) - np.cos(old - theta_nb)
        return -self.beta * self.coupling * change.sum(axis=1)


class IsingLattice(SquareLattice):
    """Ising model over z in {0, 1} with s = 2z - 1, H = -J Σ_<ij> s_i s_j - h Σ_i s_i."""

    first_state = 0

    def __init__(self, side: int, beta: float, coupling: float = 1.0, field: float = 0.0):
        super().__init__(side, beta, coupling)
        self.field = float(field)

    @property
    def n_states(self) -> int:
        return 2

    @property
    def delta_max(self) -> float:
        return 2.0 * self.beta * (4.0 * abs(self.coupling) + abs(self.field))

    def action(self, states: np.ndarray) -> np.ndarray:
        s = spins_from_z(self._check_states(states))
        bond_sum = (s[:, self.bonds[:, 0]] * s[:, self.bonds[:, 1]]).sum(axis=1)
        return -self.beta * (self.coupling * bond_sum + self.field * s.sum(axis=1))

    def delta_action(self, states, sites, proposals):
        rows = np.arange(states.shape[0])
        local = self.coupling * spins_from_z(states[rows[:, None], self.neighbors[sites]]).sum(axis=1) + self.field
        change = spins_from_z(proposals) - spins_from_z(states[rows, sites])
        return -self.beta * change * local

    def to_network(self) -> NetworkParams:
        params, _ = ising_to_bm(self.side, self.coupling, self.field, self.beta)
        return params


def spins_from_z(z) -> np.ndarray:
    return 2 * np.asarray(z, dtype=np.int64) - 1


def clock_delta_energy(lattice: ClockLattice, spins, site: int, proposal: int) -> float:
    """βΔH for setting one site of a single configuration to proposal."""
    states = lattice._check_states(np.asarray(spins).reshape(1, -1))
    if not 0 <= site < lattice.n_sites:
        raise DimensionError(f"site {site} outside lattice of {lattice.n_sites} sites")
    proposals = np.array([proposal])
    lattice.check_proposals(proposals)
    return float(lattice.delta_action(states, np.array([site]), proposals)[0])


def clock_magnetization(spins, q: int):
    """|Σ_k exp(i2πn_k/q)|/N per configuration."""
    phases = np.exp(2j * np.pi * np.asarray(spins) / q)
    values = np.abs(phases.mean(axis=-1))
    return float(values) if np.ndim(values) == 0 else values


def ising_magnetization(spins):
    """|Σ s_i|/N per configuration, s in {-1, +1}."""
    values = np.abs(np.asarray(spins, dtype=float).mean(axis=-1))
    return float(values) if np.ndim(values) == 0 else values


def ising_to_bm(side: int, coupling: float = 1.0, field: float = 0.0, beta: float = 1.0, d: int = 2) -> Tuple[NetworkParams, np.ndarray]:
    """
    Boltzmann machine equivalent to βH_Ising under s = 2z - 1.

    Every bond adds 4βJ to W_ij, and each site sits on 2d bonds, so
    b_i = 2βh - 2βJ·2d. E_BM(z) - βH(2z - 1) is then independent of z.

    Returns:
        (NetworkParams, boolean adjacency matrix)
    """
    if d != 2:
        raise ParameterError(f"only the square lattice (d=2) is supported, got d={d}")
    n = side * side
    bonds = bond_list(side)
    weights = np.zeros((n, n))
    np.add.at(weights, (bonds[:, 0], bonds[:, 1]), 4.0 * beta * coupling)
    np.add.at(weights, (bonds[:, 1], bonds[:, 0]), 4.0 * beta * coupling)
    biases = np.full(n, 2.0 * beta * field - 2.0 * beta * coupling * 2 * d)
    return NetworkParams(weights, biases), weights != 0


def critical_beta(model: str, coupling: float = 1.0) -> float:
    """Exact infinite-lattice β_c for 'ising' or 'clock_q4'."""
    if model == "ising":
        return ISING_CRITICAL_BETA / coupling
    if model == "clock_q4":
        return 2.0 * ISING_CRITICAL_BETA / coupling
    raise ParameterError(f"Unknown model: {model}. Supported: ising, clock_q4")


def specific_heat(energies, beta: float, n_sites: int, blocks: int = 20) -> Tuple[float, float]:
    """c = (β²/N)(⟨E²⟩ - ⟨E⟩²) from an energy series, with a jackknife error."""
    energies = np.asarray(energies, dtype=float).ravel()
    if len(energies) < 2:
        raise InsufficientDataError("specific heat needs at least two energy samples")
    return jackknife(energies, blocks, lambda values: beta ** 2 / n_sites * np.var(values))


def locate_peak(betas, values) -> float:
    """β of the maximum, refined by a parabola through the highest point and its neighbors."""
    betas = np.asarray(betas, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(betas) != len(values) or len(betas) < 3:
        raise InsufficientDataError("peak location needs at least three points")
    order = np.argsort(betas)
    betas, values = betas[order], values[order]
    top = int(np.argmax(values))
    if top in (0, len(betas) - 1):
        return float(betas[top])
    a, b, _ = np.polyfit(betas[top - 1: top + 2], values[top - 1: top + 2], 2)
    if a >= 0:
        return float(betas[top])
    return float(np.clip(-b / (2.0 * a), betas[top - 1], betas[top + 1]))


@dataclass(frozen=True)
class IsingExact:
    abs_magnetization: float
    energy: float
    specific_heat: float


def ising_exact(side: int, coupling: float = 1.0, field: float = 0.0, beta: float = 1.0) -> IsingExact:
    """⟨|m|⟩, ⟨H⟩/N and c by enumerating all 2^(L²) configurations."""
    if side > MAX_EXACT_SIDE:
        raise ParameterError(f"exact enumeration limited to L <= {MAX_EXACT_SIDE}, got {side}")
    lattice = IsingLattice(side, beta, coupling, field)
    n = lattice.n_sites
    z = (np.arange(2 ** n)[:, None] >> np.arange(n)) & 1
    h = lattice.energy(z)
    log_weights = -beta * h
    p = np.exp(log_weights - special.logsumexp(log_weights))
    mean_h = float(p @ h)
    variance = float(p @ (h - mean_h) ** 2)
    return IsingExact(
        abs_magnetization=float(p @ ising_magnetization(spins_from_z(z))),
        energy=mean_h / n,
        specific_heat=beta ** 2 / n * variance,
    )
