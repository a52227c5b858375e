"""
Experiment drivers behind the CLI subcommands.

Chains are split into fixed blocks; block k of a task draws from
RngStream(seed).spawn(*task, k) and blocks are merged in block order, so a
result only depends on the config and the seed, never on the thread count.
"""

import concurrent.futures
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from rich.console import Console
from rich.progress import track

from .analysis import ConfigHistogram, exact_boltzmann, extrapolate_to_zero_eps, jackknife, kl_divergence
from .boltzmann_networks import ActivationCurve, LogisticFit, NetworkParams, fit_logistic, measure_activation
from .discrete_langevin import DlmConfig, RunRecord, make_updater, rescale_time, run_sweeps
from .errors import InsufficientDataError, ParameterError
from .lattice_models import (
    ClockLattice,
    IsingLattice,
    clock_magnetization,
    critical_beta,
    ising_exact,
    ising_magnetization,
    locate_peak,
    specific_heat,
    spins_from_z,
    MAX_EXACT_SIDE,
)
from .math_kernel import logistic, std_normal_cdf
from .noise import RngStream
from .ou_dynamics import OuConfig, calibrate_r, ou2_stationary_activation, ou_free_activation, record_trajectory, time_scale_factor, trajectory_rows
from .refractory import (
    RefractoryConfig,
    RefractorySampler,
    calibrate_tau_prime,
    counter_chain_activation,
    wrap_refractory,
)
from .report import CsvReport
from .samplers import SUPPORTED_PROCESSES, BaseSampler, ContinuousSampler, DiscreteSampler, create_sampler

console = Console(stderr=True)

EPSILON_PROCESSES = ("lm2", "ou2")
FITTED_PROCESSES = ("lm1f", "ou1f")
CONTINUOUS_PROCESSES = ("ou1", "ou1f", "ou2")
LATTICE_METHODS = ("metropolis", "metropolis_equivalent", "dlm")
EPSILON_METHODS = ("dlm",) + EPSILON_PROCESSES

# Spawn-key prefixes per command
TASK_ACTIVATION, TASK_CLOCK, TASK_ISING, TASK_KL, TASK_CALIBRATE, TASK_TRAJECTORY = range(6)


@dataclass(frozen=True)
class RunContext:
    seed: int = 0
    threads: int = 1
    chain_block: int = 16

    def __post_init__(self):
        if self.threads < 1:
            raise ParameterError(f"threads must be >= 1, got {self.threads}")
        if self.chain_block < 1:
            raise ParameterError(f"chain_block must be >= 1, got {self.chain_block}")

    def stream(self, *task: int) -> RngStream:
        return RngStream(self.seed).spawn(*task)


def chain_blocks(chains: int, block: int) -> List[int]:
    """Sizes of the fixed chain blocks: full blocks, then the remainder."""
    if chains < 1:
        raise ParameterError(f"chains must be >= 1, got {chains}")
    sizes = [block] * (chains // block)
    if chains % block:
        sizes.append(chains % block)
    return sizes


def fan_out(context: RunContext, task: Tuple[int, ...], chains: int, work: Callable[[int, RngStream], Any]) -> List[Any]:
    """Runs work(block_size, stream) for every chain block; results in block order."""
    sizes = chain_blocks(chains, context.chain_block)
    streams = [context.stream(*task, k) for k in range(len(sizes))]
    with concurrent.futures.ThreadPoolExecutor(max_workers=context.threads) as executor:
        return list(executor.map(work, sizes, streams))


def steps(items: Sequence[Any], description: str) -> Iterable[Any]:
    if console.is_terminal:
        return track(items, description=description, console=console)
    return items


def epsilon_grid(process: str, epsilons: Sequence[float]) -> List[Optional[float]]:
    """The configured ε values for ε-dependent processes, a single None otherwise."""
    if process in EPSILON_METHODS:
        if not epsilons:
            raise ParameterError(f"process {process} needs at least one epsilon")
        return [float(e) for e in epsilons]
    return [None]


@lru_cache(maxsize=1)
def default_fit() -> LogisticFit:
    return fit_logistic()


def check_process(process: str) -> str:
    if process not in SUPPORTED_PROCESSES:
        raise ParameterError(f"Unknown process: {process}. Supported: {', '.join(SUPPORTED_PROCESSES)}")
    return process


def build_sampler(process: str, params: NetworkParams, config: Dict[str, Any], epsilon: Optional[float] = None) -> BaseSampler:
    """
    Creates a sampler from a resolved config, wrapped with refractoriness when tau_ref > 0.

    Args:
        process: Process name
        params: Network parameters
        config: Resolved command configuration
        epsilon: ε for ε-dependent processes

    Returns:
        Configured sampler
    """
    check_process(process)
    ou_config = OuConfig(dt=config.get("dt", 0.02), exact=config.get("exact_ou", False))
    sampler = create_sampler(
        process,
        params,
        epsilon=epsilon if process in EPSILON_PROCESSES else None,
        fit=default_fit() if process in FITTED_PROCESSES else None,
        alpha=config.get("alpha", "max"),
        use_lambda=config.get("use_lambda", True),
        ou_config=ou_config,
    )
    tau_ref = config.get("tau_ref", 0.0) or 0.0
    if tau_ref > 0:
        sampler = wrap_refractory(sampler, RefractoryConfig(tau_ref, config.get("tau_prime")))
    return sampler


def merge_curves(curves: Sequence[ActivationCurve]) -> ActivationCurve:
    weights = np.array([curve.samples for curve in curves], dtype=float)
    total = weights.sum()
    p = sum(w * curve.p for w, curve in zip(weights, curves)) / total
    err = np.sqrt(sum((w * curve.err) ** 2 for w, curve in zip(weights, curves))) / total
    return ActivationCurve(curves[0].biases, p, err, int(total))


def measure_activation_blocks(
    context: RunContext,
    task: Tuple[int, ...],
    factory: Callable[[NetworkParams], BaseSampler],
    b_grid: Sequence[float],
    samples: int,
    chains: int,
    burn_in: float,
) -> ActivationCurve:
    def work(size: int, rng: RngStream) -> ActivationCurve:
        return measure_activation(factory, b_grid, max(1, samples * size // chains), rng, chains=size, burn_in=burn_in)

    return merge_curves(fan_out(context, task, chains, work))


def closed_form_activation(sampler: BaseSampler, b_grid: np.ndarray) -> np.ndarray:
    """Exact or leading-order stationary P(z=1) of free neurons; nan where none is known."""
    if isinstance(sampler, RefractorySampler):
        w01, w10 = sampler.transition_rates(-sampler.params.biases)
        return np.array([counter_chain_activation(float(a), float(b), sampler.steps) for a, b in zip(w01, w10)])
    if isinstance(sampler, DiscreteSampler):
        w01, w10 = sampler.transition_rates(-sampler.params.biases)
        return 1.0 / (1.0 + w10 / w01)
    if isinstance(sampler, ContinuousSampler) and sampler.refractory_ticks == 0:
        if sampler.process == "ou2":
            return ou2_stationary_activation(b_grid, sampler.epsilon, sampler.config)
        fit = sampler.fit
        if fit is not None:
            return std_normal_cdf((b_grid - fit.mu0) / fit.r)
        return ou_free_activation(b_grid, sampler.config)
    return np.full(len(b_grid), np.nan)


def run_activation(config: Dict[str, Any], context: RunContext) -> CsvReport:
    """Free-neuron activation curves and their deviation from the logistic function."""
    process = check_process(config["process"])
    b_grid = np.round(np.arange(config["b_min"], config["b_max"] + 0.5 * config["b_step"], config["b_step"]), 10)
    if len(b_grid) == 0:
        raise ParameterError("empty bias grid")
    report = CsvReport("activation", config, ["kind", "process", "epsilon", "b", "p", "err", "deviation", "closed_form"])
    points = []

    for index, epsilon in enumerate(steps(epsilon_grid(process, config["epsilons"]), f"activation {process}")):
        def factory(params, epsilon=epsilon):
            return build_sampler(process, params, config, epsilon)

        curve = measure_activation_blocks(
            context, (TASK_ACTIVATION, index), factory, b_grid, config["samples"], config["chains"], config["burn_in"]
        )
        closed = closed_form_activation(factory(NetworkParams.free(b_grid)), b_grid)
        for b, p, err, deviation, exact in zip(curve.biases, curve.p, curve.err, curve.deviation, closed):
            report.add(["point", process, epsilon, b, p, err, deviation, exact])
        if epsilon is not None:
            points.append((epsilon, curve))
        console.print(f"[green]✔[/green] {process} eps={epsilon}: max |P - σ| = {np.max(np.abs(curve.deviation)):.4f}")

    if len(points) >= 3:
        for k, b in enumerate(b_grid):
            fit = extrapolate_to_zero_eps((eps, curve.p[k], max(curve.err[k], 1e-12)) for eps, curve in points)
            report.add(["extrapolated", process, 0.0, b, fit.value, fit.err, fit.value - logistic(b), logistic(b)])
    return report


def lattice_updater(lattice, method: str, epsilon: Optional[float], config: Dict[str, Any]):
    if method == "dlm":
        return make_updater("dlm", DlmConfig.for_system(lattice, epsilon, config.get("alpha", "max"), config.get("use_lambda", True)))
    return make_updater(method)


def simulate_lattice(
    context: RunContext,
    task: Tuple[int, ...],
    make_lattice: Callable[[], Any],
    method: str,
    epsilon: Optional[float],
    config: Dict[str, Any],
    magnetization: Callable[[np.ndarray], np.ndarray],
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-sweep magnetization and energy series, shape (sweeps, chains).

    Lattice methods update the lattice directly; sampler processes run on the
    lattice's Boltzmann machine and report one sample per time unit.
    """
    sweeps, burn_in = config["sweeps"], config["burn_in"]

    def work(size: int, rng: RngStream):
        lattice = make_lattice()
        mags: List[np.ndarray] = []
        energies: List[np.ndarray] = []
        if method in LATTICE_METHODS:
            update = lattice_updater(lattice, method, epsilon, config)
            states = lattice.random_states(size, rng)
            run_sweeps(lattice, states, burn_in, update, rng)

            def observe(_sweep, current):
                mags.append(magnetization(current))
                energies.append(lattice.energy(current))

            run_sweeps(lattice, states, sweeps, update, rng, observe)
        else:
            sampler = build_sampler(method, lattice.to_network(), config, epsilon)
            per_unit = sampler.ticks_per_unit
            state = sampler.init_state(size, rng)
            sampler.run(state, burn_in * per_unit, rng)

            def observe(tick, current):
                if (tick + 1) % per_unit == 0:
                    z = sampler.spikes(current)
                    mags.append(magnetization(z))
                    energies.append(lattice.energy(z))

            sampler.run(state, sweeps * per_unit, rng, observe)
        return np.asarray(mags), np.asarray(energies)

    results = fan_out(context, task, config["chains"], work)
    return np.concatenate([r[0] for r in results], axis=1), np.concatenate([r[1] for r in results], axis=1)


LATTICE_COLUMNS = ["kind", "method", "epsilon", "beta", "m", "m_err", "c", "c_err", "reference", "rel_dev"]


def _relative(value: float, reference: Optional[float]) -> Optional[float]:
    if reference is None or reference == 0:
        return None
    return (value - reference) / reference


def _lattice_report(
    command: str,
    config: Dict[str, Any],
    context: RunContext,
    task_prefix: int,
    make_lattice: Callable[[float], Any],
    magnetization: Callable[[np.ndarray], np.ndarray],
    point_reference: Callable[[float], Optional[float]],
    peak_reference: Optional[float],
) -> CsvReport:
    report = CsvReport(command, config, LATTICE_COLUMNS)
    betas = [float(b) for b in config["betas"]]
    runs = [(method, eps) for method in config["methods"] for eps in epsilon_grid(method, config["epsilons"])]
    for method, _ in runs:
        if method not in LATTICE_METHODS and method not in SUPPORTED_PROCESSES:
            raise ParameterError(f"Unknown method: {method}. Supported: {', '.join(LATTICE_METHODS + SUPPORTED_PROCESSES)}")

    peaks: Dict[Tuple[str, Optional[float]], float] = {}
    for run_index, (method, eps) in enumerate(runs):
        heat = []
        for beta_index, beta in enumerate(steps(betas, f"{command} {method} eps={eps}")):
            mags, energies = simulate_lattice(
                context,
                (task_prefix, run_index, beta_index),
                lambda beta=beta: make_lattice(beta),
                method,
                eps,
                config,
                magnetization,
            )
            n_sites = make_lattice(beta).n_sites
            m, m_err = jackknife(mags.mean(axis=1), config["blocks"])
            c, c_err = specific_heat(energies, beta, n_sites, config["blocks"])
            heat.append(c)
            reference = point_reference(beta)
            report.add(["point", method, eps, beta, m, m_err, c, c_err, reference, _relative(m, reference)])
        if len(betas) >= 3:
            peaks[(method, eps)] = locate_peak(betas, heat)

    metropolis_peak = peaks.get(("metropolis", None))
    reference_peak = metropolis_peak if metropolis_peak is not None else peak_reference
    for (method, eps), peak in peaks.items():
        report.add(["peak", method, eps, peak, None, None, None, None, reference_peak, _relative(peak, reference_peak)])
        console.print(f"[green]✔[/green] {command} {method} eps={eps}: specific-heat peak at beta={peak:.4f}")
    return report


def run_clock(config: Dict[str, Any], context: RunContext) -> CsvReport:
    """q-state clock model: ⟨m⟩(β), c(β) and the specific-heat peak per method and ε."""
    q = config["q"]
    for method in config["methods"]:
        if method not in LATTICE_METHODS:
            raise ParameterError(f"Unknown clock method: {method}. Supported: {', '.join(LATTICE_METHODS)}")
    return _lattice_report(
        "clock",
        config,
        context,
        TASK_CLOCK,
        lambda beta: ClockLattice(config["L"], q, beta, config["coupling"]),
        lambda states: clock_magnetization(states, q),
        lambda beta: None,
        critical_beta("clock_q4", config["coupling"]) if q == 4 else None,
    )


def run_ising(config: Dict[str, Any], context: RunContext) -> CsvReport:
    """Ising model: ⟨|m|⟩(β) against exact enumeration where the lattice is small enough."""
    side, coupling, field = config["L"], config["coupling"], config["field"]
    exact = side <= MAX_EXACT_SIDE

    def reference(beta: float) -> Optional[float]:
        return ising_exact(side, coupling, field, beta).abs_magnetization if exact else None

    return _lattice_report(
        "ising",
        config,
        context,
        TASK_ISING,
        lambda beta: IsingLattice(side, beta, coupling, field),
        lambda z: ising_magnetization(spins_from_z(z)),
        reference,
        None,
    )


def kl_network(config: Dict[str, Any], context: RunContext) -> NetworkParams:
    if config["network"]:
        return NetworkParams.load(config["network"])
    return NetworkParams.random(config["n"], config["weight_scale"], context.stream(TASK_KL, 999))


def kl_checkpoints(sweeps: int, count: int) -> np.ndarray:
    if sweeps < 1 or count < 1:
        raise ParameterError("sweeps and checkpoints must be positive")
    return np.unique(np.geomspace(1, sweeps, count).astype(int))


def relative_rate(sampler: BaseSampler) -> float:
    """
    Speed of a sampler relative to Gibbs at zero input, W01(0)/σ(0).

    Discrete samplers use their own single-update rates, fitted thresholds
    and truncation included. Continuous samplers other than OU2 count as 1.
    """
    if isinstance(sampler, DiscreteSampler):
        w01, _ = sampler.transition_rates(0.0)
        return float(w01) / logistic(0.0)
    if sampler.process == "ou2":
        return time_scale_factor("ou2", "gibbs", 0.0, sampler.epsilon)
    return 1.0


def run_bm_kl(config: Dict[str, Any], context: RunContext) -> CsvReport:
    """KL divergence between the exact Boltzmann distribution and sampled histograms."""
    params = kl_network(config, context)
    p_exact = exact_boltzmann(params)
    marks = kl_checkpoints(config["sweeps"], config["checkpoints"])
    report = CsvReport("bm-kl", config, ["process", "epsilon", "sweeps", "gibbs_sweeps", "kl"])

    runs = [(process, eps) for process in config["processes"] for eps in epsilon_grid(process, config["epsilons"])]
    for run_index, (process, eps) in enumerate(steps(runs, "bm-kl")):
        check_process(process)

        def work(size: int, rng: RngStream, process=process, eps=eps) -> np.ndarray:
            sampler = build_sampler(process, params, config, eps)
            per_unit = sampler.ticks_per_unit
            state = sampler.init_state(size, rng)
            histogram = ConfigHistogram(params.n)
            snapshots = []
            wanted = set(int(m) for m in marks)

            def observe(tick, current):
                if (tick + 1) % per_unit == 0:
                    histogram.add(sampler.spikes(current))
                    if (tick + 1) // per_unit in wanted:
                        snapshots.append(histogram.counts.copy())

            sampler.run(state, int(marks[-1]) * per_unit, rng, observe)
            return np.asarray(snapshots)

        counts = sum(fan_out(context, (TASK_KL, run_index), config["chains"], work))
        values = np.array([kl_divergence(p_exact, ConfigHistogram(params.n, row)) for row in counts])
        rate = relative_rate(build_sampler(process, params, config, eps))
        record = rescale_time(RunRecord(marks, {"kl": values}), 1.0 / rate)
        for sweeps, gibbs_sweeps, kl in zip(marks, record.times, values):
            report.add([process, eps, int(sweeps), gibbs_sweeps, kl])
        console.print(f"[green]✔[/green] {process} eps={eps}: final KL {values[-1]:.2e}")
    return report


def run_calibrate(config: Dict[str, Any], context: RunContext) -> CsvReport:
    """r(ε) scaling factors, logistic fits and τ'_ref(τ_ref) calibrations."""
    report = CsvReport("calibrate", config, ["target", "process", "epsilon", "tau_ref", "value", "residual"])
    targets = set(config["targets"])
    unknown = targets - {"r", "tau"}
    if unknown:
        raise ParameterError(f"Unknown calibration target: {', '.join(sorted(unknown))}. Supported: r, tau")
    processes = [check_process(p) for p in config["processes"]]

    if "r" in targets:
        b_grid = np.round(np.arange(-4.0, 4.0 + 1e-9, 0.25), 10)
        for process in processes:
            if process in FITTED_PROCESSES:
                fit = default_fit()
                report.add(["fit", process, None, None, fit.r, fit.residual])
                continue
            if process not in EPSILON_PROCESSES:
                continue
            for index, eps in enumerate(config["epsilons"]):
                def factory(params, eps=eps, process=process):
                    return build_sampler(process, params, dict(config, tau_ref=0.0), eps)

                curve = measure_activation_blocks(
                    context, (TASK_CALIBRATE, 0, processes.index(process), index), factory, b_grid,
                    config["samples"], config["chains"], config["burn_in"],
                )
                r = calibrate_r(eps, curve)
                report.add(["r", process, eps, None, r, float(np.max(np.abs(curve.p - logistic(b_grid / r))))])

    if "tau" in targets:
        for p_index, process in enumerate(processes):
            for e_index, eps in enumerate(epsilon_grid(process, config["epsilons"])):
                primes = []
                for t_index, tau in enumerate(steps(config["tau_refs"], f"tau' {process} eps={eps}")):
                    def factory(params, eps=eps, process=process):
                        return build_sampler(process, params, dict(config, tau_ref=0.0), eps)

                    result = calibrate_tau_prime(
                        factory,
                        float(tau),
                        rng=context.stream(TASK_CALIBRATE, 1, p_index, e_index, t_index),
                        samples=config["samples"],
                        chains=config["chains"],
                        burn_in=config["burn_in"],
                    )
                    report.add(["tau", process, eps, tau, result.tau_prime, result.residual])
                    primes.append(result.tau_prime)
                if len(primes) >= 3:
                    slope, r_squared = power_law_fit(config["tau_refs"], primes)
                    report.add(["tau_power", process, eps, None, slope, r_squared])
    return report


def power_law_fit(x: Sequence[float], y: Sequence[float]) -> Tuple[float, float]:
    """Log-log slope and R² of y against x."""
    log_x, log_y = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    if len(log_x) < 3:
        raise InsufficientDataError("power-law fit needs at least three points")
    slope, intercept = np.polyfit(log_x, log_y, 1)
    residual = log_y - (slope * log_x + intercept)
    total = np.sum((log_y - log_y.mean()) ** 2)
    r_squared = 1.0 - np.sum(residual ** 2) / total if total > 0 else 1.0
    return float(slope), float(r_squared)


def run_trajectory(config: Dict[str, Any], context: RunContext) -> CsvReport:
    """Membrane potential and spike trace of one chain of a continuous process."""
    process = check_process(config["process"])
    if process not in CONTINUOUS_PROCESSES:
        raise ParameterError(f"trajectory needs a continuous process ({', '.join(CONTINUOUS_PROCESSES)}), got {process}")
    params = NetworkParams.free(config["biases"])
    sampler = build_sampler(process, params, config, config["epsilon"])
    rng = context.stream(TASK_TRAJECTORY)
    state = sampler.init_state(config["chains"], rng)
    record = record_trajectory(sampler, state, config["duration"], rng, config["decimation"])
    report = CsvReport("trajectory", config, ["t", "neuron", "u", "z"])
    report.extend(trajectory_rows(record))
    console.print(f"[green]✔[/green] {process}: {len(record.times)} recorded steps, mean z {record.observables['z'].mean():.3f}")
    return report


COMMANDS: Dict[str, Callable[[Dict[str, Any], RunContext], CsvReport]] = {
    "activation": run_activation,
    "clock": run_clock,
    "ising": run_ising,
    "bm-kl": run_bm_kl,
    "calibrate": run_calibrate,
    "trajectory": run_trajectory,
}
