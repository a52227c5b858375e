import math

import numpy as np
import pytest
from scipy import integrate

from modules.boltzmann_networks import ActivationCurve, NetworkParams, measure_activation
from modules.discrete_langevin import rescale_time
from modules.errors import ConvergenceError, InsufficientDataError, ParameterError, ZeroDenominatorError
from modules.math_kernel import logistic, std_normal_cdf
from modules.noise import RngStream
from modules.ou_dynamics import (
    MembraneState,
    OuConfig,
    calibrate_r,
    ensemble_relaxation,
    ou2_stationary_activation,
    ou2_theoretical_transitions,
    ou_free_activation,
    ou_step,
    record_trajectory,
    regime_histograms,
    time_scale_factor,
    trajectory_rows,
)
from modules.samplers import Lm2Sampler, Ou1Sampler, Ou2Sampler


def test_config_validation():
    with pytest.raises(ParameterError):
        OuConfig(dt=0.0)
    with pytest.raises(ParameterError):
        OuConfig(theta=-1.0)
    assert OuConfig(dt=0.02).ticks_per_unit == 50
    assert OuConfig(dt=0.02).ticks(2.0) == 100


def test_exact_ou_stationary_variance(rng):
    config = OuConfig(dt=1.0, exact=True)
    u = np.zeros(1000)
    for _ in range(20):
        u = ou_step(u, 0.0, config, rng)
    samples = []
    for _ in range(1000):
        u = ou_step(u, 0.0, config, rng)
        samples.append(u)
    samples = np.asarray(samples)
    assert samples.var() == pytest.approx(config.sigma ** 2 / (2.0 * config.theta), abs=0.01)
    assert abs(samples.mean()) < 0.01


def test_euler_ou_variance_close_to_stationary(rng):
    config = OuConfig(dt=0.02)
    u = 1.5 + rng.normal(2000)
    samples = []
    for step in range(5000):
        u = ou_step(u, 1.5, config, rng)
        if step % 50 == 0:
            samples.append(u.copy())
    samples = np.asarray(samples)
    assert samples.mean() == pytest.approx(1.5, abs=0.02)
    assert samples.var() == pytest.approx(1.0, abs=0.03)


def test_free_activation():
    assert ou_free_activation(0.0) == pytest.approx(0.5)
    assert ou_free_activation(1.0) == pytest.approx(std_normal_cdf(1.0))
    assert ou_free_activation(1.0, OuConfig(theta=2.0, sigma=1.0)) == pytest.approx(std_normal_cdf(2.0))


def test_refractory_projection_holds_spike():
    state = MembraneState(np.array([[1.0, -1.0]]))
    state.project(0.0, refractory_ticks=3)
    np.testing.assert_array_equal(state.z, [[1, 0]])
    state.u = np.array([[-1.0, -1.0]])
    for expected in ([1, 0], [1, 0], [0, 0]):
        state.project(0.0, refractory_ticks=3)
        np.testing.assert_array_equal(state.z, [expected])
    state.u = np.array([[0.5, -1.0]])
    state.project(0.0, refractory_ticks=3)
    np.testing.assert_array_equal(state.counters, [[3, 0]])


def test_ou2_transitions_give_logistic_ratio():
    m = np.linspace(-4, 4, 17)
    for eps in (0.5, 0.2, 0.05):
        w01, w10 = ou2_theoretical_transitions(m, eps)
        np.testing.assert_allclose(w01 / (w01 + w10), logistic(-m), rtol=1e-10)


def test_calibrate_r_recovers_scale():
    b = np.arange(-4.0, 4.01, 0.25)
    curve = ActivationCurve(b, logistic(b / 1.3), np.full(b.size, 1e-3))
    assert calibrate_r(0.2, curve) == pytest.approx(1.3, abs=1e-4)


def test_calibrate_r_input_checks():
    short = np.arange(-2.0, 2.01, 0.5)
    with pytest.raises(InsufficientDataError):
        calibrate_r(0.2, ActivationCurve(short, logistic(short), np.zeros(short.size)))
    b = np.arange(-4.0, 4.01, 0.5)
    with pytest.raises(ConvergenceError):
        calibrate_r(0.2, ActivationCurve(b, np.full(b.size, 0.5), np.zeros(b.size)))


def test_time_scale_factor():
    a = time_scale_factor("lm2", "gibbs", 0.0, 0.1)
    assert a == pytest.approx(std_normal_cdf(-1.0 / math.sqrt(0.1)) / 0.5)
    assert time_scale_factor("gibbs", "gibbs", 1.3) == pytest.approx(1.0)
    with pytest.raises(ZeroDenominatorError):
        time_scale_factor("gibbs", "lm2", 1e6, 0.1)


def test_record_trajectory_rows(rng):
    sampler = Ou2Sampler(NetworkParams.free([0.0, 1.0]), 0.2)
    state = sampler.init_state(3, rng)
    record = record_trajectory(sampler, state, 2.0, rng, decimation=5)
    assert record.time_scale == "real"
    assert record.observables["u"].shape == (20, 2)
    np.testing.assert_allclose(record.times, 0.1 * np.arange(1, 21))
    rows = trajectory_rows(record)
    assert len(rows) == 40
    assert [row[1] for row in rows[:2]] == [0, 1]
    assert set(row[3] for row in rows) <= {0, 1}
    with pytest.raises(ParameterError):
        record_trajectory(sampler, state, 1.0, rng, decimation=0)


def test_regime_histograms_normalization(rng):
    u = rng.normal(50000)
    z = (u > 0).astype(int)
    hist = regime_histograms(u, z, bins=80, span=(-6.0, 6.0))
    width = hist["edges"][1] - hist["edges"][0]
    assert (hist["active"].sum() + hist["inactive"].sum()) * width == pytest.approx(1.0, abs=1e-3)
    assert hist["occupancy"] == pytest.approx(0.5, abs=0.01)
    with pytest.raises(InsufficientDataError):
        regime_histograms(np.array([]), np.array([]))


def test_lm2_relaxation_follows_two_state_chain():
    sampler = Lm2Sampler(NetworkParams.free([1.0]), 0.2, alpha="max")
    rng = RngStream(99)
    state = sampler.init_state(10000, rng)
    state.z[:] = 0
    record = ensemble_relaxation(sampler, state, 30, rng)
    w01, w10 = (float(v) for v in sampler.transition_rates(-1.0))
    t = record.times
    expected = w01 / (w01 + w10) * (1.0 - (1.0 - w01 - w10) ** t)
    observed = record.observables["mean_z"][:, 0]
    sigma = np.sqrt(np.maximum(expected * (1 - expected), 1e-4) / 10000)
    assert np.all(np.abs(observed - expected) < 4.5 * sigma)


@pytest.mark.slow
def test_ou1_matches_lm1_activation(rng):
    b = [-1.5, 0.0, 1.0]
    curve = measure_activation(Ou1Sampler, b, 1000000, rng, chains=64, burn_in=20)
    assert np.all(np.abs(curve.p - std_normal_cdf(np.array(b))) < 4.0 * curve.err)


@pytest.mark.slow
def test_ou2_free_neuron_is_bimodal(rng):
    eps = 0.2
    sampler = Ou2Sampler(NetworkParams.free([0.0]), eps)
    state = sampler.init_state(256, rng)
    sampler.run(state, sampler.config.ticks(50.0), rng)
    us, zs = [], []

    def keep(tick, current):
        if tick % 10 == 0:
            us.append(current.u[:, 0].copy())
            zs.append(current.z[:, 0].copy())

    sampler.run(state, sampler.config.ticks(200.0), rng, keep)
    hist = regime_histograms(np.asarray(us), np.asarray(zs), bins=50, span=(-5.0, 5.0))
    centers = hist["centers"]
    peak_active = centers[np.argmax(hist["active"])]
    peak_inactive = centers[np.argmax(hist["inactive"])]
    assert peak_active == pytest.approx(1.0 / math.sqrt(eps), abs=0.4)
    assert peak_inactive == pytest.approx(-1.0 / math.sqrt(eps), abs=0.4)
    total = hist["active"] + hist["inactive"]
    middle = np.argmin(np.abs(centers))
    assert total[middle] < 0.5 * total.max()
    assert hist["occupancy"] == pytest.approx(0.5, abs=0.1)


def test_membrane_state_projects_against_its_threshold():
    state = MembraneState(np.array([[0.5, 1.5]]), threshold=1.0)
    np.testing.assert_array_equal(state.z, [[0, 1]])
    assert not MembraneState.at(0.5, 2, 3, threshold=1.0).z.any()
    assert MembraneState.at(0.0, 1, 2).z.all()


def test_shifted_threshold_initial_state_is_consistent(rng):
    config = OuConfig(threshold=0.7)
    state = Ou2Sampler(NetworkParams.free([0.0, 1.0]), 0.2, config).init_state(64, rng)
    np.testing.assert_array_equal(state.z, (state.u >= 0.7).astype(np.int8))
    np.testing.assert_allclose(np.abs(state.u - 0.7), 1.0 / math.sqrt(0.2))
    ou1 = Ou1Sampler(NetworkParams.free([0.0]), config=config).init_state(200, rng)
    np.testing.assert_array_equal(ou1.z, (ou1.u >= 0.7).astype(np.int8))


def test_ou2_stationary_activation_matches_integrated_density():
    config = OuConfig(theta=1.5, sigma=1.2, threshold=0.3)
    eps, b = 0.4, 1.2
    variance = config.sigma ** 2 / (2.0 * config.theta)
    high = 1.0 / math.sqrt(eps) + 0.5 * math.sqrt(eps) * b
    low = -1.0 / math.sqrt(eps) + 0.5 * math.sqrt(eps) * b
    # density is continuous at the threshold
    join = math.exp(((config.threshold - low) ** 2 - (config.threshold - high) ** 2) / (2.0 * variance))
    above, _ = integrate.quad(lambda u: math.exp(-((u - high) ** 2) / (2.0 * variance)), config.threshold, np.inf)
    below, _ = integrate.quad(lambda u: join * math.exp(-((u - low) ** 2) / (2.0 * variance)), -np.inf, config.threshold)
    assert ou2_stationary_activation(b, eps, config) == pytest.approx(above / (above + below), rel=1e-6)


def test_ou2_stationary_activation_tends_to_logistic():
    b = np.linspace(-3.0, 3.0, 61)
    assert ou2_stationary_activation(0.0, 0.3) == pytest.approx(0.5)
    np.testing.assert_allclose(ou2_stationary_activation(-b, 0.3), 1.0 - ou2_stationary_activation(b, 0.3), atol=1e-12)
    worst = [np.max(np.abs(ou2_stationary_activation(b, eps) - logistic(b))) for eps in (0.5, 0.2, 0.1, 0.05)]
    assert np.all(np.diff(worst) < 0)
    assert worst[0] > 0.02
    assert worst[2] < 1e-3
    with pytest.raises(ParameterError):
        ou2_stationary_activation(b, 0.3, OuConfig(sigma=0.0))


@pytest.mark.slow
def test_ou2_measured_deviation_shrinks_with_epsilon():
    b = np.array([-3.0, -2.0, -1.0, 1.0, 2.0, 3.0])
    chains = 128
    # run length grows with the regime dwell time, about 5, 14 and 120 time units
    runs = {0.5: 2000, 0.2: 5000, 0.1: 12500}
    folded = {}
    for seed, (eps, units) in enumerate(runs.items()):
        samples = chains * units * OuConfig().ticks_per_unit
        curve = measure_activation(
            lambda params, eps=eps: Ou2Sampler(params, eps), b, samples, RngStream(300 + seed), chains=chains, burn_in=500.0
        )
        # deviations are odd in b; fold them into one signed mean
        folded[eps] = (np.mean(np.sign(b) * curve.deviation), np.sqrt(np.sum(curve.err ** 2)) / b.size)

    def gap(larger, smaller):
        return folded[larger][0] - folded[smaller][0], math.hypot(folded[larger][1], folded[smaller][1])

    for smaller in (0.2, 0.1):
        difference, err = gap(0.5, smaller)
        assert difference > 3.0 * err
    difference, err = gap(0.2, 0.1)
    assert difference > -3.0 * err
    assert folded[0.5][0] > 0.0


def test_time_scale_factor_maps_lm2_relaxation_onto_continuous_time():
    eps, chains = 0.1, 10000
    sampler = Lm2Sampler(NetworkParams.free([0.0]), eps)
    a = time_scale_factor("lm2", "gibbs", 0.0, eps)
    rng = RngStream(17)
    state = sampler.init_state(chains, rng)
    state.z[:] = 0
    record = rescale_time(ensemble_relaxation(sampler, state, int(math.ceil(3.0 / a)), rng), 1.0 / a)
    # W01 + W10 = a at zero input, so the rescaled mean follows (1 - e^{-t})/2
    observed = record.observables["mean_z"][:, 0]
    sigma = math.sqrt(0.25 / chains)
    for t in (0.5, 1.0, 2.0, 3.0):
        k = int(np.argmin(np.abs(record.times - t)))
        assert observed[k] == pytest.approx(0.5 * (1.0 - math.exp(-record.times[k])), abs=3.0 * sigma)
