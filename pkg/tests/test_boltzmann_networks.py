import math

import numpy as np
import pytest

from modules.analysis import exact_boltzmann, stationary_distribution, total_variation
from modules.boltzmann_networks import (
    NetworkParams,
    Process,
    activation_table,
    all_configurations,
    energy,
    fit_logistic,
    lm2_stationary_activation,
    lm2_transition_rates,
    measure_activation,
    total_input,
    transform_params,
    transition_matrix,
)
from modules.errors import ConvergenceError, DimensionError, ParameterError
from modules.math_kernel import lambda_eps, logistic, std_normal_cdf
from modules.samplers import GibbsSampler, Lm1Sampler, Lm2Sampler

B_GRID = np.arange(-4.0, 4.01, 0.5)


def test_params_validation():
    with pytest.raises(ParameterError):
        NetworkParams(np.array([[0.0, 1.0], [0.5, 0.0]]), np.zeros(2))
    with pytest.raises(ParameterError):
        NetworkParams(np.eye(2), np.zeros(2))
    with pytest.raises(DimensionError):
        NetworkParams(np.zeros((2, 2)), np.zeros(3))
    params = NetworkParams.free([0.0, 1.0])
    with pytest.raises(ValueError):
        params.biases[0] = 2.0


def test_text_format_with_comments(three_neurons, tmp_path):
    path = tmp_path / "net.txt"
    path.write_text("# three neurons\n" + three_neurons.to_text())
    loaded = NetworkParams.load(path)
    np.testing.assert_array_equal(loaded.weights, three_neurons.weights)
    np.testing.assert_array_equal(loaded.biases, three_neurons.biases)
    with pytest.raises(DimensionError):
        NetworkParams.from_text("2\n0 1\n1 0\n")


def test_energy_difference_is_total_input(three_neurons):
    for z in all_configurations(3):
        for i in range(3):
            on, off = z.copy(), z.copy()
            on[i], off[i] = 1, 0
            assert energy(three_neurons, on) - energy(three_neurons, off) == pytest.approx(total_input(three_neurons, z, i))


def test_delta_max_bounds_inputs(three_neurons):
    inputs = [abs(total_input(three_neurons, z, i)) for z in all_configurations(3) for i in range(3)]
    assert max(inputs) <= three_neurons.delta_max + 1e-12


def test_transform_round_trip(three_neurons):
    tp = transform_params(three_neurons, 0.1)
    assert tp.wp_diag == pytest.approx(2.0 / math.sqrt(0.1))
    c = math.sqrt(0.1) / (2.0 * lambda_eps(0.1))
    np.testing.assert_allclose(tp.wp, c * three_neurons.weights)
    np.testing.assert_allclose(tp.bp, c * three_neurons.biases - 1.0 / math.sqrt(0.1))
    back = tp.to_network()
    np.testing.assert_allclose(back.weights, three_neurons.weights, atol=1e-12)
    np.testing.assert_allclose(back.biases, three_neurons.biases, atol=1e-12)


def test_activation_table_entries():
    assert activation_table("gibbs", 0.0) == pytest.approx(0.5)
    assert activation_table("bm", 1.0) == pytest.approx(logistic(-1.0))
    assert activation_table("lm1", -1.0) == pytest.approx(std_normal_cdf(1.0))
    c = math.sqrt(0.1) / (2.0 * lambda_eps(0.1))
    assert activation_table("lm2", 0.5, 0.1) == pytest.approx(std_normal_cdf(-1.0 / math.sqrt(0.1) - c * 0.5), rel=1e-10)
    assert activation_table("bm", 0.0, tau_ref=4.0) == pytest.approx(logistic(-math.log(4.0)))
    with pytest.raises(ParameterError):
        activation_table("lm2", 0.0)
    with pytest.raises(ParameterError):
        activation_table("bm", 0.0, tau_ref=0.5)


def test_process_parse():
    assert Process.parse("Gibbs") is Process.BM
    assert Process.parse(Process.OU2) is Process.OU2
    with pytest.raises(ParameterError):
        Process.parse("lm3")


def test_lm2_free_neuron_activation_limits():
    assert lm2_stationary_activation(0.0, 0.3) == pytest.approx(0.5)
    deviations = [np.max(np.abs(lm2_stationary_activation(B_GRID, eps) - logistic(B_GRID))) for eps in (0.2, 0.1, 0.05, 0.01)]
    assert all(a > b for a, b in zip(deviations, deviations[1:]))
    assert deviations[-1] < 0.01


def test_lm2_rates_are_mirrored():
    w01, w10 = lm2_transition_rates(0.7, 0.1)
    w01_neg, w10_neg = lm2_transition_rates(-0.7, 0.1)
    assert w01 == pytest.approx(w10_neg)
    assert w10 == pytest.approx(w01_neg)


def test_gibbs_matrix_stationary_is_boltzmann(three_neurons):
    matrix = transition_matrix(three_neurons, GibbsSampler(three_neurons).on_probability)
    np.testing.assert_allclose(matrix.sum(axis=1), 1.0)
    np.testing.assert_allclose(stationary_distribution(matrix), exact_boltzmann(three_neurons), atol=1e-10)


def test_lm2_matrix_stationary_converges_with_epsilon(three_neurons):
    distances = []
    for eps in (0.2, 0.1, 0.05, 0.01):
        sampler = Lm2Sampler(three_neurons, eps)
        pi = stationary_distribution(transition_matrix(three_neurons, sampler.on_probability))
        distances.append(total_variation(pi, exact_boltzmann(three_neurons)))
    assert all(a > b for a, b in zip(distances, distances[1:]))


def test_logistic_fit_default():
    fit = fit_logistic()
    assert fit.r == pytest.approx(1.70, abs=0.02)
    assert abs(fit.mu0) < 1e-6
    assert fit.residual < 0.02


def test_logistic_fit_degenerate_target():
    with pytest.raises(ConvergenceError):
        fit_logistic(lambda x: np.full_like(x, np.nan))


@pytest.mark.parametrize(
    "factory, target",
    [
        (GibbsSampler, logistic),
        (Lm1Sampler, std_normal_cdf),
    ],
)
def test_measured_activation_matches_closed_form(rng, factory, target):
    curve = measure_activation(factory, B_GRID, 400000, rng, chains=64, burn_in=20)
    assert curve.samples >= 400000
    assert np.all(np.abs(curve.p - target(B_GRID)) < 3.0 * curve.err)


def test_measure_activation_lm2_matches_two_state_formula(rng):
    curve = measure_activation(lambda p: Lm2Sampler(p, 0.1, alpha="max"), [-1.0, 0.0, 1.0], 400000, rng, chains=64, burn_in=50)
    expected = lm2_stationary_activation(np.array([-1.0, 0.0, 1.0]), 0.1)
    assert np.all(np.abs(curve.p - expected) < 3.0 * curve.err)
