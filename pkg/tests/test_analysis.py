import math

import numpy as np
import pytest
from scipy import signal

from modules.analysis import (
    ConfigHistogram,
    autocorrelation_time,
    empirical_distribution,
    exact_boltzmann,
    extrapolate_to_zero_eps,
    jackknife,
    kl_divergence,
    pack_configurations,
    stationary_distribution,
    total_variation,
)
from modules.boltzmann_networks import NetworkParams, all_configurations, lm2_stationary_activation
from modules.errors import (
    DimensionError,
    InsufficientDataError,
    ParameterError,
    SeriesTooShortError,
)
from modules.math_kernel import logistic


def test_pack_configurations_is_little_endian():
    np.testing.assert_array_equal(pack_configurations(all_configurations(3)), np.arange(8))
    assert pack_configurations([1, 0, 1]) == 5


def test_histogram_add_and_merge():
    hist = ConfigHistogram(2).add(np.array([[0, 0], [1, 0], [1, 0]]))
    np.testing.assert_array_equal(hist.counts, [1, 2, 0, 0])
    merged = hist.merge(ConfigHistogram(2).add(np.array([[1, 1]])))
    assert merged.total == 4
    np.testing.assert_allclose(merged.probabilities(), [0.25, 0.5, 0.0, 0.25])
    with pytest.raises(DimensionError):
        hist.add(np.array([[0, 1, 1]]))
    with pytest.raises(InsufficientDataError):
        ConfigHistogram(3).probabilities()


def test_kl_divergence_known_value():
    assert kl_divergence([0.5, 0.5], np.array([0.25, 0.75])) == pytest.approx(0.1438, abs=1e-4)
    assert kl_divergence([0.5, 0.5], np.array([0.5, 0.5])) == pytest.approx(0.0)


def test_kl_divergence_pseudo_count_for_empty_cells():
    hist = ConfigHistogram(1, np.array([3, 0]))
    assert kl_divergence([0.5, 0.5], hist) == pytest.approx(0.1438, abs=1e-4)
    with pytest.raises(DimensionError):
        kl_divergence([0.25] * 4, np.array([0.5, 0.5]))
    with pytest.raises(InsufficientDataError):
        kl_divergence([0.5, 0.5], ConfigHistogram(1))


def test_exact_boltzmann_single_neuron():
    p = exact_boltzmann(NetworkParams.free([0.7]))
    np.testing.assert_allclose(p, [1.0 - logistic(0.7), logistic(0.7)])


def test_exact_boltzmann_permutation_equivariance(three_neurons):
    perm = np.array([2, 0, 1])
    permuted = NetworkParams(three_neurons.weights[np.ix_(perm, perm)], three_neurons.biases[perm])
    marginals = exact_boltzmann(three_neurons) @ all_configurations(3)
    permuted_marginals = exact_boltzmann(permuted) @ all_configurations(3)
    np.testing.assert_allclose(permuted_marginals, marginals[perm], atol=1e-12)


def test_total_variation():
    assert total_variation([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)
    assert total_variation([0.2, 0.8], [0.2, 0.8]) == 0.0


def test_autocorrelation_of_white_noise(rng):
    assert autocorrelation_time(rng.normal(20000)) == pytest.approx(0.5, abs=0.05)


def test_autocorrelation_of_ar1_process(rng):
    rho = 0.8
    series = signal.lfilter([1.0], [1.0, -rho], rng.normal(200000))
    expected = (1.0 + rho) / (2.0 * (1.0 - rho))
    assert autocorrelation_time(series) == pytest.approx(expected, rel=0.1)


def test_autocorrelation_input_checks(rng):
    with pytest.raises(SeriesTooShortError):
        autocorrelation_time(rng.normal(999))
    with pytest.raises(InsufficientDataError):
        autocorrelation_time(np.ones(5000))
    with pytest.raises(DimensionError):
        autocorrelation_time(np.zeros((100, 20)))


def test_jackknife_of_mean_matches_standard_error():
    data = np.arange(10.0)
    value, err = jackknife(data, blocks=10)
    assert value == pytest.approx(4.5)
    assert err == pytest.approx(data.std(ddof=1) / math.sqrt(10))
    with pytest.raises(InsufficientDataError):
        jackknife([1.0])


def test_extrapolation_of_linear_data_is_exact():
    points = [(0.2, 1.4, 0.01), (0.05, 1.1, 0.01), (0.1, 1.2, 0.02)]
    result = extrapolate_to_zero_eps(points)
    assert result.value == pytest.approx(1.0, abs=1e-10)
    assert result.coefficients[0] == pytest.approx(2.0)
    assert result.err > 0
    assert extrapolate_to_zero_eps(points[::-1]).value == pytest.approx(result.value, abs=1e-12)


def test_extrapolation_input_checks():
    with pytest.raises(InsufficientDataError):
        extrapolate_to_zero_eps([(0.1, 1.0, 0.1), (0.2, 1.1, 0.1)])
    with pytest.raises(ParameterError):
        extrapolate_to_zero_eps([(0.1, 1.0, 0.1), (0.2, 1.1, 0.1), (0.3, 1.2, 0.1)], degree=3)
    with pytest.raises(ParameterError):
        extrapolate_to_zero_eps([(0.1, 1.0, 0.0), (0.2, 1.1, 0.1), (0.3, 1.2, 0.1)])


def test_lm2_activation_extrapolates_to_logistic():
    eps = [0.2, 0.1, 0.05]
    err = 1e-4
    points = [(e, float(lm2_stationary_activation(1.0, e)), err) for e in eps]
    result = extrapolate_to_zero_eps(points)
    assert abs(result.value - logistic(1.0)) < 2.0 * result.err
    assert abs(result.value - logistic(1.0)) < 1e-4


def test_stationary_distribution_two_states():
    a, b = 0.3, 0.1
    pi = stationary_distribution([[1 - a, a], [b, 1 - b]])
    np.testing.assert_allclose(pi, [b / (a + b), a / (a + b)])
    with pytest.raises(DimensionError):
        stationary_distribution(np.ones((2, 3)) / 3)
    with pytest.raises(ParameterError):
        stationary_distribution([[0.5, 0.6], [0.5, 0.5]])


def test_empirical_distribution_with_offset():
    np.testing.assert_allclose(empirical_distribution([1, 2, 2, 4], 4, first_state=1), [0.25, 0.5, 0.0, 0.25])
    with pytest.raises(InsufficientDataError):
        empirical_distribution(np.array([], dtype=np.int64), 3)
