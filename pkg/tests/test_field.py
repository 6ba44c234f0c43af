import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from cml import rng
from cml.field import (
    FluctuationModel, GridDistribution, Venue, clt_spread, convolve, crypto_delta,
    damping, default_sigma, gaussian_grid, line_venues, point_mass, region_average,
    sample_metric, sigma_matrix, uniform_grid, variance_scaling_experiment,
)
from cml.metric import ETA


def test_zero_sigma_gives_eta():
    model = FluctuationModel(np.zeros((4, 4)))
    draw = rng.generator(1, rng.Stream.METRIC)
    assert np.array_equal(sample_metric(model, Venue(1, 2, 3, 4), draw=draw).entries, ETA)
    crypto = FluctuationModel(np.zeros((4, 4)), mode="crypto")
    assert np.array_equal(sample_metric(crypto, Venue(), 0.3).entries, ETA)


def test_mass_venue_is_flat():
    mass = Venue(5, 5, 5)
    model = FluctuationModel(np.full((4, 4), 0.3), mass_positions=(mass,))
    draw = rng.generator(2, rng.Stream.METRIC)
    for it in range(5):
        assert np.array_equal(sample_metric(model, Venue(5, 5, 5, it), draw=draw).entries, ETA)
    assert damping(model, Venue(5, 5, 5)) == 0.0
    assert damping(model, Venue(5, 5, 5 + 4)) == 1.0
    d = [damping(model, Venue(5, 5, 5 + k)) for k in range(5)]
    assert all(b > a for a, b in zip(d, d[1:]))


def test_sample_std_of_component():
    model = FluctuationModel(sigma_matrix({(2, 2): 0.1}))
    draw = rng.generator(7, rng.Stream.METRIC)
    xs = np.array([sample_metric(model, Venue(), draw=draw).entries[2, 2] for _ in range(100_000)])
    # std estimator has sd 0.1 / sqrt(2n) ~ 2.2e-4, so 0.003 is a loose band
    assert abs(xs.std(ddof=1) - 0.1) < 0.003


def test_sample_metric_requires_stream():
    with pytest.raises(ValueError):
        sample_metric(FluctuationModel(), Venue())


def test_model_validation():
    with pytest.raises(ValueError):
        FluctuationModel(-default_sigma())
    with pytest.raises(ValueError):
        FluctuationModel(mode="crypto", frequency=1e10)
    with pytest.raises(ValueError):
        FluctuationModel(mode="other")
    with pytest.raises(ValueError):
        Venue(grain=0.0)


def test_crypto_is_reproducible_and_centered():
    model = FluctuationModel(mode="crypto", phase_seed=9)
    v = Venue(1, 0, 2, 3)
    a = sample_metric(model, v, 1.234e-30)
    b = sample_metric(model, v, 1.234e-30)
    assert a == b
    # averaging over one full period removes the oscillation
    t = np.arange(1000) / 1000 / model.frequency
    avg = crypto_delta(model, v, t).mean(axis=0)
    assert np.max(np.abs(avg)) < 1e-12
    assert np.max(np.abs(crypto_delta(model, v, t))) > 0.01


def test_region_average():
    model = FluctuationModel(sigma_matrix({(2, 2): 0.1}))
    one = region_average(model, line_venues(1), rng.generator(3, 0))
    assert one == sample_metric(model, Venue(), draw=rng.generator(3, 0))
    big = region_average(model, line_venues(4096), rng.generator(3, 1))
    assert abs(big.entries[2, 2] - 1.0) < 5 * 0.1 / 64
    with pytest.raises(ValueError):
        region_average(model, [], rng.generator(3, 2))


def test_variance_scaling():
    model = FluctuationModel(sigma_matrix({(2, 2): 0.1}))
    ms = [2 ** k for k in range(9)]
    t = variance_scaling_experiment(model, ms, 4000, seed=11)
    assert abs(t.slope + 1.0) <= 0.05
    # sd of a variance estimate with 4000 trials is sqrt(2/3999) ~ 2.2%
    assert t.var[0] == pytest.approx(0.01, rel=0.1)
    for a, b in zip(t.var, t.var[1:]):
        assert b / a == pytest.approx(0.5, rel=0.15)
    with pytest.raises(ValueError):
        variance_scaling_experiment(model, ms, 10, seed=1)


def test_convolve_point_mass_shifts():
    d = gaussian_grid(1.0, 0.1)
    s = convolve(d, point_mass(0.5, 0.1))
    assert np.array_equal(s.weights, d.weights)
    assert s.origin == pytest.approx(d.origin + 0.5)
    with pytest.raises(ValueError):
        convolve(d, point_mass(0.0, 0.2))


def test_gaussian_convolution():
    d = gaussian_grid(0.5, 0.01)
    s = convolve(d, d)
    assert s.var == pytest.approx(1.0, rel=1e-6)
    ref = gaussian_grid(1.0, 0.01)
    dens = np.interp(ref.x, s.x, s.weights)
    assert np.max(np.abs(dens - ref.weights)) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 200), st.integers(2, 9))
def test_clt_variance_additive(n, points):
    d1 = uniform_grid(points, 1.0)
    s = clt_spread(d1, n)
    assert s.var / n == pytest.approx(d1.var, rel=1e-6)
    assert s.mean == pytest.approx(n * d1.mean, rel=1e-9)


def test_clt_kurtosis():
    d1 = uniform_grid(11, 1.0)
    assert clt_spread(d1, 1) is d1
    s = clt_spread(d1, 64)
    assert abs(s.excess_kurtosis) < 0.05
    # excess kurtosis of a sum of n iid draws is k1 / n
    assert s.excess_kurtosis == pytest.approx(d1.excess_kurtosis / 64, rel=1e-6)


def test_grid_distribution_validation():
    with pytest.raises(ValueError):
        GridDistribution(0.0, 1.0, [0.0, 0.0])
    with pytest.raises(ValueError):
        GridDistribution(0.0, -1.0, [1.0])


def test_uniform_moments_match_scipy():
    d = uniform_grid(10, 1.0)
    ref = stats.randint(0, 10)
    assert d.mean == pytest.approx(ref.mean())
    assert d.var == pytest.approx(ref.var())
