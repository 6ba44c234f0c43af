import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cml.errors import InvalidGeometryError, NonLorentzianError
from cml.metric import (
    ETA, Metric4, PhaseMetric, W_TRANSFORM, determinant, idealized_measurement,
    interference_density, minkowski, phase_metric_array, rotoreflect,
    schwarzschild_distances, superpose, transform, volume_element,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
angles = st.floats(-20, 20, allow_nan=False, allow_infinity=False)


def symmetric(values):
    a = np.zeros((4, 4))
    a[np.triu_indices(4)] = values
    return a + np.triu(a, 1).T


def test_minkowski():
    g = minkowski()
    assert np.array_equal(g.entries, np.diag([1.0, 1.0, 1.0, -1.0]))
    assert determinant(g) == -1.0
    assert volume_element(g) == 1.0
    assert superpose(g, g) == g


def test_metric4_validation():
    with pytest.raises(ValueError):
        Metric4(np.eye(3))
    bad = np.eye(4)
    bad[0, 1] = 1.0
    with pytest.raises(ValueError):
        Metric4(bad)
    g = Metric4(ETA)
    with pytest.raises(ValueError):
        g.entries[0, 0] = 2.0


def test_phase_metric_det_is_minus_one():
    for a in np.linspace(-7, 7, 57):
        assert determinant(PhaseMetric(a).expand()) == pytest.approx(-1.0, abs=1e-15)


@given(st.lists(finite, min_size=10, max_size=10))
def test_determinant_matches_numpy(values):
    a = symmetric(values)
    scale = max(1.0, np.abs(a).max()) ** 4
    assert abs(determinant(a) - np.linalg.det(a)) <= 1e-10 * scale


@given(st.lists(finite, min_size=10, max_size=10))
def test_half_scaling_divides_det_by_16(values):
    a = symmetric(values)
    # the oracle is numpy's LU determinant of the scaled matrix
    scale = max(1.0, np.abs(a).max()) ** 4
    assert abs(np.linalg.det(0.5 * a) - determinant(a) / 16.0) <= 1e-10 * scale
    assert abs(determinant(0.5 * a) - determinant(a) / 16.0) <= 1e-12 * scale


def test_determinant_batched():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(5, 7, 4, 4))
    assert np.allclose(determinant(a), np.linalg.det(a), rtol=1e-12, atol=1e-12)


def test_volume_element():
    assert volume_element(np.diag([1.0, 1.0, 2.0, -0.5])) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(NonLorentzianError):
        volume_element(np.eye(4))
    # tiny positive determinants from rounding clamp to 0
    assert volume_element(np.diag([1.0, 1.0, 1e-13, 1.0])) == 0.0


def test_superpose_phase_metrics():
    a, b = 0.3, 1.9
    g = superpose(PhaseMetric(a).expand(), PhaseMetric(b).expand())
    expect = np.diag([1, 1, (np.exp(1j * a) + np.exp(1j * b)) / 2,
                      -(np.exp(-1j * a) + np.exp(-1j * b)) / 2])
    assert np.allclose(g.entries, expect, rtol=0, atol=1e-15)
    with pytest.raises(ValueError):
        superpose(minkowski(), PhaseMetric(a).expand())


def test_interference_examples():
    assert interference_density(0.7, 0.7) == pytest.approx(1.0, abs=1e-15)
    assert interference_density(math.pi, 0.0) == pytest.approx(0.0, abs=1e-12)
    assert interference_density(math.pi / 2, 0.0) == pytest.approx(math.sqrt(2) / 2, abs=1e-12)


def test_interference_grid_against_numpy_det():
    alpha = np.linspace(0, 2 * np.pi, 100, endpoint=False)
    aa, bb = np.meshgrid(alpha, alpha, indexing="ij")
    dens = interference_density(aa, bb)
    assert np.max(np.abs(dens - np.abs(np.cos((aa - bb) / 2)))) < 1e-12
    # independent oracle: LU determinant of the averaged complex metric
    g3 = 0.5 * (phase_metric_array(aa) + phase_metric_array(bb))
    oracle = np.sqrt(np.clip(-np.linalg.det(g3).real, 0, None))
    assert np.max(np.abs(dens - oracle)) < 1e-12


def test_w_transform_determinant():
    assert np.linalg.det(W_TRANSFORM) == pytest.approx(-1.0, abs=1e-15)


def test_rotoreflect_examples():
    g0 = rotoreflect(0.0).entries
    assert np.allclose(g0[2:, 2:], [[-1, 0], [0, 1]], atol=1e-15)
    g1 = rotoreflect(math.pi / 2).entries
    assert np.allclose(g1[2:, 2:], [[0, 1], [1, 0]], atol=1e-15)
    assert np.array_equal(g1[:2, :2], np.eye(2))


@settings(max_examples=100)
@given(angles)
def test_rotoreflect_block_and_det(a):
    g = rotoreflect(a).entries
    block = [[-math.cos(a), math.sin(a)], [math.sin(a), math.cos(a)]]
    assert np.allclose(g[2:, 2:], block, rtol=0, atol=1e-12)
    assert np.linalg.det(g) == pytest.approx(-1.0, abs=1e-12)
    assert np.max(np.abs(transform(phase_metric_array(a)).imag)) < 1e-12


def test_schwarzschild():
    contra, cov = schwarzschild_distances(10.0, 1.0)
    assert contra == 10.0
    assert cov.diverged
    assert cov.singularity == 2.0
    assert all(b > a for a, b in zip(cov.partial_sums, cov.partial_sums[1:]))
    assert cov.partial_sums[-1] > 1e6
    assert schwarzschild_distances(10.0, 0.0) == (10.0, 10.0)
    with pytest.raises(InvalidGeometryError):
        schwarzschild_distances(1.0, 1.0)
    with pytest.raises(InvalidGeometryError):
        schwarzschild_distances(-1.0, 0.0)


def test_schwarzschild_partial_sums_track_analytic_variation():
    # direct evaluation of xi = r / (1 - 2gm/r) on the same grid, last node 2gm - h
    gm, cells = 1.0, 256
    h = 2 * gm / cells
    r = h * np.arange(cells)
    xi = r / (1 - 2 * gm / np.where(r == 0, 1.0, r))
    xi[0] = 0.0
    expect = np.sum(np.abs(np.diff(xi)))
    _, rep = schwarzschild_distances(10.0, gm, threshold=0.0, base_cells=cells, max_levels=1)
    assert rep.partial_sums[0] == pytest.approx(expect, rel=1e-12)


def test_idealized_measurement_example():
    rep = idealized_measurement(0.5, 3.0, 2.0, 1.0)
    assert rep.dt == pytest.approx(rep.dx, abs=1e-12)
    assert rep.dx == pytest.approx(1.0)
    assert rep.t1 < rep.t2


@given(st.floats(-0.9, 0.9), st.floats(0.1, 50), st.floats(0.1, 50), st.floats(0, 10))
def test_idealized_measurement_equality(v, a, b, t0):
    if abs(a - b) < 1e-6:
        return
    for sign in (1.0, -1.0):
        rep = idealized_measurement(v, sign * a - v * t0, sign * b - v * t0, t0)
        assert abs(rep.dt - rep.dx) <= 1e-12 * max(1.0, rep.dx)
        # light from x at t0 reaches the axis at t0 + |x|
        assert rep.t1 == pytest.approx(t0 + min(a, b), abs=1e-12 * (1 + t0 + a + b))


def test_idealized_measurement_rejects():
    with pytest.raises(ValueError):
        idealized_measurement(1.0, 1, 2, 0)
    with pytest.raises(ValueError):
        idealized_measurement(0.0, 1, 1, 0)
    with pytest.raises(ValueError):
        idealized_measurement(0.0, -1, 1, 0)
