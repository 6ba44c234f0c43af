import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from cml.oscillator import (
    Photon, Polarizer, gates_pass, malus_experiment, parse_source, photon_source,
    polarizer_chain, polarizer_pass, relative_angle, torsion_angle, torsion_rate, transmit,
)


def test_torsion_extremes():
    assert torsion_angle(0.3, 2.0, 0.0, 0.0) == 0.3
    quarter = math.pi / 2 / 2.0
    assert torsion_angle(0.3, 2.0, 0.0, quarter) == pytest.approx(0.0, abs=1e-15)
    assert abs(torsion_rate(0.3, 2.0, 0.0, quarter)) == pytest.approx(0.6)


@given(st.floats(0.1, 2), st.floats(0.1, 10), st.floats(-3, 3), st.floats(0, 5))
def test_torsion_rate_matches_finite_difference(k, w, phi, t):
    h = 1e-6
    fd = (torsion_angle(k, w, phi, t + h) - torsion_angle(k, w, phi, t - h)) / (2 * h)
    rate = torsion_rate(k, w, phi, t)
    assert fd == pytest.approx(rate, rel=1e-6, abs=1e-8 * k * w)


def test_fixed_source():
    beam = photon_source("fixed:0", 3, seed=1)
    assert np.array_equal(beam.pol, np.zeros(3))
    assert len(set(beam.phase_xy)) == 3
    same = photon_source(("fixed", 0.0), 3, seed=1)
    assert np.array_equal(beam.phase_xy, same.phase_xy)


def test_unpolarized_source_is_uniform():
    beam = photon_source("unpolarized", 100_000, seed=2)
    assert abs(beam.pol.mean() - math.pi / 2) < 0.01
    assert stats.kstest(beam.pol, stats.uniform(0, math.pi).cdf).pvalue > 0.01
    assert stats.kstest(beam.phase_xy, "uniform").pvalue > 0.01


def test_parse_source_rejects():
    with pytest.raises(ValueError):
        parse_source("laser")


def test_gate_extremes():
    phases = np.linspace(0, 1, 1000, endpoint=False)
    assert np.all(gates_pass(phases, phases[::-1], 0.0))
    assert not np.any(gates_pass(phases, phases[::-1], math.pi / 2))


@settings(max_examples=50)
@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True),
       st.floats(0, math.pi / 2), st.floats(0, math.pi / 2))
def test_gate_monotone_in_angle(xy, tz, d1, d2):
    lo, hi = sorted((d1, d2))
    # a photon that passes at a larger angle also passes at a smaller one
    if gates_pass(xy, tz, hi):
        assert gates_pass(xy, tz, lo)


def test_polarizer_prepares_photon():
    ph = Photon(0.1, 0.2, 0.3, id=5, seed=9)
    ok, out = polarizer_pass(ph, Polarizer(0.4))
    assert ok and out.pol == 0.4 and out.encounters == 1
    assert (out.phase_xy, out.phase_tz) != (ph.phase_xy, ph.phase_tz)
    dead = polarizer_pass(Photon(0.0, 0.99, 0.0), Polarizer(1.0))[1]
    assert not dead.alive
    with pytest.raises(ValueError):
        polarizer_pass(dead, Polarizer(0.0))


def test_vector_transmit_matches_scalar():
    beam = photon_source("unpolarized", 500, seed=4)
    scalar = [polarizer_pass(p, Polarizer(0.3)) for p in beam.photons()]
    passed = transmit(beam, Polarizer(0.3))
    assert passed == sum(ok for ok, _ in scalar)
    for (ok, out), got in zip(scalar, beam.photons()):
        assert out == got


def test_relative_angle_folds():
    assert relative_angle(math.pi, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert relative_angle(3 * math.pi / 4, 0.0) == pytest.approx(math.pi / 4)


def test_malus_examples():
    rows = malus_experiment([0.0, math.pi / 4, math.pi / 3, math.pi / 2], 1_000_000, seed=12)
    assert rows[0].fraction == 1.0
    assert rows[1].fraction == pytest.approx(0.5, abs=0.002)
    assert rows[2].fraction == pytest.approx(0.25, abs=0.002)
    assert rows[3].fraction == 0.0


def test_single_gate_gives_abs_cos():
    (row,) = malus_experiment([math.pi / 3], 200_000, seed=5, tz_gate=False)
    se = math.sqrt(0.25 / 200_000)
    assert abs(row.fraction - 0.5) < 4 * se


def test_chains():
    crossed = polarizer_chain([0.0, math.pi / 2], "fixed:0", 1_000_000, seed=1)
    assert crossed.survivors[-1] == 0
    three = polarizer_chain([0.0, math.pi / 4, math.pi / 2], "fixed:0", 1_000_000, seed=1)
    assert three.survivors[0] == 1_000_000
    assert three.final_fraction == pytest.approx(0.25, abs=0.002)
    single = polarizer_chain([0.0], "unpolarized", 1_000_000, seed=1)
    assert single.final_fraction == pytest.approx(0.5, abs=0.002)


def test_malus_deterministic():
    a = malus_experiment([0.7], 10_000, seed=3)
    assert a == malus_experiment([0.7], 10_000, seed=3)
    assert a != malus_experiment([0.7], 10_000, seed=4)
