"""Torsional-oscillation photons and deterministic polarizer gates.

A photon carries a polarization angle and two hidden oscillation phases,
one for the spatial (x-y) torsion and one for the t-z oscillation.  Both
phases are uniform on [0, 1) across an ensemble because the oscillation
frequency is far beyond anything measurable.  A polarizer lets the photon
through iff each phase lies below |cos(delta)|, where delta is the folded
angle between photon and polarizer axis; each gate alone gives a |cos|
law and together they give cos^2 (Malus).

Given its phases the outcome is fully determined.  All phases come from
counters (seed, photon id, encounter index), so runs are reproducible
under any chunking.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import rng
from .parallel import map_ranges

HALF_PI = 0.5 * np.pi


def torsion_angle(k, omega, phi, t):
    """Frictionless torsional spring: theta = k cos(omega t + phi)."""
    return k * np.cos(omega * t + phi)


def torsion_rate(k, omega, phi, t):
    return -k * omega * np.sin(omega * t + phi)


def fold_angle(angle):
    """Axial angle normalized to [0, pi)."""
    return np.mod(angle, np.pi)


def relative_angle(pol, axis):
    """Angle between two axial directions, folded to [0, pi/2]."""
    d = np.mod(np.asarray(pol) - np.asarray(axis), np.pi)
    return np.minimum(d, np.pi - d)


def gates_pass(phase_xy, phase_tz, delta, tz_gate=True):
    threshold = np.abs(np.cos(delta))
    passed = phase_xy < threshold
    if tz_gate:
        passed = passed & (phase_tz < threshold)
    return passed


def hidden_phases(seed, ids, encounter):
    """(phase_xy, phase_tz) for photons ``ids`` at their ``encounter``-th refresh."""
    u = rng.uniform(seed, rng.Stream.PHOTON_PHASE, np.asarray(ids)[..., None],
                    np.asarray(encounter)[..., None], np.arange(2))
    return u[..., 0], u[..., 1]


@dataclass(frozen=True)
class Polarizer:
    axis: float

    def __post_init__(self):
        object.__setattr__(self, "axis", float(fold_angle(self.axis)))


@dataclass(frozen=True)
class Photon:
    pol: float
    phase_xy: float
    phase_tz: float
    alive: bool = True
    id: int = 0
    seed: int = 0
    encounters: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pol", float(fold_angle(self.pol)))
        for name in ("phase_xy", "phase_tz"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")


def polarizer_pass(ph, pol, tz_gate=True):
    """Send one photon through a polarizer; returns ``(passed, photon_out)``.

    A transmitted photon leaves polarized along the axis with refreshed
    hidden phases; an absorbed one leaves with ``alive=False``.
    """
    if not ph.alive:
        raise ValueError("photon has already been absorbed")
    delta = relative_angle(ph.pol, pol.axis)
    passed = bool(gates_pass(ph.phase_xy, ph.phase_tz, delta, tz_gate))
    if not passed:
        return False, replace(ph, alive=False)
    n = ph.encounters + 1
    xy, tz = hidden_phases(ph.seed, ph.id, n)
    return True, replace(ph, pol=pol.axis, phase_xy=float(xy), phase_tz=float(tz), encounters=n)


@dataclass(eq=False)
class Beam:
    """Struct-of-arrays view of many photons."""

    pol: np.ndarray
    phase_xy: np.ndarray
    phase_tz: np.ndarray
    alive: np.ndarray
    id: np.ndarray
    encounters: np.ndarray
    seed: int

    def __len__(self):
        return self.id.size

    def photons(self):
        for i in range(len(self)):
            yield Photon(float(self.pol[i]), float(self.phase_xy[i]), float(self.phase_tz[i]),
                         bool(self.alive[i]), int(self.id[i]), self.seed, int(self.encounters[i]))


def parse_source(kind):
    """``"unpolarized"``, ``("fixed", angle)`` or ``"fixed:<angle>"`` -> (name, angle)."""
    if isinstance(kind, str):
        if kind == "unpolarized":
            return "unpolarized", None
        if kind.startswith("fixed:"):
            return "fixed", float(kind.split(":", 1)[1])
    elif isinstance(kind, (tuple, list)) and len(kind) == 2 and kind[0] == "fixed":
        return "fixed", float(kind[1])
    raise ValueError(f"unknown source kind {kind!r}")


def photon_beam(kind, seed, start, stop):
    name, angle = parse_source(kind)
    ids = np.arange(start, stop, dtype=np.int64)
    if name == "fixed":
        pol = np.full(ids.size, fold_angle(angle))
    else:
        pol = np.pi * rng.uniform(seed, rng.Stream.PHOTON_POL, ids)
    xy, tz = hidden_phases(seed, ids, 0)
    return Beam(pol, xy, tz, np.ones(ids.size, bool), ids,
                np.zeros(ids.size, np.int64), seed)


def photon_source(kind, n, seed):
    """Beam of ``n`` photons; fixed polarization or uniform on [0, pi)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return photon_beam(kind, seed, 0, n)


def transmit(beam, polarizer, tz_gate=True):
    """Vectorized :func:`polarizer_pass` over the live photons of ``beam`` (in place)."""
    live = np.flatnonzero(beam.alive)
    delta = relative_angle(beam.pol[live], polarizer.axis)
    ok = gates_pass(beam.phase_xy[live], beam.phase_tz[live], delta, tz_gate)
    beam.alive[live[~ok]] = False
    through = live[ok]
    beam.encounters[through] += 1
    beam.pol[through] = polarizer.axis
    xy, tz = hidden_phases(beam.seed, beam.id[through], beam.encounters[through])
    beam.phase_xy[through] = xy
    beam.phase_tz[through] = tz
    return int(ok.sum())


@dataclass(frozen=True)
class MalusRow:
    delta: float
    n: int
    passed: int

    @property
    def fraction(self):
        return self.passed / self.n

    @property
    def expected(self):
        return float(np.cos(self.delta) ** 2)

    @property
    def stderr(self):
        p = self.expected
        return float(np.sqrt(p * (1.0 - p) / self.n))


def _count_passes(kind, axis, seed, n, tz_gate):
    def run(a, b):
        return transmit(photon_beam(kind, seed, a, b), Polarizer(axis), tz_gate)

    return sum(map_ranges(run, n))


def malus_experiment(deltas, n, seed, tz_gate=True):
    """Transmitted fraction of photons polarized at ``delta`` to a polarizer at 0."""
    if n < 10_000:
        raise ValueError("n must be >= 1e4")
    rows = []
    for i, delta in enumerate(deltas):
        sub = int(rng.hash64(seed, rng.Stream.MALUS, i))
        rows.append(MalusRow(float(delta), n, _count_passes(("fixed", delta), 0.0, sub, n, tz_gate)))
    return rows


@dataclass(frozen=True)
class ChainResult:
    axes: tuple
    n: int
    survivors: tuple

    @property
    def final_fraction(self):
        return self.survivors[-1] / self.n

    @property
    def fraction_of_first(self):
        return self.survivors[-1] / self.survivors[0] if self.survivors[0] else 0.0


def polarizer_chain(axes, kind, n, seed, tz_gate=True):
    """Propagate a beam through polarizers in order; counts survivors per stage."""
    if n < 10_000:
        raise ValueError("n must be >= 1e4")
    if not axes:
        raise ValueError("need at least one polarizer")
    sub = int(rng.hash64(seed, rng.Stream.CHAIN))
    pols = [Polarizer(a) for a in axes]

    def run(a, b):
        beam = photon_beam(kind, sub, a, b)
        return np.array([transmit(beam, p, tz_gate) for p in pols], dtype=np.int64)

    counts = np.sum(map_ranges(run, n), axis=0)
    return ChainResult(tuple(float(a) for a in axes), n, tuple(int(c) for c in counts))
