"""Phase-locked photon pairs with freeze-on-measurement collapse (CHSH).

Pairs leave a single venue sharing one polarization angle and one set of
hidden phases, either in phase or locked pi out of phase.  Measuring the
first member runs the ordinary two-gate polarizer rule; its oscillation
then freezes on the measurement axis (outcome +1) or on the orthogonal
axis (outcome -1), and so does its partner, wherever it is.  The partner
is then measured against its frozen angle with fresh hidden phases.

This collapse rule is a modelling choice: it is the minimal rule that
gives E(a, b) = cos(2(a - b)).  ``classical=True`` switches to a local
control in which each side answers from the pre-shared angle alone.
"""

from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import AlreadyMeasuredError
from .oscillator import HALF_PI, gates_pass, relative_angle
from .parallel import map_ranges

LOCK_MODES = {"in-phase": 0.0, "pi-offset": np.pi}
QUARTER_PI = 0.25 * np.pi


def _lock_offset(lock_mode):
    try:
        return LOCK_MODES[lock_mode]
    except KeyError:
        raise ValueError(f"lock_mode must be one of {sorted(LOCK_MODES)}") from None


def _pair_draws(seed, ids):
    """shared_pol, shared phases and the partner's fresh phases for pair ``ids``."""
    u = rng.uniform(seed, rng.Stream.PAIR, np.asarray(ids)[..., None], np.arange(5))
    return np.pi * u[..., 0], u[..., 1], u[..., 2], u[..., 3], u[..., 4]


@dataclass
class EntangledPair:
    id: int
    seed: int
    shared_pol: float
    phase_xy: float
    phase_tz: float
    lock_mode: str = "in-phase"
    collapsed: float = None  # member A's frozen angle once measured

    def member_angle(self, member):
        base = self.shared_pol if self.collapsed is None else self.collapsed
        return base + (_lock_offset(self.lock_mode) if member == "B" else 0.0)


def entangled_pair_source(n, seed, lock_mode="in-phase"):
    if n < 1:
        raise ValueError("n must be >= 1")
    _lock_offset(lock_mode)
    pol, xy, tz, _, _ = _pair_draws(seed, np.arange(n))
    return [EntangledPair(i, seed, float(pol[i]), float(xy[i]), float(tz[i]), lock_mode)
            for i in range(n)]


def measure_entangled(pair, angle_first, angle_second, order="AB"):
    """Measure both members; returns ``(outcome_first, outcome_second)`` in {+1, -1}."""
    if pair.collapsed is not None:
        raise AlreadyMeasuredError(f"pair {pair.id} has already been measured")
    if order not in ("AB", "BA"):
        raise ValueError("order must be 'AB' or 'BA'")
    first, second = order
    offset = _lock_offset(pair.lock_mode)
    delta = relative_angle(pair.member_angle(first), angle_first)
    plus = bool(gates_pass(pair.phase_xy, pair.phase_tz, delta))
    frozen = angle_first if plus else angle_first + HALF_PI
    pair.collapsed = frozen - (offset if first == "B" else 0.0)
    _, _, _, xy2, tz2 = _pair_draws(pair.seed, pair.id)
    delta2 = relative_angle(pair.member_angle(second), angle_second)
    plus2 = bool(gates_pass(xy2, tz2, delta2))
    return (1 if plus else -1), (1 if plus2 else -1)


def correlation_sum(a, b, seed, start, stop, classical=False, lock_mode="in-phase"):
    """Sum of outcome products for pairs ``start..stop-1`` at settings (a, b)."""
    offset = _lock_offset(lock_mode)
    pol, xy, tz, xy2, tz2 = _pair_draws(seed, np.arange(start, stop))
    if classical:
        plus_a = relative_angle(pol, a) < QUARTER_PI
        plus_b = relative_angle(pol + offset, b) < QUARTER_PI
    else:
        plus_a = gates_pass(xy, tz, relative_angle(pol, a))
        frozen = np.where(plus_a, a, a + HALF_PI)
        plus_b = gates_pass(xy2, tz2, relative_angle(frozen + offset, b))
    same = np.count_nonzero(plus_a == plus_b)
    return 2 * same - (stop - start)


SETTINGS = ("ab", "ab'", "a'b", "a'b'")


@dataclass(frozen=True)
class CHSHResult:
    E: dict
    S: float
    n: int


def chsh_experiment(a, a_prime, b, b_prime, n, seed, classical=False, lock_mode="in-phase"):
    """S = |E(a,b) - E(a,b') + E(a',b) + E(a',b')| with fresh pairs per setting."""
    if n < 100_000:
        raise ValueError("n must be >= 1e5")
    angles = {"ab": (a, b), "ab'": (a, b_prime), "a'b": (a_prime, b), "a'b'": (a_prime, b_prime)}
    E = {}
    for s, label in enumerate(SETTINGS):
        sub = int(rng.hash64(seed, rng.Stream.CHSH, s))
        x, y = angles[label]
        total = sum(map_ranges(
            lambda i, j: correlation_sum(x, y, sub, i, j, classical, lock_mode), n))
        E[label] = total / n
    S = abs(E["ab"] - E["ab'"] + E["a'b"] + E["a'b'"])
    return CHSHResult(E, float(S), n)
