"""Fluctuating metric samples and the distribution machinery behind them.

Two fluctuation models are supported:

* ``stochastic``: each independent metric component gets Gaussian noise
  with standard deviation ``sigma[mu, nu] * damping(venue)``.
* ``crypto``: the noise is replaced by a deterministic oscillation
  ``sigma * damping * cos(2 pi nu t + phi(venue))`` whose per-venue phases
  come from a counter hash.  It looks random at any practical sampling rate
  yet consumes no random stream.
"""

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .metric import ETA, Metric4

FREQ_BAND = (1e30, 1e43)
DEFAULT_FREQUENCY = 1e36
DEFAULT_SIGMA = 0.05

# upper-triangle component order; its position is the hash word for the component
COMPONENTS = tuple((i, j) for i in range(4) for j in range(i, 4))
_IU = (np.array([c[0] for c in COMPONENTS]), np.array([c[1] for c in COMPONENTS]))


def default_sigma():
    s = np.zeros((4, 4))
    s[0, 0] = s[1, 1] = s[2, 2] = DEFAULT_SIGMA
    return s


def sigma_matrix(values):
    """Build a symmetric sigma matrix from a dict ``{(i, j): value}``."""
    s = np.zeros((4, 4))
    for (i, j), v in values.items():
        s[i, j] = s[j, i] = v
    return s


@dataclass(frozen=True)
class Venue:
    """Lattice point (ix, iy, iz, it) of a grainy spacetime."""

    ix: int = 0
    iy: int = 0
    iz: int = 0
    it: int = 0
    grain: float = 1.0

    def __post_init__(self):
        if not self.grain > 0:
            raise ValueError("grain must be positive")

    @property
    def indices(self):
        return (self.ix, self.iy, self.iz, self.it)


@dataclass(frozen=True, eq=False)
class FluctuationModel:
    sigma: np.ndarray = field(default_factory=default_sigma)
    mode: str = "stochastic"
    frequency: float = DEFAULT_FREQUENCY
    phase_seed: int = 0
    mass_positions: tuple = ()
    damping_radius: float = 4.0

    def __post_init__(self):
        s = np.array(self.sigma, dtype=np.float64)
        if s.shape != (4, 4) or not np.array_equal(s, s.T):
            raise ValueError("sigma must be a symmetric 4x4 array")
        if np.any(s < 0):
            raise ValueError("sigma values must be non-negative")
        if self.mode not in ("stochastic", "crypto"):
            raise ValueError(f"unknown fluctuation mode {self.mode!r}")
        if self.mode == "crypto" and not FREQ_BAND[0] <= self.frequency <= FREQ_BAND[1]:
            raise ValueError(f"frequency must lie in {FREQ_BAND} Hz")
        if not self.damping_radius > 0:
            raise ValueError("damping_radius must be positive")
        s.setflags(write=False)
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "mass_positions", tuple(self.mass_positions))

    def with_sigma(self, values):
        """Copy of the model with ``sigma`` replaced (dict or 4x4 array)."""
        s = sigma_matrix(values) if isinstance(values, dict) else values
        return FluctuationModel(s, self.mode, self.frequency, self.phase_seed,
                                self.mass_positions, self.damping_radius)


def smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def damping_at(model, xyz):
    """Amplitude factor at spatial position(s) ``xyz`` (grain units, shape (..., 3)).

    Zero on a mass, rising smoothly to one at ``damping_radius`` grains.
    """
    xyz = np.asarray(xyz, dtype=np.float64)
    if not model.mass_positions:
        return np.ones(xyz.shape[:-1])[()]
    masses = np.array([m.indices[:3] for m in model.mass_positions], dtype=np.float64)
    dist = np.linalg.norm(xyz[..., None, :] - masses, axis=-1).min(axis=-1)
    return smoothstep(dist / model.damping_radius)[()]


def damping(model, venue):
    return float(damping_at(model, venue.indices[:3]))


def _symmetric(upper):
    """(..., 10) upper-triangle values -> (..., 4, 4) symmetric arrays."""
    out = np.zeros(upper.shape[:-1] + (4, 4))
    out[..., _IU[0], _IU[1]] = upper
    out[..., _IU[1], _IU[0]] = upper
    return out


def crypto_phases(model, venue):
    words = np.arange(len(COMPONENTS))
    return 2.0 * np.pi * rng.uniform(model.phase_seed, rng.Stream.CRYPTO_PHASE,
                                     *venue.indices, words)


def crypto_delta(model, venue, phase_time):
    """Deterministic oscillation offsets at ``venue``; broadcasts over ``phase_time``."""
    t = np.asarray(phase_time, dtype=np.float64)[..., None]
    cycles = np.mod(model.frequency * t, 1.0)
    amp = model.sigma[_IU] * damping(model, venue)
    return _symmetric(amp * np.cos(2.0 * np.pi * cycles + crypto_phases(model, venue)))


def sample_metric(model, venue, phase_time=0.0, draw=None):
    """One metric sample eta + delta at ``venue``.

    ``draw`` is a numpy Generator (stochastic mode only); crypto mode is a
    pure function of its inputs and ignores it.
    """
    if model.mode == "crypto":
        delta = crypto_delta(model, venue, float(phase_time))
    else:
        if draw is None:
            raise ValueError("stochastic mode needs a random stream")
        scale = model.sigma[_IU] * damping(model, venue)
        delta = _symmetric(draw.normal(size=len(COMPONENTS)) * scale)
    return Metric4(ETA + delta)


def sample_deltas(model, draw, size, amplitude=1.0):
    """Batch of stochastic offsets, shape ``size + (4, 4)``."""
    size = (size,) if np.isscalar(size) else tuple(size)
    scale = model.sigma[_IU] * np.asarray(amplitude)[..., None]
    return _symmetric(draw.normal(size=size + (len(COMPONENTS),)) * scale)


def counter_deltas(model, seed, *words, amplitude=1.0):
    """Stochastic offsets keyed by counters; shape ``broadcast(words) + (4, 4)``.

    Component j of the sample at counters ``words`` is the normal variate at
    ``(seed, *words, j)``, so any subset can be regenerated independently.
    """
    comp = np.arange(len(COMPONENTS))
    z = rng.normal(seed, *(np.asarray(w)[..., None] for w in words), comp)
    return _symmetric(z * model.sigma[_IU] * np.asarray(amplitude)[..., None])


def region_average(model, venues, draw, phase_time=0.0):
    """Entrywise mean of one sample per venue."""
    if len(venues) < 1:
        raise ValueError("need at least one venue")
    samples = [sample_metric(model, v, phase_time, draw).entries for v in venues]
    return Metric4(np.mean(samples, axis=0))


def line_venues(m, grain=1.0):
    """``m`` consecutive venues along the x axis."""
    return [Venue(i, 0, 0, 0, grain) for i in range(m)]


def loglog_slope(x, y):
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


@dataclass(frozen=True)
class VarianceTable:
    m: tuple
    var: tuple
    slope: float


def variance_scaling_experiment(model, m_values, trials, seed, component=(2, 2)):
    """Variance of a volume-averaged metric component against region size m.

    For each m, ``trials`` independent regions of m line venues are sampled
    and the chosen component averaged over each region.  Returns the
    per-m variance and the log-log slope (about -1).
    """
    if trials < 1000:
        raise ValueError("trials must be >= 1000")
    i, j = component
    sigma = model.sigma[i, j]
    variances = []
    for idx, m in enumerate(m_values):
        if m < 1:
            raise ValueError("m must be >= 1")
        amp = damping_at(model, np.array([v.indices[:3] for v in line_venues(m)], float))
        draw = rng.generator(seed, rng.Stream.VARIANCE, idx, m)
        z = draw.normal(size=(trials, m))
        means = (z * sigma * amp).mean(axis=1)
        variances.append(float(np.var(means, ddof=1)))
    slope = loglog_slope(m_values, variances) if sigma > 0 else float("nan")
    return VarianceTable(tuple(int(m) for m in m_values), tuple(variances), slope)


@dataclass(frozen=True, eq=False)
class GridDistribution:
    """Probability weights on an evenly spaced grid ``origin + k * step``."""

    origin: float
    step: float
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if not self.step > 0:
            raise ValueError("step must be positive")
        if w.ndim != 1 or w.size == 0 or np.any(w < 0):
            raise ValueError("weights must be a non-empty non-negative vector")
        total = w.sum()
        if not total > 0:
            raise ValueError("weights must not all be zero")
        w = w / total
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def x(self):
        return self.origin + self.step * np.arange(self.weights.size)

    def moment(self, k, about=None):
        c = self.mean if about is None else about
        return float(np.dot(self.weights, (self.x - c) ** k))

    @property
    def mean(self):
        return float(np.dot(self.weights, self.x))

    @property
    def var(self):
        return self.moment(2)

    @property
    def excess_kurtosis(self):
        return self.moment(4) / self.var ** 2 - 3.0


def point_mass(x, step):
    return GridDistribution(x, step, [1.0])


def gaussian_grid(var, step, half_width=8.0, mean=0.0):
    """Discretized Gaussian covering ``half_width`` standard deviations."""
    sd = np.sqrt(var)
    k = int(np.ceil(half_width * sd / step))
    x = step * np.arange(-k, k + 1)
    return GridDistribution(mean - k * step, step, np.exp(-0.5 * x * x / var))


def uniform_grid(points, step, origin=0.0):
    return GridDistribution(origin, step, np.ones(points))


def convolve(d1, d2):
    """Distribution of the sum of independent draws from ``d1`` and ``d2``."""
    if not np.isclose(d1.step, d2.step, rtol=1e-12, atol=0.0):
        raise ValueError(f"grid steps differ: {d1.step} vs {d2.step}")
    return GridDistribution(d1.origin + d2.origin, d1.step, np.convolve(d1.weights, d2.weights))


def clt_spread(d1, n):
    """n-fold self-convolution of ``d1`` (square-and-multiply)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    result, base = None, d1
    while n:
        if n & 1:
            result = base if result is None else convolve(result, base)
        n >>= 1
        if n:
            base = convolve(base, base)
    return result
