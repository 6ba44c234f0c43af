"""Two-slit experiment driven by metric superposition.

With both slits open the screen density is the volume element of the
superposed phase metrics, each slit contributing a path-length phase
2 pi L / lambda.  Switching on the detector at slit A destroys the cross
term: the density becomes two single-slit Gaussian envelopes.  Detection
is a latch: once particles have passed the live detector, interference does
not come back for the rest of that run, even with the detector off.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize, stats

from . import rng
from .field import GridDistribution
from .metric import interference_density


@dataclass(frozen=True)
class SlitGeometry:
    """Lengths in grains.  Slits sit at x = +-d/2, the screen ``screen_distance`` behind."""

    slit_separation: float = 20.0
    screen_distance: float = 1000.0
    x_min: float = -40.0
    x_max: float = 40.0
    bins: int = 640
    wavelength: float = 0.05
    detector_a_on: bool = False
    envelope_width: float = None  # defaults to d / 4

    def __post_init__(self):
        if not (self.slit_separation > 0 and self.screen_distance > 0 and self.wavelength > 0):
            raise ValueError("slit separation, screen distance and wavelength must be positive")
        if self.bins < 16:
            raise ValueError("need at least 16 bins")
        if not self.x_max > self.x_min:
            raise ValueError("empty screen window")
        if self.envelope_width is None:
            object.__setattr__(self, "envelope_width", self.slit_separation / 4.0)
        if not self.envelope_width > 0:
            raise ValueError("envelope width must be positive")

    @property
    def bin_width(self):
        return (self.x_max - self.x_min) / self.bins

    @property
    def bin_centers(self):
        return self.x_min + self.bin_width * (np.arange(self.bins) + 0.5)


def path_lengths(geom, x):
    """Distances from slit A (x = +d/2) and slit B (x = -d/2) to screen point x."""
    x = np.asarray(x, dtype=np.float64)
    half = 0.5 * geom.slit_separation
    la = np.hypot(geom.screen_distance, x - half)
    lb = np.hypot(geom.screen_distance, x + half)
    return la, lb


def path_difference(geom, x):
    la, lb = path_lengths(geom, x)
    return lb - la


def slit_envelopes(geom, x):
    """Single-slit Gaussian beams centred on each slit's projection (A, B)."""
    x = np.asarray(x, dtype=np.float64)
    half, w = 0.5 * geom.slit_separation, geom.envelope_width
    return np.exp(-0.5 * ((x - half) / w) ** 2), np.exp(-0.5 * ((x + half) / w) ** 2)


def density_at(geom, x):
    """Unnormalized screen density at x for the geometry's detector state."""
    if geom.detector_a_on:
        ea, eb = slit_envelopes(geom, x)
        return ea + eb
    la, lb = path_lengths(geom, x)
    k = 2.0 * np.pi / geom.wavelength
    return interference_density(k * la, k * lb)


def two_slit_density(geom):
    """Binned screen density (bin centres) as a normalized grid distribution."""
    return GridDistribution(geom.bin_centers[0], geom.bin_width, density_at(geom, geom.bin_centers))


def first_null(geom):
    """Screen position x > 0 where the path difference equals lambda / 2."""
    target = 0.5 * geom.wavelength
    f = lambda x: abs(path_difference(geom, x)) - target
    hi = geom.wavelength
    while f(hi) < 0:
        hi *= 2.0
    return optimize.brentq(f, 0.0, hi, xtol=1e-14, rtol=1e-15)


def fringe_visibility(geom, counts):
    """Contrast of the fringe component in a histogram.

    Projects the counts onto exp(i psi) with psi = 2 pi dL(x) / lambda, the
    fringe phase; for I = I0 (1 + V cos psi) this returns V, i.e.
    (max - min) / (max + min) of the fringes, and is insensitive to a
    smooth envelope.
    """
    counts = np.asarray(counts, dtype=np.float64)
    psi = 2.0 * np.pi * path_difference(geom, geom.bin_centers) / geom.wavelength
    return float(2.0 * np.abs(np.sum(counts * np.exp(1j * psi))) / counts.sum())


def chi_square(counts, probs, min_expected=5.0):
    """Pearson chi-square; bins expecting fewer than ``min_expected`` are pooled."""
    counts = np.asarray(counts, dtype=np.float64)
    expected = counts.sum() * np.asarray(probs, dtype=np.float64)
    keep = expected >= min_expected
    obs, exp = list(counts[keep]), list(expected[keep])
    if np.any(~keep):
        obs.append(counts[~keep].sum())
        exp.append(expected[~keep].sum())
    stat, p = stats.chisquare(obs, exp)
    return float(stat), float(p), len(obs) - 1


@dataclass(frozen=True)
class TwoSlitResult:
    geometry: SlitGeometry
    counts: np.ndarray
    expected: np.ndarray
    slit_a: int
    chi2: float
    p_value: float
    dof: int
    visibility: float


class SlitRun:
    """One run of the apparatus; the detector latch lives here.

    While the detector at slit A is on, or once any particle has been fired
    past the live detector in this run, the screen sees the envelope-only
    density.  Only a fresh run restores the fringes.
    """

    def __init__(self, geom, seed):
        self.geom = geom
        self.seed = seed
        self.detector_on = geom.detector_a_on
        self.latched = False
        self.fired = 0
        self.counts = np.zeros(geom.bins, dtype=np.int64)
        self.slit_a = 0

    def set_detector(self, on):
        self.detector_on = bool(on)

    @property
    def interfering(self):
        return not (self.detector_on or self.latched)

    def current_geometry(self):
        return replace(self.geom, detector_a_on=not self.interfering)

    def fire(self, n):
        """Send ``n`` particles one by one (vectorized) and histogram them."""
        geom = self.current_geometry()
        probs = two_slit_density(geom).weights
        cdf = np.cumsum(probs)
        cdf[-1] = 1.0
        ids = self.fired + np.arange(n)
        u = rng.uniform(self.seed, rng.Stream.SLIT, ids[:, None], np.arange(2))
        bins = np.searchsorted(cdf, u[:, 0], side="right")
        ea, eb = slit_envelopes(geom, geom.bin_centers[bins])
        through_a = u[:, 1] < ea / (ea + eb)
        self.counts += np.bincount(bins, minlength=geom.bins)
        self.slit_a += int(through_a.sum())
        if self.detector_on and n > 0:
            self.latched = True
        self.fired += n
        return probs


def two_slit_experiment(geom, n, seed):
    """Sample ``n`` screen hits and compare them with the binned density."""
    if n < 10_000:
        raise ValueError("n must be >= 1e4")
    run = SlitRun(geom, seed)
    probs = run.fire(n)
    chi2, p, dof = chi_square(run.counts, probs)
    return TwoSlitResult(geom, run.counts.copy(), n * probs, run.slit_a, chi2, p, dof,
                         fringe_visibility(geom, run.counts))
