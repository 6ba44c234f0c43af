"""Test-particle propagation through a fluctuating metric.

A *field* is any callable ``field(x, step) -> metric`` mapping positions of
shape ``(..., 4)`` to metrics of shape ``(..., 4, 4)``.  ``step`` is the
integration step index; stochastic fields are frozen within a step and
redrawn between steps, so every Christoffel stencil sees one coherent,
differentiable metric.
"""

from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import rng
from .errors import DivergenceError, SingularMetricError
from .field import COMPONENTS, _symmetric, damping_at
from .metric import ETA, determinant
from .parallel import map_ranges
from .uncertainty import raise_index

SINGULAR_DET = 1e-9
MAX_COORD = 1e6
DEFAULT_SPACING = 0.5
DEFAULT_DS = 0.1


@dataclass(frozen=True, eq=False)
class ParticleState:
    """Coordinates ``x`` and derivatives ``u = dx/ds``; may be batched (n, 4)."""

    x: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        u = np.asarray(self.u, dtype=np.float64)
        if x.shape != u.shape or x.shape[-1] != 4:
            raise ValueError("x and u must share a (..., 4) shape")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
            raise ValueError("state entries must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u", u)


@dataclass(frozen=True, eq=False)
class ChristoffelSet:
    """gamma[..., i, j, k] = Gamma^i_{jk}, symmetric in j, k."""

    gamma: np.ndarray


def minkowski_field(x, step=0):
    return np.broadcast_to(ETA, np.shape(x)[:-1] + (4, 4))


def _check_invertible(g):
    if np.any(np.abs(determinant(g)) < SINGULAR_DET):
        raise SingularMetricError("metric is singular at a stencil point")


def _stencil(spacing):
    offs = np.zeros((9, 4))
    for l in range(4):
        offs[1 + l, l] = spacing
        offs[5 + l, l] = -spacing
    return offs


def christoffel(field, x, step=0, spacing=DEFAULT_SPACING):
    """Second-kind Christoffel symbols by central differences of ``field``.

    The field is evaluated once on the stacked 9-point stencil; ``field``
    must therefore accept positions with extra leading axes.
    """
    x = np.asarray(x, dtype=np.float64)
    offs = _stencil(spacing).reshape((9,) + (1,) * (x.ndim - 1) + (4,))
    g = np.asarray(field(x + offs, step), dtype=np.float64)
    _check_invertible(g)
    # dg[..., l, a, b] = d_l g_ab
    dg = np.moveaxis((g[1:5] - g[5:9]) / (2.0 * spacing), 0, -3)
    # lower[l, j, k] = d_j g_lk + d_k g_lj - d_l g_jk
    lower = np.swapaxes(dg, -3, -2) + np.moveaxis(dg, -3, -1) - dg
    shape = lower.shape
    gamma = 0.5 * (np.linalg.inv(g[0]) @ lower.reshape(shape[:-3] + (4, 16))).reshape(shape)
    return ChristoffelSet(gamma)


def _acceleration(field, x, u, step, spacing):
    gamma = christoffel(field, x, step, spacing).gamma
    gu = (gamma.reshape(gamma.shape[:-3] + (16, 4)) @ u[..., None]).reshape(gamma.shape[:-1])
    return -(gu @ u[..., None])[..., 0]


def rk4_step(field, x, u, step, ds, spacing=DEFAULT_SPACING):
    """One classic RK4 step of x'' = -Gamma(x) x' x'."""
    k1x, k1u = u, _acceleration(field, x, u, step, spacing)
    k2x = u + 0.5 * ds * k1u
    k2u = _acceleration(field, x + 0.5 * ds * k1x, k2x, step, spacing)
    k3x = u + 0.5 * ds * k2u
    k3u = _acceleration(field, x + 0.5 * ds * k2x, k3x, step, spacing)
    k4x = u + ds * k3u
    k4u = _acceleration(field, x + ds * k3x, k4x, step, spacing)
    x_new = x + ds / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    u_new = u + ds / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
    if not np.all(np.isfinite(x_new)) or np.any(np.abs(x_new) > MAX_COORD):
        raise DivergenceError(f"geodesic left the {MAX_COORD:g}-grain box at step {step}")
    return x_new, u_new


def integrate_geodesic(field, state0, steps, ds=DEFAULT_DS, spacing=DEFAULT_SPACING):
    """Integrate the geodesic equation; returns ``steps + 1`` states including the start."""
    if steps < 1 or not ds > 0:
        raise ValueError("need steps >= 1 and ds > 0")
    x, u = state0.x, state0.u
    path = [state0]
    for k in range(steps):
        x, u = rk4_step(field, x, u, k, ds, spacing)
        path.append(ParticleState(x, u))
    return path


class PatchField:
    """Frozen per-step fluctuating field around a batch of particles.

    Around each particle's step-start position c the metric is the local
    Taylor patch  eta + d(x) * (delta + sum_l (x_l - c_l) * G_l)  with
    delta ~ N(0, sigma) and spatial gradients G_l ~ N(0, sigma / corr_len),
    all drawn from counters (seed, particle, step, ...).  d is the mass
    damping profile, so the field vanishes on masses and its gradient
    produces genuine Christoffel terms nearby.
    """

    def __init__(self, model, seed, particles, step, centers, corr_len=1.0):
        self.model = model
        self.centers = np.asarray(centers, dtype=np.float64)
        self.step = step
        n = len(COMPONENTS)
        sig = model.sigma[tuple(np.array(COMPONENTS).T)]
        ids = np.asarray(particles)[:, None]
        z = rng.normal(seed, rng.Stream.SPREAD, ids, step, np.arange(4 * n)[None, :])
        z = z.reshape(-1, 4, n) * sig
        self.delta = _symmetric(z[:, 0])
        self.grad = _symmetric(z[:, 1:] / corr_len)  # (p, 3, 4, 4)

    def __call__(self, x, step=None):
        if step is not None and step != self.step:
            raise ValueError("patch field is frozen to its own step")
        x = np.asarray(x)
        offset = x[..., :3] - self.centers[..., :3]
        n = self.grad.shape[0]
        slope = (offset[..., None, :] @ self.grad.reshape(n, 3, 16)).reshape(offset.shape[:-1] + (4, 4))
        pert = self.delta + slope
        if self.model.mass_positions:
            pert = damping_at(self.model, x[..., :3])[..., None, None] * pert
        return ETA + pert


@dataclass(frozen=True)
class SpreadReport:
    steps: tuple
    variance: tuple
    slope: float
    intercept: float
    r2: float
    kurtosis: float
    hist_counts: tuple
    hist_edges: tuple


def propagate_particles(model, seed, start, stop, steps, ds, p_cov, x0=None,
                        spacing=DEFAULT_SPACING, corr_len=1.0):
    """Tracks of particles ``start..stop-1``; returns x of shape (steps+1, n, 4).

    Each particle carries a fixed covariant momentum ``p_cov``.  At every
    step its coordinate velocity is the contravariant u = g^{-1} p in the
    freshly drawn metric, and the geodesic equation is integrated over the
    step with that field frozen.
    """
    ids = np.arange(start, stop)
    x = np.zeros((ids.size, 4)) if x0 is None else np.array(np.broadcast_to(x0, (ids.size, 4)))
    track = np.empty((steps + 1, ids.size, 4))
    track[0] = x
    for k in range(steps):
        field = PatchField(model, seed, ids, k, x, corr_len)
        u = raise_index(field(x, k), p_cov)
        x, _ = rk4_step(field, x, u, k, ds, spacing)
        track[k + 1] = x
    return track


def free_particle_ensemble(model, n_particles, steps, ds, seed, p_cov=(0.0, 0.0, 0.1, -1.0),
                           axis=2, bins=50, spacing=DEFAULT_SPACING, corr_len=1.0, chunk=1024):
    """Cross-particle variance of one coordinate against step count.

    Returns the per-step variance table, a least-squares line through it
    (slope, intercept, R^2) and the final-position histogram with its
    excess kurtosis.
    """
    if n_particles < 1000:
        raise ValueError("n_particles must be >= 1000")
    if steps < 1 or not ds > 0:
        raise ValueError("need steps >= 1 and ds > 0")

    def run(a, b):
        return propagate_particles(model, seed, a, b, steps, ds, p_cov,
                                   spacing=spacing, corr_len=corr_len)[..., axis]

    coord = np.concatenate(map_ranges(run, n_particles, chunk), axis=1)
    # shifting by one particle keeps identical tracks at exactly zero variance
    variance = (coord - coord[:, :1]).var(axis=1, ddof=1)
    k = np.arange(steps + 1)
    if np.all(variance == 0):
        slope = intercept = 0.0
        r2 = float("nan")
        kurt = float("nan")
    else:
        fit = stats.linregress(k, variance)
        slope, intercept, r2 = fit.slope, fit.intercept, fit.rvalue ** 2
        kurt = stats.kurtosis(coord[-1], fisher=True, bias=False)
    counts, edges = np.histogram(coord[-1], bins=bins)
    return SpreadReport(tuple(int(s) for s in k), tuple(float(v) for v in variance),
                        float(slope), float(intercept), float(r2), float(kurt),
                        tuple(int(c) for c in counts), tuple(float(e) for e in edges))
