"""Exact (noise-free) metric algebra.

Index convention: arrays are 0-based with coordinates ordered (x, y, z, t),
signature (+, +, +, -).  Component "(3, 3)" in 1-based physics notation is
``[2, 2]`` here and the time slot is ``[3, 3]``.

Functions accept a :class:`Metric4` or a raw ``(..., 4, 4)`` array, so the
same code path evaluates one metric or a batch of them.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidGeometryError, NonLorentzianError

TOL = 1e-12

REAL = "real"
COMPLEX = "complex"


@dataclass(frozen=True, eq=False)
class Metric4:
    """Symmetric 4x4 metric at one venue.

    ``mode`` is ``"real"`` for physical metrics and ``"complex"`` for the
    diagnostic phase metrics.
    """

    entries: np.ndarray
    mode: str = REAL

    def __post_init__(self):
        if self.mode not in (REAL, COMPLEX):
            raise ValueError(f"unknown metric mode {self.mode!r}")
        dtype = np.complex128 if self.mode == COMPLEX else None
        a = np.array(self.entries, dtype=dtype)
        if a.shape != (4, 4):
            raise ValueError(f"metric must be 4x4, got {a.shape}")
        if self.mode == REAL:
            if np.iscomplexobj(a):
                if np.max(np.abs(a.imag)) > TOL:
                    raise ValueError("real-mode metric has imaginary entries")
                a = a.real
            a = a.astype(np.float64)
        if not np.allclose(a, a.T, rtol=0.0, atol=TOL):
            raise ValueError("metric must be symmetric")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, Metric4):
            return NotImplemented
        return self.mode == other.mode and np.array_equal(self.entries, other.entries)

    __hash__ = None


def _entries(g):
    return g.entries if isinstance(g, Metric4) else np.asarray(g)


def minkowski():
    return Metric4(np.diag([1.0, 1.0, 1.0, -1.0]))


ETA = np.diag([1.0, 1.0, 1.0, -1.0])
ETA.setflags(write=False)


def determinant(g):
    """Exact 4x4 determinant, batched over leading axes.

    Laplace expansion along the top two rows by complementary 2x2 minors.
    No pivoting or division happens, so for sparse inputs such as the
    diagonal phase metrics every zero term stays exactly zero.
    """
    a = _entries(g)
    if a.shape[-2:] != (4, 4):
        raise ValueError("expected (..., 4, 4) input")
    e = np.moveaxis(a.reshape(a.shape[:-2] + (16,)), -1, 0).copy()
    (a00, a01, a02, a03, a10, a11, a12, a13,
     a20, a21, a22, a23, a30, a31, a32, a33) = e
    s0 = a00 * a11 - a10 * a01
    s1 = a00 * a12 - a10 * a02
    s2 = a00 * a13 - a10 * a03
    s3 = a01 * a12 - a11 * a02
    s4 = a01 * a13 - a11 * a03
    s5 = a02 * a13 - a12 * a03
    c5 = a22 * a33 - a32 * a23
    c4 = a21 * a33 - a31 * a23
    c3 = a21 * a32 - a31 * a22
    c2 = a20 * a33 - a30 * a23
    c1 = a20 * a32 - a30 * a22
    c0 = a20 * a31 - a30 * a21
    det = s0 * c5 - s1 * c4 + s2 * c3 + s3 * c2 - s4 * c1 + s5 * c0
    return det[()] if det.ndim == 0 else det


def volume_element(g):
    """sqrt(-det g).  Determinants within TOL above zero are clamped to 0."""
    det = np.asarray(determinant(g))
    if np.iscomplexobj(det):
        if np.any(np.abs(det.imag) > TOL):
            raise NonLorentzianError("determinant has a non-zero imaginary part")
        det = det.real
    if np.any(det > TOL):
        raise NonLorentzianError("metric determinant is positive (not Lorentzian)")
    out = np.sqrt(np.clip(-det, 0.0, None))
    return float(out) if out.ndim == 0 else out


def superpose(g1, g2):
    """Metric due to both physical situations: the entrywise mean."""
    if isinstance(g1, Metric4) and isinstance(g2, Metric4):
        if g1.mode != g2.mode:
            raise ValueError("cannot superpose metrics of different modes")
        return Metric4(0.5 * (g1.entries + g2.entries), g1.mode)
    return 0.5 * (_entries(g1) + _entries(g2))


@dataclass(frozen=True)
class PhaseMetric:
    """diag(1, 1, e^{i alpha}, -e^{-i alpha}); its determinant is exactly -1."""

    alpha: float

    def expand(self):
        return Metric4(phase_metric_array(self.alpha), COMPLEX)


def phase_metric_array(alpha):
    """Batched phase metrics, shape ``alpha.shape + (4, 4)``."""
    alpha = np.asarray(alpha, dtype=np.float64)
    g = np.zeros(alpha.shape + (4, 4), dtype=np.complex128)
    g[..., 0, 0] = 1.0
    g[..., 1, 1] = 1.0
    g[..., 2, 2] = np.exp(1j * alpha)
    g[..., 3, 3] = -np.exp(-1j * alpha)
    return g


_S = 1.0 / np.sqrt(2.0)
W_TRANSFORM = np.array(
    [
        [1, 0, 0, 0],
        [0, 1, 0, 0],
        [0, 0, -1j * _S, _S],
        [0, 0, _S, -1j * _S],
    ],
    dtype=np.complex128,
)
W_TRANSFORM.setflags(write=False)


def transform(g, w=W_TRANSFORM):
    """Quadratic-form change of coordinates G -> W^t G W (plain transpose)."""
    return np.swapaxes(w, -1, -2) @ _entries(g) @ w


def interference_density(alpha, beta):
    """sqrt(-det(1/2 (G1(alpha) + G2(beta)))) by literal determinant evaluation.

    Broadcasts over array inputs.  Equals |cos((alpha - beta) / 2)|.
    """
    g3 = superpose(phase_metric_array(alpha), phase_metric_array(beta))
    return volume_element(g3)


def rotoreflect(alpha):
    """Real form of the transformed phase metric.

    Upper-left block is the identity, lower-right block is
    [[-cos a, sin a], [sin a, cos a]].
    """
    g = transform(phase_metric_array(alpha))
    residue = np.max(np.abs(g.imag))
    if residue > TOL:
        raise ArithmeticError(f"transformed phase metric not real (residue {residue:.3g})")
    return Metric4(g.real)


@dataclass(frozen=True)
class DivergenceReport:
    """Partial sums of a non-integrable distance integral under grid refinement."""

    singularity: float
    cells: tuple
    partial_sums: tuple
    threshold: float

    @property
    def diverged(self):
        sums = self.partial_sums
        monotone = all(b > a for a, b in zip(sums, sums[1:]))
        return monotone and sums[-1] > self.threshold


def _covariant_radius(r, gm):
    return r / (1.0 - 2.0 * gm / r)


def _variation_before(gm, cells, chunk=1 << 20):
    """Sum |d(r/(1-2gm/r))| on ``cells`` equal cells of [0, 2gm), last node excluded.

    The grid stops one cell short of the singularity, so each refinement
    moves the last node strictly closer to r = 2gm.
    """
    h = 2.0 * gm / cells
    total = 0.0
    prev = 0.0  # covariant radius is 0 at r = 0
    for start in range(1, cells, chunk):
        idx = np.arange(start, min(start + chunk, cells), dtype=np.float64)
        vals = _covariant_radius(idx * h, gm)
        total += float(np.sum(np.abs(np.diff(np.concatenate(([prev], vals))))))
        prev = float(vals[-1])
    return total


def schwarzschild_distances(r_bar, gm, threshold=1e6, base_cells=64, refine=4, max_levels=12):
    """Contravariant and covariant radial distance to a Schwarzschild object.

    The contravariant distance is the coordinate integral, r_bar itself.
    The covariant distance integrates d(r / (1 - 2gm/r)) from 0; for gm > 0
    this crosses a non-integrable singularity at r = 2gm, and a
    :class:`DivergenceReport` of the partial sums up to the singularity on
    a refining grid is returned in place of a number.  Refinement stops once a partial sum exceeds
    ``threshold`` or after ``max_levels`` levels.
    """
    if r_bar <= 0 or gm < 0:
        raise InvalidGeometryError("need r_bar > 0 and gm >= 0")
    if r_bar <= 2.0 * gm:
        raise InvalidGeometryError(f"r_bar={r_bar} lies inside the horizon 2gm={2.0 * gm}")
    contravariant = float(r_bar)
    if gm == 0:
        return contravariant, float(r_bar)
    cells, sums, n = [], [], base_cells
    for _ in range(max_levels):
        cells.append(n)
        sums.append(_variation_before(gm, n))
        if sums[-1] > threshold:
            break
        n *= refine
    report = DivergenceReport(2.0 * gm, tuple(cells), tuple(sums), threshold)
    return contravariant, report


@dataclass(frozen=True)
class MeasurementReport:
    t_emit: float
    t1: float
    t2: float
    x1: float
    x2: float

    @property
    def dt(self):
        return self.t2 - self.t1

    @property
    def dx(self):
        return self.x2 - self.x1


def _intersect(p, d, q, e):
    """Intersection of lines p + s d and q + r e in the (x, t) plane."""
    a = np.array([[d[0], -e[0]], [d[1], -e[1]]], dtype=np.float64)
    s, _ = np.linalg.solve(a, np.asarray(q, float) - np.asarray(p, float))
    return np.asarray(p, float) + s * np.asarray(d, float)


def idealized_measurement(v, x_front, x_back, t0):
    """Length of a moving object read off by light signals (c = 1).

    The object's ends sit at ``x_front`` and ``x_back`` at t = 0 and move
    with velocity ``v``.  At ``t0`` each end emits a photon toward the
    observer on the t axis; the photons arrive at t(1) (nearer end) and
    t(2) (farther end).  ``x1`` and ``x2`` are the contravariant coordinates
    of the emission events, measured as distance from the t axis.  The
    report asserts t(2) - t(1) == x2 - x1.
    """
    if not abs(v) < 1:
        raise ValueError("need |v| < 1")
    if x_front == x_back:
        raise ValueError("object ends must differ")
    events = [(x + v * t0, t0) for x in (x_front, x_back)]
    side = np.sign([e[0] for e in events])
    if side[0] == 0 or side[0] != side[1]:
        raise ValueError("both ends must lie on the same side of the observer")
    axis_point, axis_dir = (0.0, 0.0), (0.0, 1.0)
    photon_dir = (-side[0], 1.0)
    arrivals = [_intersect(e, photon_dir, axis_point, axis_dir)[1] for e in events]
    coords = [abs(e[0]) for e in events]
    near, far = sorted(range(2), key=lambda i: coords[i])
    report = MeasurementReport(float(t0), float(arrivals[near]), float(arrivals[far]),
                               float(coords[near]), float(coords[far]))
    if abs(report.dt - report.dx) > TOL * max(1.0, abs(report.dx)):
        raise ArithmeticError("light-signal length disagrees with coordinate difference")
    return report
