"""Contravariant observables and the volume-scaling uncertainty product."""

from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import SingularMetricError
from .field import damping_at, line_venues, sample_deltas
from .metric import ETA, Metric4

SINGULAR_DET = 1e-9


def raise_index(g, p_cov):
    """p^j = g^{j nu} p_nu; batched over leading axes of ``g``."""
    g = g.entries if isinstance(g, Metric4) else np.asarray(g, dtype=np.float64)
    if np.any(np.abs(np.linalg.det(g)) < SINGULAR_DET):
        raise SingularMetricError("cannot raise an index through a singular metric")
    p = np.broadcast_to(np.asarray(p_cov, dtype=np.float64), g.shape[:-1])
    return np.linalg.solve(g, p[..., None])[..., 0]


@dataclass(frozen=True)
class MomentumPair:
    p_cov: np.ndarray
    p_contra: np.ndarray


def observe_momentum(g, p_cov):
    return MomentumPair(np.asarray(p_cov, dtype=np.float64), raise_index(g, p_cov))


@dataclass(frozen=True)
class UncertaintyRow:
    m: int
    dq: float
    dp: float
    product: float
    dp_std: float
    product_std: float


@dataclass(frozen=True)
class UncertaintyTable:
    rows: tuple

    @property
    def product_ratio(self):
        prods = [r.product for r in self.rows]
        return max(prods) / min(prods) if min(prods) > 0 else float("nan")

    @property
    def product_std_ratio(self):
        prods = [r.product_std for r in self.rows]
        return max(prods) / min(prods) if min(prods) > 0 else float("nan")


def averaged_inverse_column(model, m, trials, draw, column=0, batch=512):
    """Per-trial mean over m venues of the inverse-metric column g^{nu, column}."""
    amp = damping_at(model, np.array([v.indices[:3] for v in line_venues(m)], float))
    out = np.empty((trials, 4))
    e = np.zeros(4)
    e[column] = 1.0
    for start in range(0, trials, batch):
        stop = min(start + batch, trials)
        g = ETA + sample_deltas(model, draw, (stop - start, m), amplitude=amp)
        out[start:stop] = raise_index(g, e).mean(axis=1)
    return out


def uncertainty_product_experiment(model, m_values, p_cov, trials, seed, grain=1.0, column=0):
    """Delta q * Delta p for regions of m venues along one axis.

    Delta q is the one-dimensional volume m * grain.  Delta p is
    sum_nu |p_nu| * Var(volume-averaged g^{nu, column}) over trials, the
    variance reading under which the product is volume independent.  The
    standard-deviation reading (``dp_std``, ``product_std``) is reported
    alongside; it grows like sqrt(m).
    """
    if trials < 1000:
        raise ValueError("trials must be >= 1000")
    p = np.abs(np.asarray(p_cov, dtype=np.float64))
    rows = []
    for idx, m in enumerate(m_values):
        if m < 1:
            raise ValueError("m must be >= 1")
        draw = rng.generator(seed, rng.Stream.UNCERTAINTY, idx, m)
        avg = averaged_inverse_column(model, m, trials, draw, column)
        var = avg.var(axis=0, ddof=1)
        dq = m * grain
        dp = float(np.dot(p, var))
        dp_std = float(np.dot(p, np.sqrt(var)))
        rows.append(UncertaintyRow(int(m), float(dq), dp, dq * dp, dp_std, dq * dp_std))
    return UncertaintyTable(tuple(rows))
