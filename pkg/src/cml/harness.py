"""Experiment specs, dispatch and result files.

A spec is the JSON object ``{"experiment", "seed", "params", "output_dir"}``.
Parameters are validated and normalized before anything is computed, and
identical specs always produce byte-identical files.
"""

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .entangle import chsh_experiment
from .errors import ConfigError, InvalidGeometryError
from .field import FluctuationModel, default_sigma, sigma_matrix, variance_scaling_experiment
from .geodesic import free_particle_ensemble
from .metric import idealized_measurement, interference_density, schwarzschild_distances
from .oscillator import malus_experiment, parse_source, polarizer_chain
from .slit import SlitGeometry, two_slit_experiment
from .uncertainty import uncertainty_product_experiment

SEED_MAX = 2 ** 64 - 1
POWERS_OF_TWO = [2 ** k for k in range(9)]
_ANGLE_RE = re.compile(r"^[0-9eE.+\-*/() pi]+$")


# -- parameter coercion --

def _angle(v):
    """Number or a small arithmetic expression in ``pi`` such as ``"3*pi/8"``."""
    if isinstance(v, bool):
        raise ValueError("boolean is not an angle")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str) and _ANGLE_RE.match(v):
        try:
            out = eval(v, {"__builtins__": {}}, {"pi": math.pi})  # noqa: S307 - charset-restricted
        except Exception as exc:
            raise ValueError(f"bad angle expression {v!r}") from exc
        return float(out)
    raise ValueError(f"not an angle: {v!r}")


def _float(v):
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise ValueError(f"not a number: {v!r}")
    return _angle(v) if isinstance(v, str) else float(v)


def _int(v):
    if isinstance(v, bool):
        raise ValueError("boolean is not an integer")
    if isinstance(v, float) and v.is_integer():
        return int(v)
    if isinstance(v, int):
        return v
    raise ValueError(f"not an integer: {v!r}")


def _bool(v):
    if isinstance(v, bool):
        return v
    raise ValueError(f"not a boolean: {v!r}")


def _str(v):
    if isinstance(v, str):
        return v
    raise ValueError(f"not a string: {v!r}")


def _list_of(conv, length=None):
    def parse(v):
        if not isinstance(v, (list, tuple)) or not v:
            raise ValueError("expected a non-empty list")
        if length is not None and len(v) != length:
            raise ValueError(f"expected {length} entries")
        return [conv(x) for x in v]
    return parse


def _sigma(v):
    """Spatial-diagonal scalar, 4x4 nested list, or ``{"i,j": value}``; returned as 4x4 list."""
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        s = default_sigma() / default_sigma()[0, 0] * float(v)
    elif isinstance(v, dict):
        vals = {}
        for key, x in v.items():
            i, j = (int(t) for t in str(key).split(","))
            if not (0 <= i < 4 and 0 <= j < 4):
                raise ValueError(f"component {key} out of range")
            vals[(i, j)] = _float(x)
        s = sigma_matrix(vals)
    else:
        s = np.array(_list_of(_list_of(_float, 4), 4)(v))
    if not np.array_equal(s, s.T) or np.any(s < 0):
        raise ValueError("sigma must be symmetric and non-negative")
    return s.tolist()


def _positive(x):
    return x > 0


def _at_least(n):
    return lambda x: x >= n


@dataclass(frozen=True)
class Param:
    conv: object
    default: object
    check: object = None
    doc: str = ""


@dataclass(frozen=True)
class Experiment:
    name: str
    run: object
    params: dict
    stochastic: bool = True


# -- experiment runners: params dict -> (summary, tables) --

def _model(p):
    return FluctuationModel(np.array(p["sigma"]))


def _interference_grid(p, seed):
    alpha = np.linspace(0.0, 2.0 * np.pi, p["n_alpha"], endpoint=False)
    beta = np.linspace(0.0, 2.0 * np.pi, p["n_beta"], endpoint=False)
    aa, bb = np.meshgrid(alpha, beta, indexing="ij")
    density = interference_density(aa, bb)
    closed = np.abs(np.cos(0.5 * (aa - bb)))
    err = np.abs(density - closed)
    rows = zip(aa.ravel(), bb.ravel(), density.ravel(), closed.ravel(), err.ravel())
    summary = {"points": int(err.size), "max_abs_err": float(err.max())}
    return summary, {"interference_grid": (("alpha", "beta", "density", "closed_form", "abs_err"), rows)}


def _variance_scaling(p, seed):
    model = _model(p)
    table = variance_scaling_experiment(model, p["m_values"], p["trials"], seed, tuple(p["component"]))
    summary = {"slope": table.slope, "var_m1": table.var[0]}
    return summary, {"variance": (("m", "var"), zip(table.m, table.var))}


def _spread(p, seed):
    rep = free_particle_ensemble(_model(p), p["n_particles"], p["steps"], p["ds"], seed,
                                 p_cov=p["p_cov"], spacing=p["spacing"], corr_len=p["corr_len"],
                                 bins=p["bins"])
    summary = {"slope": rep.slope, "slope_per_ds": rep.slope / p["ds"], "intercept": rep.intercept,
               "r2": rep.r2, "kurtosis": rep.kurtosis, "final_variance": rep.variance[-1]}
    hist = zip(rep.hist_edges[:-1], rep.hist_edges[1:], rep.hist_counts)
    return summary, {"spread": (("step", "variance"), zip(rep.steps, rep.variance)),
                     "spread_hist": (("bin_left", "bin_right", "count"), hist)}


def _uncertainty(p, seed):
    table = uncertainty_product_experiment(_model(p), p["m_values"], p["p_cov"], p["trials"], seed,
                                           grain=p["grain"], column=p["column"])
    summary = {"product_ratio": table.product_ratio, "product_std_ratio": table.product_std_ratio}
    rows = ((r.m, r.dq, r.dp, r.product, r.dp_std, r.product_std) for r in table.rows)
    return summary, {"uncertainty": (("m", "dq", "dp", "product", "dp_std", "product_std"), rows)}


def _malus(p, seed):
    rows = malus_experiment(p["deltas"], p["n"], seed, tz_gate=p["tz_gate"])
    z = [abs(r.fraction - r.expected) / r.stderr if r.stderr > 0 else
         (0.0 if r.fraction == r.expected else math.inf) for r in rows]
    summary = {"max_z": max(z), "within_4_stderr": all(v <= 4.0 for v in z)}
    table = ((r.delta, r.n, r.passed, r.fraction, r.expected) for r in rows)
    return summary, {"malus": (("delta_rad", "n", "passed", "fraction", "expected"), table)}


def _chain(p, seed):
    res = polarizer_chain(p["axes"], p["source"], p["n"], seed, tz_gate=p["tz_gate"])
    first = res.survivors[0]
    rows = ((i, a, c, c / res.n, c / first if first else 0.0)
            for i, (a, c) in enumerate(zip(res.axes, res.survivors)))
    summary = {"final_count": res.survivors[-1], "final_fraction": res.final_fraction,
               "fraction_of_first": res.fraction_of_first, "first_fraction": first / res.n}
    return summary, {"chain": (("stage", "axis", "survivors", "fraction", "fraction_of_first"), rows)}


def _chsh(p, seed):
    res = chsh_experiment(p["a"], p["a_prime"], p["b"], p["b_prime"], p["n"], seed,
                          classical=p["classical"], lock_mode=p["lock_mode"])
    summary = {"S": res.S, **{f"E_{k}": v for k, v in res.E.items()}}
    return summary, {"chsh": (("pair", "E"), res.E.items())}


def _geometry(p):
    keys = ("slit_separation", "screen_distance", "x_min", "x_max", "bins", "wavelength",
            "detector_a_on", "envelope_width")
    return SlitGeometry(**{k: p[k] for k in keys})


def _twoslit(p, seed):
    res = two_slit_experiment(_geometry(p), p["n"], seed)
    summary = {"chi2": res.chi2, "dof": res.dof, "p_value": res.p_value,
               "visibility": res.visibility, "slit_a": res.slit_a, "n": p["n"]}
    rows = zip(res.geometry.bin_centers, res.counts, res.expected)
    return summary, {"twoslit": (("bin_center", "count", "expected"), rows)}


def _schwarzschild(p, seed):
    contra, cov = schwarzschild_distances(p["r_bar"], p["gm"], threshold=p["threshold"])
    if isinstance(cov, float):
        summary = {"contravariant": contra, "covariant": cov, "diverged": False}
        return summary, {}
    summary = {"contravariant": contra, "covariant": "divergent", "diverged": cov.diverged,
               "singularity": cov.singularity, "max_partial_sum": cov.partial_sums[-1]}
    return summary, {"schwarzschild": (("cells", "partial_sum"), zip(cov.cells, cov.partial_sums))}


def _measurement(p, seed):
    r = idealized_measurement(p["v"], p["x_front"], p["x_back"], p["t0"])
    summary = {"t0": r.t_emit, "t1": r.t1, "t2": r.t2, "x1": r.x1, "x2": r.x2,
               "dt": r.dt, "dx": r.dx, "abs_diff": abs(r.dt - r.dx)}
    rows = [("near", r.t_emit, r.x1, r.t1), ("far", r.t_emit, r.x2, r.t2)]
    return summary, {"measurement": (("end", "t_emit", "x", "t_arrive"), rows)}


_MODEL_PARAMS = {"sigma": Param(_sigma, default_sigma().tolist(), doc="metric noise per component")}
_SLIT = SlitGeometry()

EXPERIMENTS = {e.name: e for e in [
    Experiment("interference-grid", _interference_grid, {
        "n_alpha": Param(_int, 100, _positive),
        "n_beta": Param(_int, 100, _positive),
    }, stochastic=False),
    Experiment("variance-scaling", _variance_scaling, {
        **_MODEL_PARAMS,
        "m_values": Param(_list_of(_int), POWERS_OF_TWO, lambda v: all(m >= 1 for m in v)),
        "trials": Param(_int, 4000, _at_least(1000)),
        "component": Param(_list_of(_int, 2), [2, 2], lambda v: all(0 <= i < 4 for i in v)),
    }),
    Experiment("spread", _spread, {
        **_MODEL_PARAMS,
        "n_particles": Param(_int, 10_000, _at_least(1000)),
        "steps": Param(_int, 200, _at_least(1)),
        "ds": Param(_float, 0.1, _positive),
        "p_cov": Param(_list_of(_float, 4), [0.0, 0.0, 0.1, -1.0]),
        "spacing": Param(_float, 0.5, _positive),
        "corr_len": Param(_float, 1.0, _positive),
        "bins": Param(_int, 50, _at_least(1)),
    }),
    Experiment("uncertainty", _uncertainty, {
        **_MODEL_PARAMS,
        "m_values": Param(_list_of(_int), POWERS_OF_TWO, lambda v: all(m >= 1 for m in v)),
        "trials": Param(_int, 4000, _at_least(1000)),
        "p_cov": Param(_list_of(_float, 4), [1.0, 0.0, 0.0, -1.0]),
        "grain": Param(_float, 1.0, _positive),
        "column": Param(_int, 0, lambda c: 0 <= c < 4),
    }),
    Experiment("malus", _malus, {
        "deltas": Param(_list_of(_angle), [0.0, math.pi / 6, math.pi / 4, math.pi / 3, math.pi / 2]),
        "n": Param(_int, 1_000_000, _at_least(10_000)),
        "tz_gate": Param(_bool, True),
    }),
    Experiment("chain", _chain, {
        "axes": Param(_list_of(_angle), [0.0, math.pi / 4, math.pi / 2]),
        "source": Param(_str, "fixed:0"),
        "n": Param(_int, 1_000_000, _at_least(10_000)),
        "tz_gate": Param(_bool, True),
    }),
    Experiment("chsh", _chsh, {
        "a": Param(_angle, 0.0),
        "a_prime": Param(_angle, math.pi / 4),
        "b": Param(_angle, math.pi / 8),
        "b_prime": Param(_angle, 3 * math.pi / 8),
        "n": Param(_int, 1_000_000, _at_least(100_000)),
        "classical": Param(_bool, False),
        "lock_mode": Param(_str, "in-phase", lambda m: m in ("in-phase", "pi-offset")),
    }),
    Experiment("twoslit", _twoslit, {
        "slit_separation": Param(_float, _SLIT.slit_separation, _positive),
        "screen_distance": Param(_float, _SLIT.screen_distance, _positive),
        "x_min": Param(_float, _SLIT.x_min),
        "x_max": Param(_float, _SLIT.x_max),
        "bins": Param(_int, _SLIT.bins, _at_least(16)),
        "wavelength": Param(_float, _SLIT.wavelength, _positive),
        "detector_a_on": Param(_bool, False),
        "envelope_width": Param(lambda v: None if v is None else _float(v), None,
                                lambda w: w is None or w > 0),
        "n": Param(_int, 1_000_000, _at_least(10_000)),
    }),
    Experiment("schwarzschild-demo", _schwarzschild, {
        "r_bar": Param(_float, 10.0, _positive),
        "gm": Param(_float, 1.0, _at_least(0.0)),
        "threshold": Param(_float, 1e6, _positive),
    }, stochastic=False),
    Experiment("measurement-demo", _measurement, {
        "v": Param(_float, 0.5, lambda v: abs(v) < 1),
        "x_front": Param(_float, 3.0),
        "x_back": Param(_float, 2.0),
        "t0": Param(_float, 1.0),
    }, stochastic=False),
]}


# documented summary contract per experiment; run_experiment enforces it
SUMMARY_KEYS = {
    "interference-grid": ("points", "max_abs_err"),
    "variance-scaling": ("slope", "var_m1"),
    "spread": ("slope", "slope_per_ds", "intercept", "r2", "kurtosis", "final_variance"),
    "uncertainty": ("product_ratio", "product_std_ratio"),
    "malus": ("max_z", "within_4_stderr"),
    "chain": ("final_count", "final_fraction", "fraction_of_first", "first_fraction"),
    "chsh": ("S", "E_ab", "E_ab'", "E_a'b", "E_a'b'"),
    "twoslit": ("chi2", "dof", "p_value", "visibility", "slit_a", "n"),
    "schwarzschild-demo": ("contravariant", "covariant", "diverged"),
    "measurement-demo": ("t0", "t1", "t2", "x1", "x2", "dt", "dx", "abs_diff"),
}


def _cross_check(name, params):
    """Constraints spanning several parameters, checked before any computation."""
    if name == "schwarzschild-demo" and params["r_bar"] <= 2.0 * params["gm"]:
        raise ConfigError("r_bar must exceed 2*gm (point lies inside the horizon)")
    if name == "twoslit":
        try:
            _geometry(params)
        except ValueError as exc:
            raise ConfigError(f"invalid slit geometry: {exc}") from exc
    if name == "chain":
        try:
            parse_source(params["source"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if name == "measurement-demo":
        ends = (params["x_front"] + params["v"] * params["t0"],
                params["x_back"] + params["v"] * params["t0"])
        if ends[0] == ends[1] or ends[0] * ends[1] <= 0:
            raise ConfigError("object ends must differ and lie on one side of the observer")


def validate_params(name, params):
    exp = EXPERIMENTS[name]
    if not isinstance(params, dict):
        raise ConfigError("params must be an object")
    unknown = sorted(set(params) - set(exp.params))
    if unknown:
        raise ConfigError(f"unknown parameter(s) for {name}: {', '.join(unknown)}")
    out = {}
    for key, spec in exp.params.items():
        raw = params.get(key, spec.default)
        try:
            val = spec.conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name}.{key}: {exc}") from exc
        if spec.check is not None and not spec.check(val):
            raise ConfigError(f"{name}.{key}: value {raw!r} out of range")
        out[key] = val
    _cross_check(name, out)
    return out


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str
    seed: int
    params: dict = field(default_factory=dict)
    output_dir: str = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; "
                              f"choose from {', '.join(EXPERIMENTS)}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if not 0 <= self.seed <= SEED_MAX:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "params", validate_params(self.experiment, self.params))

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        extra = sorted(set(d) - {"experiment", "seed", "params", "output_dir"})
        if extra:
            raise ConfigError(f"unknown config key(s): {', '.join(extra)}")
        if "experiment" not in d:
            raise ConfigError("config needs an 'experiment'")
        if "seed" not in d:
            raise ConfigError("config needs a 'seed'")
        return cls(d["experiment"], d["seed"], d.get("params", {}), d.get("output_dir"))

    def to_dict(self):
        return {"experiment": self.experiment, "seed": self.seed, "params": self.params}


@dataclass(frozen=True)
class ExperimentResult:
    summary: dict
    tables: dict  # name -> CSV text
    provenance: dict

    def summary_json(self):
        doc = {"provenance": self.provenance, "summary": self.summary}
        return json.dumps(_jsonable(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def run_experiment(spec):
    """Run a validated spec; writes ``summary.json`` and CSV tables if ``output_dir`` is set."""
    exp = EXPERIMENTS[spec.experiment]
    try:
        summary, tables = exp.run(spec.params, spec.seed)
    except InvalidGeometryError as exc:
        raise ConfigError(str(exc)) from exc
    missing = [k for k in SUMMARY_KEYS[spec.experiment] if k not in summary]
    if missing:
        raise RuntimeError(f"{spec.experiment} summary lacks {missing}")
    csvs = {name: to_csv(header, rows) for name, (header, rows) in tables.items()}
    provenance = {"artifact": "cml", "version": __version__, "spec": spec.to_dict()}
    result = ExperimentResult(_jsonable(summary), csvs, _jsonable(provenance))
    if spec.output_dir is not None:
        write_result(result, spec.output_dir)
    return result


def write_result(result, output_dir):
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(result.summary_json(), encoding="utf-8", newline="\n")
    for name, text in result.tables.items():
        (out / f"{name}.csv").write_text(text, encoding="utf-8", newline="\n")
