"""Acceptance suite: eleven numbered checks with fixed seeds, bounds and time limits.

Each check returns a measured value and the bound it is compared against.
A check passes when its comparison holds and it finished inside its
runtime limit.  ``run_acceptance_suite`` writes ``acceptance.csv`` and
``acceptance.json`` and returns exit code 0 (all pass) or 3.
"""

import json
import math
import os
import tempfile
import time
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .harness import ExperimentSpec, run_experiment, to_csv
from .metric import determinant, phase_metric_array, transform

SEED = 20261018
EXIT_OK = 0
EXIT_ACCEPTANCE = 3


@dataclass(frozen=True)
class Check:
    id: int
    name: str
    bound: float
    limit_s: float  # runtime limit; inf when the criterion sets none
    compare: str  # "<", "<=", ">", "abs<=" (|value - target| <= bound)
    target: float = 0.0


@dataclass(frozen=True)
class Row:
    id: int
    name: str
    value: float
    bound: float
    compare: str
    target: float
    seconds: float
    limit_s: float
    passed: bool
    detail: str


CHECKS = {c.id: c for c in [
    Check(1, "interference grid max abs error", 1e-12, 1.0, "<"),
    Check(2, "rotoreflection max deviation", 1e-12, 1.0, "<"),
    Check(3, "variance log-log slope", 0.05, 30.0, "abs<=", -1.0),
    Check(4, "spread linear fit R^2", 0.99, 120.0, ">"),
    Check(5, "uncertainty product max/min", 1.3, 60.0, "<"),
    Check(6, "Malus max deviation in stderr", 4.0, 30.0, "<="),
    Check(7, "chain fraction of first polarizer", 0.002, 30.0, "abs<=", 0.25),
    Check(8, "CHSH S", 0.02, 120.0, "abs<=", 2.828),
    Check(9, "two-slit chi-square p-value", 0.001, 60.0, ">"),
    Check(10, "rerun byte mismatches", 0, math.inf, "<="),
    Check(11, "Schwarzschild max partial sum", 1e6, 5.0, ">"),
]}


def _compare(value, check, bound):
    if check.compare == "<":
        return value < bound
    if check.compare == "<=":
        return value <= bound
    if check.compare == ">":
        return value > bound
    if check.compare == "abs<=":
        return abs(value - check.target) <= bound
    raise ValueError(check.compare)


def _spec(experiment, params=None, seed=SEED):
    return ExperimentSpec(experiment, seed, params or {})


# each measure returns (value, extra_ok, detail); extra_ok covers side conditions

def _c1():
    s = run_experiment(_spec("interference-grid", {"n_alpha": 100, "n_beta": 100})).summary
    return s["max_abs_err"], True, f"{s['points']} points"


def _c2():
    alpha = np.random.default_rng(SEED).uniform(0.0, 2.0 * np.pi, 1000)
    g = transform(phase_metric_array(alpha))
    c, s = np.cos(alpha), np.sin(alpha)
    expect = np.zeros((alpha.size, 4, 4))
    expect[:, 0, 0] = expect[:, 1, 1] = 1.0
    expect[:, 2, 2], expect[:, 2, 3], expect[:, 3, 2], expect[:, 3, 3] = -c, s, s, c
    imag = float(np.abs(g.imag).max())
    block = float(np.abs(g.real - expect).max())
    det = float(np.abs(determinant(g.real) + 1.0).max())
    return max(imag, block, det), True, f"imag={imag:.3g} block={block:.3g} det+1={det:.3g}"


def _c3():
    s = run_experiment(_spec("variance-scaling", {"sigma": {"2,2": 0.1}, "trials": 4000})).summary
    return s["slope"], True, f"Var(m=1)={s['var_m1']:.5g}"


def _c4():
    s = run_experiment(_spec("spread", {"n_particles": 10_000, "steps": 200})).summary
    kurt_ok = abs(s["kurtosis"]) < 0.1
    return s["r2"], kurt_ok, f"excess kurtosis={s['kurtosis']:.4f} (|k|<0.1: {kurt_ok})"


def _c5():
    s = run_experiment(_spec("uncertainty", {"trials": 4000})).summary
    return s["product_ratio"], True, f"std-based ratio={s['product_std_ratio']:.4f}"


MALUS_DELTAS = [0.0, math.pi / 6, math.pi / 4, math.pi / 3, math.pi / 2]
CHSH_PARAMS = {"a": 0.0, "a_prime": math.pi / 4, "b": math.pi / 8, "b_prime": 3 * math.pi / 8,
               "n": 1_000_000}


def _malus_spec():
    return _spec("malus", {"deltas": MALUS_DELTAS, "n": 1_000_000})


def _c6():
    s = run_experiment(_malus_spec()).summary
    return s["max_z"], True, "n=1e6 per angle"


def _c7():
    crossed = run_experiment(_spec("chain", {"axes": [0.0, math.pi / 2], "n": 1_000_000})).summary
    three = run_experiment(_spec("chain", {"axes": [0.0, math.pi / 4, math.pi / 2],
                                           "n": 1_000_000})).summary
    ok = crossed["final_count"] == 0
    return three["fraction_of_first"], ok, f"crossed pair transmitted={crossed['final_count']}"


def _chsh_spec(classical=False):
    return _spec("chsh", {**CHSH_PARAMS, "classical": classical})


def _c8():
    q = run_experiment(_chsh_spec()).summary
    c = run_experiment(_chsh_spec(classical=True)).summary
    ok = c["S"] <= 2.02
    return q["S"], ok, f"classical S={c['S']:.4f} (<=2.02: {ok})"


def _c9():
    off = run_experiment(_spec("twoslit", {"n": 1_000_000})).summary
    on = run_experiment(_spec("twoslit", {"n": 1_000_000, "detector_a_on": True})).summary
    ok = on["visibility"] < 0.05
    return off["p_value"], ok, (f"chi2={off['chi2']:.1f} dof={off['dof']} "
                                f"detector-on visibility={on['visibility']:.4f} (<0.05: {ok})")


@contextmanager
def _threads(value):
    old = os.environ.get("CML_THREADS")
    os.environ["CML_THREADS"] = str(value)
    try:
        yield
    finally:
        if old is None:
            del os.environ["CML_THREADS"]
        else:
            os.environ["CML_THREADS"] = old


def _files(spec, threads):
    with tempfile.TemporaryDirectory() as tmp, _threads(threads):
        run_experiment(ExperimentSpec(spec.experiment, spec.seed, spec.params, tmp))
        return {p.name: p.read_bytes() for p in sorted(Path(tmp).iterdir())}


def _c10():
    mismatches, compared = 0, 0
    for spec in (_malus_spec(), _chsh_spec()):
        runs = [_files(spec, t) for t in (1, 2, 4)]
        for name in runs[0]:
            compared += 1
            mismatches += sum(r.get(name) != runs[0][name] for r in runs[1:])
    return mismatches, True, f"{compared} files x CML_THREADS in (1, 2, 4)"


def _c11():
    s = run_experiment(_spec("schwarzschild-demo", {"r_bar": 10.0, "gm": 1.0})).summary
    ok = s["contravariant"] == 10.0 and s["diverged"]
    return s["max_partial_sum"], ok, f"contravariant={s['contravariant']!r} diverged={s['diverged']}"


MEASURES = {1: _c1, 2: _c2, 3: _c3, 4: _c4, 5: _c5, 6: _c6, 7: _c7, 8: _c8, 9: _c9,
            10: _c10, 11: _c11}


def run_check(cid, bound=None):
    """Run one criterion; ``bound`` overrides the stored bound (test hook)."""
    check = CHECKS[cid]
    bound = check.bound if bound is None else bound
    t0 = time.perf_counter()
    value, extra_ok, detail = MEASURES[cid]()
    seconds = time.perf_counter() - t0
    passed = bool(_compare(value, check, bound) and extra_ok and seconds < check.limit_s)
    return Row(cid, check.name, float(value), float(bound), check.compare, check.target,
               seconds, check.limit_s, passed, detail)


def format_row(row):
    verdict = "PASS" if row.passed else "FAIL"
    tgt = f"({row.target:g})" if row.target < 0 else f"{row.target:g}"
    cmp = (f"|v - {tgt}| <= {row.bound:g}" if row.compare == "abs<="
           else f"v {row.compare} {row.bound:g}")
    limit = "" if math.isinf(row.limit_s) else f" / {row.limit_s:g}s"
    return (f"[{verdict}] {row.id:>2} {row.name}: v={row.value:.6g} ({cmp}) "
            f"{row.seconds:.2f}s{limit}; {row.detail}")


def run_acceptance_suite(output_dir=None, only=None, bound_overrides=None, echo=print):
    """Run the criteria (all, or the ids in ``only``); returns ``(rows, exit_code)``."""
    overrides = bound_overrides or {}
    rows = []
    for cid in sorted(only or CHECKS):
        row = run_check(cid, overrides.get(cid))
        rows.append(row)
        if echo is not None:
            echo(format_row(row))
    code = EXIT_OK if all(r.passed for r in rows) else EXIT_ACCEPTANCE
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        header = ("criterion", "name", "value", "bound", "compare", "target", "seconds",
                  "limit_s", "passed", "detail")
        table = ((r.id, r.name, r.value, r.bound, r.compare, r.target, r.seconds, r.limit_s,
                  r.passed, r.detail) for r in rows)
        (out / "acceptance.csv").write_text(to_csv(header, table), encoding="utf-8", newline="\n")
        doc = {"all_passed": code == EXIT_OK,
               "criteria": [{"id": r.id, "name": r.name, "value": r.value, "bound": r.bound,
                             "passed": r.passed, "seconds": r.seconds, "detail": r.detail}
                            for r in rows]}
        (out / "acceptance.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n",
                                             encoding="utf-8", newline="\n")
    return rows, code
