"""Command line: ``cml <experiment> [--seed N] [--set k=v ...]``, ``cml run CONFIG``, ``cml accept``.

Exit codes: 0 success, 1 config error, 2 numeric failure, 3 acceptance failure.
"""

import argparse
import json
import sys

from .errors import ConfigError, NumericError
from .harness import EXPERIMENTS, ExperimentSpec, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would collide with numeric failure
    def error(self, message):
        raise ConfigError(message)


def _load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def _parse_set(items):
    out = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw  # bare strings such as fixed:0 or pi/4
    return out


def build_parser():
    p = _Parser(prog="cml", description="Run stochastic-metric experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config_required=False):
        if config_required:
            sp.add_argument("config", help="JSON config file")
        else:
            sp.add_argument("--config", help="JSON config file; flags override it")
        sp.add_argument("--seed", type=int, help="64-bit unsigned seed (required if stochastic)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one parameter; VALUE is parsed as JSON when possible")
        sp.add_argument("--output-dir", help="directory for summary.json and CSV tables")

    common(sub.add_parser("run", help="run the experiment named in a config file"),
           config_required=True)
    for name, exp in EXPERIMENTS.items():
        sp = sub.add_parser(name, help=f"run {name}")
        common(sp)
        sp.epilog = "parameters: " + ", ".join(exp.params)

    acc = sub.add_parser("accept", help="run the acceptance suite")
    acc.add_argument("--output-dir", help="directory for acceptance.csv / acceptance.json")
    acc.add_argument("--only", type=lambda s: [int(x) for x in s.split(",")],
                     help="comma-separated criterion ids")
    return p


def _spec_from_args(args):
    doc = _load_config(args.config) if args.config else {}
    name = doc.get("experiment") if args.command == "run" else args.command
    if args.command != "run" and doc.get("experiment", name) != name:
        raise ConfigError(f"config is for {doc['experiment']!r}, not {name!r}")
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}")
    params = dict(doc.get("params", {}))
    params.update(_parse_set(args.set))
    seed = args.seed if args.seed is not None else doc.get("seed")
    if seed is None:
        if EXPERIMENTS[name].stochastic:
            raise ConfigError(f"{name} is stochastic: --seed is required")
        seed = 0
    out = args.output_dir if args.output_dir is not None else doc.get("output_dir")
    extra = sorted(set(doc) - {"experiment", "seed", "params", "output_dir"})
    if extra:
        raise ConfigError(f"unknown config key(s): {', '.join(extra)}")
    return ExperimentSpec(name, seed, params, out)


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.command == "accept":
            from .acceptance import run_acceptance_suite

            _, code = run_acceptance_suite(args.output_dir, only=args.only)
            return code
        spec = _spec_from_args(args)
        result = run_experiment(spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(result.summary_json())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
