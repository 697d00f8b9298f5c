"""Command-line interface: run experiments, sweep grids, print the tables."""

from __future__ import annotations

import os

for _var in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "OMP_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse  # noqa: E402
import json  # noqa: E402
import sys  # noqa: E402

from .errors import CavcoolError, ConfigError  # noqa: E402

USAGE_EXIT = 2
NUMERICAL_EXIT = 3


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("config", help="path to a JSON experiment config")
    sub.add_argument("--out", help="output directory (default: config 'out', then $CAVCOOL_OUT, then .)")
    sub.add_argument("--seed", type=int, help="override the master seed")
    sub.add_argument("--trajectories", type=int, help="override the trajectory count")
    sub.add_argument("--threads", type=int, help="threads for independent grid points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavcool",
        description="Regenerate the entanglement-cooling datasets (figures and tables).",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    _add_common(subs.add_parser("run", help="run one experiment config"))
    _add_common(subs.add_parser("sweep", help="run a grid experiment (requires >=2 points per axis)"))
    tables = subs.add_parser("tables", help="print the driven-transition tables")
    tables.add_argument("--json", action="store_true", help="emit JSON instead of text")
    tables.add_argument("--g", type=float, default=1.0)
    tables.add_argument("--omega", type=float, default=0.03,
                        help="common Rabi amplitude for the numeric column")
    return parser


def _load_config(path: str):
    from .experiments import parse_config

    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc)


def _run(args, sweep: bool) -> int:
    from .experiments import run_experiment

    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.trajectories is not None:
        if args.trajectories < 1:
            raise ConfigError("trajectories must be >= 1")
        cfg.trajectories = args.trajectories
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("threads must be >= 1")
        cfg.threads = args.threads
    if args.out is not None:
        cfg.out = args.out
    manifest = run_experiment(cfg, sweep=sweep)
    print(json.dumps(manifest, indent=2, sort_keys=True))
    return 0


def _tables(args) -> int:
    from .experiments import EXPERIMENTS, dressed_tables_payload, _format_table
    from .dressed import resonant_table

    params = dict(EXPERIMENTS["dressed-tables"][0])
    params.update({"g": args.g, "omega01": args.omega, "omega02": args.omega,
                   "omega1l": args.omega})
    if args.json:
        print(json.dumps(dressed_tables_payload(params), indent=2, sort_keys=True))
        return 0
    amps = (args.omega, args.omega, args.omega)
    rows = resonant_table(amps, args.g, params["omega1"], params["omega2"])
    print(_format_table(rows, "Laser-driven transitions under the resonant assignment (units of g)"))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args, sweep=False)
        if args.command == "sweep":
            return _run(args, sweep=True)
        return _tables(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except CavcoolError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_EXIT


if __name__ == "__main__":
    sys.exit(main())
