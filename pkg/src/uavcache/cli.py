"""Command-line entry point: run one experiment, write trace/summary CSVs,
and render the report figures."""

import argparse
import sys

from .config import ALGORITHMS, ExperimentConfig, load_config_file
from .harness import run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uavcache",
        description="Cache-enabled UAV content-provision simulator")
    parser.add_argument("--algo", choices=ALGORITHMS,
                        help="algorithm to simulate (default f2e2cp)")
    parser.add_argument("--users", type=int, help="number of terrestrial users")
    parser.add_argument("--uavs", type=int, help="number of UAVs")
    parser.add_argument("--slots", type=int, help="time slots per repetition")
    parser.add_argument("--reps", type=int, help="independent repetitions")
    parser.add_argument("--seed", type=int, help="master RNG seed")
    parser.add_argument("--config", metavar="PATH",
                        help="flat key=value config file")
    parser.add_argument("--out", metavar="DIR", default="results",
                        help="output directory (default: results)")
    parser.add_argument("--v", type=float, dest="v",
                        help="drift-plus-penalty weight V")
    parser.add_argument("--rho", type=float, help="power trade-off weight")
    parser.add_argument("--no-plots", action="store_true",
                        help="skip figure rendering")
    return parser


_FLAG_FIELDS = {"algo": "algo", "users": "n_users", "uavs": "n_uavs",
                "slots": "slots", "reps": "reps", "seed": "seed",
                "v": "v_weight", "rho": "rho"}


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {}
    if args.config:
        overrides.update(load_config_file(args.config))
    for flag, field in _FLAG_FIELDS.items():
        value = getattr(args, flag)
        if value is not None:
            overrides[field] = value
    cfg = ExperimentConfig(**overrides)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    summary = run_experiment(cfg, out_dir=args.out, plots=not args.no_plots)
    print(f"algo={summary['algo']} reps={summary['reps']}")
    for key in ("profit", "total_power_mw", "energy_eff", "jain",
                "epaoi_theory_s", "epaoi_empirical_s"):
        print(f"  {key} = {summary[key]:.6g}")
    print(f"results written to {args.out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
