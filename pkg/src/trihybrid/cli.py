"""Command line: ``trihybrid {run,sweep,pattern}``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import (RunConfig, export_pattern, export_results, load_config, run_single,
                      summarize, sweep)
from .metrics import TriHybridBeamformer


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _modes(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file with RunConfig fields")
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--power-dbm", type=_floats, dest="power_dbm", help="comma-separated list")
    common.add_argument("--beta", type=_floats, help="comma-separated list in [0, 1]")
    common.add_argument("--modes", type=_modes, help="comma-separated subset of the solver modes")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int)
    common.add_argument("--no-timing", action="store_false", dest="record_timing", default=None,
                        help="write wall_ms as 0 so repeated runs are byte-identical")

    parser = argparse.ArgumentParser(prog="trihybrid", description="Tri-hybrid ISAC beamforming experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="solve one scenario and print its metrics")
    run.add_argument("--trial", type=int, default=0, help="trial index of the scenario")
    sub.add_parser("sweep", parents=[common], help="factorial experiment written to results.csv")
    pattern = sub.add_parser("pattern", parents=[common], help="radiation pattern grids as CSV")
    pattern.add_argument("--trial", type=int, default=0)
    pattern.add_argument("--antenna", type=int, default=0, help="element whose pattern is exported")
    pattern.add_argument("--n-theta", type=int, default=91)
    pattern.add_argument("--n-phi", type=int, default=180)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file values, overridden by any flag given on the command line."""
    config = load_config(args.config) if args.config else RunConfig()
    overrides = {name: getattr(args, name) for name in
                 ("seed", "trials", "power_dbm", "beta", "modes", "out", "workers", "record_timing")
                 if getattr(args, name, None) is not None}
    return config.replace(**overrides)


def _progress(done: int, total: int) -> None:
    print(f"\rtrial {done}/{total}", end="\n" if done == total else "", file=sys.stderr, flush=True)


def cmd_run(config: RunConfig, args) -> None:
    single = run_single(config, args.trial)
    print(f"trial {args.trial}  power {config.power_dbm[0]:g} dBm  beta {config.beta[0]:g}")
    for mode, report in single.reports.items():
        m = report.metrics
        sinr = " ".join(f"{s:.4g}" for s in m.sinr)
        print(f"{mode:14s} objective {m.objective:.6g}  sum_rate {m.sum_rate:.6g} bps/Hz  "
              f"scnr {m.scnr:.6g}  sinr [{sinr}]  iterations {report.iterations}")


def cmd_sweep(config: RunConfig, args) -> None:
    results = sweep(config, progress=_progress)
    path = export_results(results, Path(config.out) / "results.csv")
    for s in summarize(results):
        print(f"{s.mode:14s} P={s.power_dbm:g} dBm beta={s.beta:g}  objective mean {s.objective_mean:.6g} "
              f"median {s.objective_median:.6g}  failures {s.failures}")
    print(f"wrote {path}", file=sys.stderr)


def cmd_pattern(config: RunConfig, args) -> None:
    single = run_single(config, args.trial)
    out = Path(config.out)
    for mode, report in single.reports.items():
        bf: TriHybridBeamformer = report.beamformer
        if not 0 <= args.antenna < bf.em.shape[0]:
            raise ValueError(f"antenna index {args.antenna} out of range")
        element = export_pattern(bf.em[args.antenna], out / f"pattern_{mode}_element{args.antenna}.csv",
                                 args.n_theta, args.n_phi, config.basis())
        array = export_pattern(bf, out / f"pattern_{mode}_array.csv", args.n_theta, args.n_phi,
                               config.basis(), config.geometry())
        print(f"wrote {element} and {array}", file=sys.stderr)


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "pattern": cmd_pattern}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
        COMMANDS[args.command](config, args)
    except (OSError, ValueError) as exc:
        print(f"trihybrid: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
