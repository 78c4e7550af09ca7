"""Command line entry point: ``pitaevskii run | validate | oracle | report``.

Exit codes: 0 completed, 2 halted at the density floor, 1 error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import load_config
from .errors import PitaevskiiError
from .initial_data import build_initial_state
from .runner import OUTPUT_ENV, oracle_compare, resolve_output_dir, run_simulation

DEFAULT_OUTPUT = "pitaevskii-output"


def _run(args):
    cfg = load_config(args.config)
    directory = resolve_output_dir(args.output, cfg) or DEFAULT_OUTPUT
    report = run_simulation(cfg, directory, resume=args.resume)
    print(f"{report.outcome.value} t={report.t:.17g} steps={report.steps} output={directory}")
    if report.message:
        print(report.message)
    return report.exit_code


def _validate(args):
    cfg = load_config(args.config)
    state = build_initial_state(cfg.initial, cfg.grid, cfg.truncation, cfg.params)
    rho = state.rho.physical()
    print(f"grid {cfg.shape} cutoff {cfg.truncation.cutoff} steps {cfg.nsteps}")
    print(f"rho in [{rho.min():.6g}, {rho.max():.6g}], divergence defect {state.u.divergence_defect():.3e}")
    print(f"initial energy {state.energy0:.17g}")
    print("ok")
    return 0


def _oracle(args):
    cfg = load_config(args.config)
    result = oracle_compare(args.against, cfg)
    print(f"t={result.t:.17g} max_error={result.max_error:.6e} "
          f"renormalized_residual={result.renormalized_residual:.6e}")
    if result.max_error > args.tolerance:
        print(f"oracle disagreement exceeds tolerance {args.tolerance:g}")
        return 1
    return 0


def _report(args):
    from .plotting import build_report

    cfg_path = os.path.join(args.run_dir, "config.ini")
    floor = load_config(cfg_path).params.density_floor if os.path.exists(cfg_path) else None
    for key, value in build_report(args.run_dir, floor):
        text = f"{value:.6g}" if isinstance(value, float) else str(value)
        print(f"{key:<28} {text}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="pitaevskii", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="advance a configuration and write diagnostics")
    p.add_argument("--config", required=True)
    p.add_argument("--output", help=f"run directory (default: config, ${OUTPUT_ENV}, ./{DEFAULT_OUTPUT})")
    p.add_argument("--resume", help="checkpoint file to continue from")
    p.set_defaults(func=_run)

    p = sub.add_parser("validate", help="check a configuration and its initial data")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_validate)

    p = sub.add_parser("oracle", help="compare a stored run with the characteristics density")
    p.add_argument("--config", required=True)
    p.add_argument("--against", required=True, metavar="RUN_DIR")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=_oracle)

    p = sub.add_parser("report", help="Gronwall monitor, summary table and figures")
    p.add_argument("run_dir")
    p.set_defaults(func=_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PitaevskiiError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
