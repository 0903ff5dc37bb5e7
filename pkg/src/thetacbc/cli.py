"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 invalid certificate, 3 dominance
violation in a sweep, 4 mismatch against the published RLC values.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from . import repro
from .errors import ThetaCBCError
from .montecarlo import MonteCarloConfig, estimate, sweep
from .scenario import certify
from .scenario_io import emit_report, emit_sweep_csv, load_scenario

log = logging.getLogger("thetacbc")

EXIT_OK, EXIT_INPUT, EXIT_INVALID, EXIT_DOMINANCE, EXIT_REPRO = 0, 1, 2, 3, 4
DEFAULT_SEED = 42
DEFAULT_SAMPLES = 20_000
REPRO_SAMPLES = 200


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--samples", type=int, default=None)
    common.add_argument("--output", default=None, help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--dump-trajectories", metavar="PATH", nargs="?", const="trajectories.csv", default=None)
    common.add_argument("--jobs", type=int, default=None, help="worker threads for Monte Carlo")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="thetacbc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("certify", "simulate", "sweep"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("--scenario", required=True)
        if name == "sweep":
            sp.add_argument("--grid-sigma-w", type=_floats, default=None)
            sp.add_argument("--grid-sigma-i", type=_floats, default=None)
            sp.add_argument("--grid-sigma-u", type=_floats, default=None)
    sub.add_parser("paper-repro", parents=[common])
    return p


def _write(text: str, output: Optional[str]) -> None:
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _mc_config(args, default_samples: int) -> MonteCarloConfig:
    return MonteCarloConfig(
        num_trajectories=args.samples or default_samples,
        master_seed=args.seed,
        parallelism=args.jobs if args.jobs is not None else "auto",
    )


def cmd_certify(args) -> int:
    sc = load_scenario(args.scenario)
    report = certify(sc)
    _write(emit_report(report, format=args.format), args.output)
    if not report.valid:
        log.error("certificate invalid: %s", ", ".join(report.diagnostics))
        return EXIT_INVALID
    return EXIT_OK


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    report = certify(sc)
    mc = estimate(sc, _mc_config(args, DEFAULT_SAMPLES), dump_path=args.dump_trajectories)
    _write(emit_report(report, mc, format=args.format), args.output)
    return EXIT_OK


def cmd_sweep(args) -> int:
    sc = load_scenario(args.scenario)
    grid = dict(sc.sweep_grid or {})
    for key, val in (("sigma_w", args.grid_sigma_w), ("sigma_i", args.grid_sigma_i), ("sigma_u", args.grid_sigma_u)):
        if val:
            grid[key] = val
    missing = [k for k in ("sigma_w", "sigma_i", "sigma_u") if not grid.get(k)]
    if missing:
        log.error("sweep grid missing: %s (use --grid-* flags or a 'sweep' block)", ", ".join(missing))
        return EXIT_INPUT
    rows = sweep(sc, grid["sigma_w"], grid["sigma_i"], grid["sigma_u"], _mc_config(args, DEFAULT_SAMPLES))
    _write(emit_sweep_csv(rows), args.output)
    bad = [r for r in rows if r.status == "violation"]
    for r in bad:
        log.error("dominance violated at sigma=(%g, %g, %g): bound %.6g > ci_high %.6g",
                  r.sigma_w, r.sigma_i, r.sigma_u, r.bound, r.ci_high)
    return EXIT_DOMINANCE if bad else EXIT_OK


def cmd_repro(args, document: Optional[dict] = None) -> int:
    report, rows = repro.run(document)
    sc = repro.rlc_scenario() if document is None else None
    if sc is None:
        from .scenario_io import scenario_from_dict

        sc = scenario_from_dict(document)
    mc = estimate(sc, _mc_config(args, REPRO_SAMPLES), dump_path=args.dump_trajectories)
    lines = [f"{'quantity':<8} {'reference':>12} {'computed':>12} {'abs diff':>10} {'tol':>8}  result"]
    for r in rows:
        lines.append(f"{r.name:<8} {r.reference:>12.6g} {r.computed:>12.6g} {r.diff:>10.2e} "
                     f"{r.tolerance:>8.0e}  {'PASS' if r.passed else 'FAIL'}")
    lines.append(f"monte carlo: p_safe={mc.p_safe_empirical:.4f} "
                 f"ci=[{mc.ci_low:.4f}, {mc.ci_high:.4f}] samples={mc.samples} seed={mc.master_seed}")
    sys.stderr.write("\n".join(lines) + "\n")
    _write(emit_report(report, mc, format=args.format), args.output)
    return EXIT_OK if all(r.passed for r in rows) else EXIT_REPRO


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    handlers = {"certify": cmd_certify, "simulate": cmd_simulate, "sweep": cmd_sweep,
                "paper-repro": cmd_repro}
    try:
        return handlers[args.command](args)
    except (OSError, ThetaCBCError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
