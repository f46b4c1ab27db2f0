"""Command line: ``kglab {simulate, kernel-verify, norm-report, decay-scan}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 certification failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import harness, kernels
from .dynamics import IntegrationError
from .harness import (EXIT_CERTIFICATION, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, ConfigError,
                      FieldParseError, RunConfig)
from .nonlinearity import AliasingError
from .spectral import ContractError


def _int_list(s: str) -> list[int]:
    """``0:4`` (inclusive) or ``0,1,3``."""
    if ":" in s:
        a, b = s.split(":")
        return list(range(int(a), int(b) + 1))
    return [int(v) for v in s.split(",") if v]


def _float_list(s: str) -> list[float]:
    return [float(v) for v in s.split(",") if v.strip()]


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    for f in dataclasses.fields(RunConfig):
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None,
                       help=f"overrides {f.name} (env {harness.ENV_PREFIX}{f.name.upper()})")


def _config(args) -> RunConfig:
    overrides = {f.name: getattr(args, f.name) for f in dataclasses.fields(RunConfig)}
    return harness.load_config(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kglab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="time-step the quasilinear system and write diagnostics")
    _add_run_flags(p)

    p = sub.add_parser("kernel-verify", help="kernel bound sweeps; CSV to stdout or --out")
    p.add_argument("--k-range", type=_int_list, default=_int_list("-1:4"))
    p.add_argument("--n-range", type=_int_list, default=_int_list("0:4"))
    p.add_argument("--t-range", type=_float_list, default=[1, 2, 5, 10, 20, 50, 100])
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--stability-factor", type=float, default=3.0)
    p.add_argument("--corrupt-bound", action="store_true",
                   help="test mode: certify against a deliberately wrong decay rate")
    p.add_argument("--out", help="CSV path (default stdout)")

    p = sub.add_parser("norm-report", help="NormReport JSON for a field file")
    p.add_argument("input")
    p.add_argument("--coeffs", default="zero", help="preset used in the modified energy")
    p.add_argument("--out", help="JSON path (default stdout)")

    p = sub.add_parser("decay-scan", help="energy-growth exponents across epsilon0 values")
    _add_run_flags(p)
    p.add_argument("--epsilons", type=_float_list, required=True)
    p.add_argument("--no-control", action="store_true")
    p.add_argument("--out", help="CSV path (default output_dir/decay_scan.csv)")
    return ap


def _emit(text: str, out: str | None) -> None:
    if out:
        harness._atomic_write(Path(out), text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    cfg = _config(args)
    res = harness.run_simulation(cfg)
    summary = harness.write_simulation(cfg, res)
    print(json.dumps({k: summary[k] for k in ("decay_fit", "energy_exponent", "theta_plateau")}, sort_keys=True))
    return EXIT_OK


def cmd_kernel_verify(args) -> int:
    reports, summary = harness.kernel_verify(args.k_range, args.n_range, args.t_range, args.tol,
                                             corrupt=args.corrupt_bound,
                                             stability_factor=args.stability_factor)
    _emit(kernels.reports_to_csv(reports), args.out)
    print(f"max ratio {summary.max_ratio:.6g}; {len(summary.failures)} failed checks", file=sys.stderr)
    for f in summary.failures:
        print(f"  {f[0]} {f[1]}: {f[2]:.4g}", file=sys.stderr)
    return EXIT_OK if summary.ok else EXIT_CERTIFICATION


def cmd_norm_report(args) -> int:
    from .nonlinearity import preset

    data = Path(args.input).read_bytes()
    report = harness.norm_report_from_bytes(data, preset(args.coeffs))
    _emit(report.to_json() + "\n", args.out)
    return EXIT_OK


def cmd_decay_scan(args) -> int:
    cfg = _config(args)
    rows = harness.decay_scan(cfg, args.epsilons, control=not args.no_control)
    out = Path(args.out) if args.out else Path(cfg.output_dir) / "decay_scan.csv"
    harness.write_csv(out, harness.SCAN_COLUMNS, rows)
    problems = harness.check_scan_trend(rows)
    for p in problems:
        print(p, file=sys.stderr)
    return EXIT_CERTIFICATION if problems else EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "kernel-verify": cmd_kernel_verify,
            "norm-report": cmd_norm_report, "decay-scan": cmd_decay_scan}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FieldParseError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, AliasingError, kernels.QuadratureError, ArithmeticError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (kernels.CertificationError, harness.CertificationFailure) as e:
        print(f"certification failure: {e}", file=sys.stderr)
        return EXIT_CERTIFICATION
    except ContractError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
