"""``endohaptics`` command line: run scenarios, synthesise and fit calibrations.

Exit codes: 0 ok, 2 usage or unreadable/unwritable path, 3 config or data
validation, 4 runtime invariant violation, 5 config file syntax error.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
from pathlib import Path

import numpy as np

from .calibration import (
    DEFAULT_FULL_SCALE,
    DegenerateDataError,
    accuracy_report,
    fit_calibration,
    read_samples_csv,
    synthesize_samples,
    write_samples_csv,
)
from .sensor import PRINTED_CALIBRATION, SensorError, SensorParams, Wrench3, calibration_matrix
from .teleop.config import ConfigError, ConfigParseError, load_config
from .teleop.sim import InvariantViolation, run_scenario

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_INVARIANT = 4
EXIT_PARSE = 5


def _err(msg: str) -> None:
    print(f"endohaptics: {msg}", file=sys.stderr)


def _format_matrix(m: np.ndarray, indent: str = "  ") -> str:
    return "\n".join(indent + "  ".join(f"{v:+10.4f}" for v in row) for row in m)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config, args.overrides)
        scenario = cfg.to_scenario()
    except FileNotFoundError:
        _err(f"config file not found: {args.config}")
        return EXIT_USAGE
    except OSError as exc:
        _err(f"cannot read {args.config}: {exc}")
        return EXIT_USAGE
    except ConfigParseError as exc:
        _err(f"parse error: {exc}")
        return EXIT_PARSE
    except ConfigError as exc:
        for problem in exc.problems:
            _err(f"invalid config: {problem}")
        return EXIT_CONFIG
    except ValueError as exc:
        _err(f"invalid config: {exc}")
        return EXIT_CONFIG

    trace = io.StringIO()
    messages = io.BytesIO() if cfg.output.messages else None
    try:
        summary = run_scenario(scenario, trace, messages)
    except InvariantViolation as exc:
        _err(str(exc))
        return EXIT_INVARIANT

    trace_text = trace.getvalue()
    checksum = hashlib.sha256(trace_text.encode("utf-8")).hexdigest()
    doc = summary.to_dict()
    doc["trace_sha256"] = checksum
    try:
        if cfg.output.trace:
            Path(cfg.output.trace).write_text(trace_text, encoding="utf-8")
        if cfg.output.summary:
            Path(cfg.output.summary).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        if messages is not None:
            Path(cfg.output.messages).write_bytes(messages.getvalue())
    except OSError as exc:
        _err(f"cannot write output: {exc}")
        return EXIT_USAGE

    if args.json:
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(summary.format())
        print(f"trace sha256          : {checksum}")
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    try:
        params = SensorParams(args.k, args.d)
    except SensorError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    analytic = calibration_matrix(params)

    if args.emit_analytic is not None:
        try:
            k, d = args.emit_analytic
            cal = calibration_matrix(SensorParams(k, d))
        except SensorError as exc:
            _err(str(exc))
            return EXIT_CONFIG
        print(f"analytic calibration, k = {k} N/mm, d = {d} mm")
        print("[Fz, Mx, My] = -P @ [dA, dB, dC], P =")
        print(_format_matrix(cal.printed_form))
        if args.samples is None:
            return EXIT_OK

    if args.samples is None:
        _err("calibrate needs a samples CSV (or --emit-analytic K D)")
        return EXIT_USAGE
    try:
        samples = read_samples_csv(args.samples)
    except FileNotFoundError:
        _err(f"samples file not found: {args.samples}")
        return EXIT_USAGE
    except (OSError, UnicodeDecodeError) as exc:
        _err(f"cannot read {args.samples}: {exc}")
        return EXIT_USAGE
    except (ValueError, SensorError) as exc:
        _err(f"malformed samples: {exc}")
        return EXIT_CONFIG
    try:
        fitted = fit_calibration(samples)
    except DegenerateDataError as exc:
        _err(f"degenerate calibration data: {exc}")
        return EXIT_CONFIG

    full_scale = Wrench3(*args.full_scale) if args.full_scale else DEFAULT_FULL_SCALE
    try:
        report = accuracy_report(fitted, samples, full_scale)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    diff = np.abs(fitted.m - analytic.m)
    printed_diff = np.abs(fitted.printed_form - PRINTED_CALIBRATION)

    if args.json:
        print(
            json.dumps(
                {
                    "fitted": fitted.m.tolist(),
                    "fitted_printed_form": fitted.printed_form.tolist(),
                    "analytic": analytic.m.tolist(),
                    "max_abs_diff_analytic": float(diff.max()),
                    "max_abs_diff_printed_reference": float(printed_diff.max()),
                    "residual": fitted.residual,
                    "condition_number": fitted.condition_number,
                    "accuracy": {
                        "per_axis": list(report.per_axis_accuracy),
                        "overall": report.overall_accuracy,
                        "rmse": list(report.per_axis_rmse),
                        "samples": report.sample_count,
                        "out_of_bounds": report.out_of_bounds,
                    },
                },
                indent=2,
            )
        )
        return EXIT_OK

    print(f"fitted from {len(samples)} samples: [Fz, Mx, My] = -P @ [dA, dB, dC], P =")
    print(_format_matrix(fitted.printed_form))
    print(f"residual {fitted.residual:.6g}, condition number {fitted.condition_number:.4g}")
    print(f"analytic P for k = {args.k} N/mm, d = {args.d} mm:")
    print(_format_matrix(analytic.printed_form))
    print(f"max |fitted - analytic|            : {diff.max():.3e}")
    if args.k == 0.196 and args.d == 16.0:
        print(f"max |fitted - published 3-decimal| : {printed_diff.max():.3e}")
    print(report.format())
    return EXIT_OK


def cmd_gen_samples(args: argparse.Namespace) -> int:
    if args.n < 0:
        _err("--n must be >= 0")
        return EXIT_USAGE
    try:
        params = SensorParams(args.k, args.d)
        samples = synthesize_samples(params, args.n, sigma=args.sigma, seed=args.seed, quantization_step=args.quantization)
    except (SensorError, ValueError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    try:
        write_samples_csv(samples, args.out)
    except OSError as exc:
        _err(f"cannot write {args.out}: {exc}")
        return EXIT_USAGE
    print(f"wrote {len(samples)} samples to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="endohaptics", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a teleoperation scenario")
    p.add_argument("config", help="scenario TOML file")
    p.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="PATH=VALUE",
        help="override a config field, e.g. --set sensor.sigma=0 (repeatable)",
    )
    p.add_argument("--json", action="store_true", help="print the summary as JSON")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("calibrate", help="fit a calibration matrix from a samples CSV")
    p.add_argument("samples", nargs="?", help="CSV with header dA_mm,dB_mm,dC_mm,Fz_N,Mx_Nmm,My_Nmm")
    p.add_argument("--k", type=float, default=0.196, help="spring stiffness, N/mm (default 0.196)")
    p.add_argument("--d", type=float, default=16.0, help="spring radius, mm (default 16)")
    p.add_argument("--full-scale", type=float, nargs=3, metavar=("FZ", "MX", "MY"),
                   help="accuracy normalisation (default 5 N, 80 N*mm, 80 N*mm)")
    p.add_argument("--emit-analytic", type=float, nargs=2, metavar=("K", "D"),
                   help="print the analytic calibration matrix for K, D")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("gen-samples", help="write synthetic calibration samples")
    p.add_argument("--k", type=float, default=0.196)
    p.add_argument("--d", type=float, default=16.0)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--sigma", type=float, default=0.0, help="photo noise std-dev, mm")
    p.add_argument("--quantization", type=float, default=0.0, help="photo reading step, mm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_gen_samples)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
