"""Command-line front end: python -m quadvane.main <command> [options]."""
import argparse
import csv
import io
import logging
import math
import os
import sys
from typing import List, Optional

from quadvane.utils.log_setup import setup_logging
from quadvane.utils import config as env_config
from quadvane.utils.error_handler import QuadvaneError
from quadvane.utils.file_ops import atomic_write_text, ensure_writable, read_text
from quadvane.models.response import ResponseVector
from quadvane.models.sweep import NoiseModel
from quadvane.sensor_model import (
    MAX_MEASURABLE_SPEED, default_config, describe_config, load_config, parse_config, save_config,
)
from quadvane.transduction import base_resistance
from quadvane.estimation import (
    CALIBRATION_ANGLE, build_calibration, calibration_from_csv, calibration_to_csv, direction_threshold,
    fit_lobe, joint_estimate,
)
from quadvane.windtunnel import (
    SWEEP_HEADER, angle_plot_csv, export_csv, fig7_dataset, fig8_dataset, import_csv, run_sweep,
    speed_plot_csv,
)
from quadvane.selftest import format_table, run_selftest, selftest_passed

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2

ESTIMATE_COLUMNS = ("v_hat_m_per_s", "theta_hat_deg", "residual_ohm", "flags")


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _parse_list(text: str) -> List[float]:
    """Parses "a,b,c" or a "start:stop:step" range (stop excluded)."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or not all(math.isfinite(p) for p in parts) or parts[2] <= 0:
            raise argparse.ArgumentTypeError(f"range must be start:stop:step with step > 0, got {text!r}")
        start, stop, step = parts
        count = int(round((stop - start) / step))
        values = [start + i * step for i in range(count + 1)]
        return [v for v in values if v < stop - 1e-9 * step]
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive_float(text: str) -> float:
    """argparse type for finite values > 0."""
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not (math.isfinite(value) and value > 0):
        raise argparse.ArgumentTypeError(f"must be finite and > 0, got {text!r}")
    return value


def _emit(text: str, output: Optional[str]):
    if output:
        atomic_write_text(output, text)
        logger.info(f"Wrote {output}")
    else:
        sys.stdout.write(text)


def _noise(args) -> NoiseModel:
    seed = env_config.resolve_seed(args.seed)
    if args.lcr_noise:
        return NoiseModel(gaussian_sigma=env_config.LCR_NOISE_SIGMA_OHM,
                          quantization_step=env_config.LCR_QUANT_STEP_OHM, seed=seed)
    return NoiseModel(gaussian_sigma=args.sigma, quantization_step=args.step, seed=seed)


def _config(args):
    return load_config(read_text(args.config))


# --- Commands ---

def cmd_simulate(args) -> int:
    config = _config(args)
    angle = args.angle if args.angle is not None else args.angle_from + 180.0
    records = run_sweep(config, [angle], [args.speed], _noise(args))
    _emit(export_csv(records), args.output)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _config(args)
    noise = _noise(args)
    workers = args.workers or env_config.DEFAULT_WORKERS
    if args.preset == "fig7":
        records = fig7_dataset(config, noise, workers=workers)
    elif args.preset == "fig8":
        records = fig8_dataset(config, noise, workers=workers)
    else:
        records = run_sweep(config, args.angles, args.speeds, noise, replicates=args.replicates, workers=workers)
    _emit(export_csv(records), args.output)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    config = _config(args)
    count = int(round(args.max_speed / args.grid_step))
    grid = [i * args.grid_step for i in range(count + 1)]
    table = build_calibration(config, grid, angle_deg=args.angle)
    _emit(calibration_to_csv(table), args.output)
    return EXIT_OK


def cmd_fit(args) -> int:
    fit = fit_lobe(import_csv(read_text(args.input)))
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("a0", "a1", "a2", "residual_ohm"))
    writer.writerow((_fmt(fit.lobe.a0), _fmt(fit.lobe.a1), _fmt(fit.lobe.a2), _fmt(fit.residual)))
    _emit(out.getvalue(), args.output)
    if args.k_output:
        k_out = io.StringIO()
        k_writer = csv.writer(k_out, lineterminator="\n")
        k_writer.writerow(("v_m_per_s", "K_ohm"))
        for v, k in sorted(fit.k_by_speed.items()):
            k_writer.writerow((_fmt(v), _fmt(k)))
        atomic_write_text(args.k_output, k_out.getvalue())
    return EXIT_OK


def cmd_estimate(args) -> int:
    config = _config(args)
    records = import_csv(read_text(args.input))
    table = calibration_from_csv(read_text(args.calibration)) if args.calibration else build_calibration(config)
    threshold = direction_threshold(NoiseModel(gaussian_sigma=args.sigma, quantization_step=0.0))
    base_R = base_resistance(config.resistor, config.materials.resistivity_ohm_m)

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SWEEP_HEADER + ESTIMATE_COLUMNS)
    body = csv.reader(io.StringIO(export_csv(records)))
    next(body)
    for record, row in zip(records, body):
        result = joint_estimate(ResponseVector(dR=record.dR, base_R=base_R), config, table, threshold)
        writer.writerow(row + [_fmt(result.v_hat), _fmt(result.theta_hat), _fmt(result.residual),
                               "|".join(result.flags)])
    _emit(out.getvalue(), args.output)
    return EXIT_OK


def cmd_plotdata(args) -> int:
    records = import_csv(read_text(args.input))
    _emit(angle_plot_csv(records) if args.kind == "angle" else speed_plot_csv(records), args.output)
    return EXIT_OK


def cmd_selftest(args) -> int:
    config = parse_config(read_text(args.config)) if args.config else default_config()
    calibration_text = read_text(args.calibration) if args.calibration else None
    results = run_selftest(config, calibration_text)
    _emit(format_table(results), args.output)
    return EXIT_OK if selftest_passed(results, strict=args.strict) else EXIT_ERROR


def cmd_init_config(args) -> int:
    _emit(save_config(default_config()), args.output)
    return EXIT_OK


def cmd_describe(args) -> int:
    config = _config(args) if args.config else default_config()
    lines = [f"{key} = {_fmt(value)}" for key, value in describe_config(config).items()]
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK


# --- Parser ---

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quadvane", description="Four-cantilever flow sensor twin")
    parser.add_argument("--log-level", default=None, help="Override LOG_LEVEL (DEBUG, INFO, WARNING, ...)")
    parser.add_argument("--log-file", default=None, help="Also write logs to this file")
    subparsers = parser.add_subparsers(dest="command", required=True, help="Commands")

    def add_output(p):
        p.add_argument("--output", "-o", default=None, help="Output file (default: stdout)")

    def add_noise(p):
        p.add_argument("--seed", type=int, default=None, help="Noise seed (default: QUADVANE_SEED or 0)")
        p.add_argument("--sigma", type=float, default=0.0, help="Gaussian read-out noise, ohm")
        p.add_argument("--step", type=float, default=0.0, help="Meter quantization step, ohm")
        p.add_argument("--lcr-noise", action="store_true",
                       help="Use the configured LCR meter noise (QUADVANE_NOISE_SIGMA_OHM / QUADVANE_QUANT_STEP_OHM)")

    p = subparsers.add_parser("simulate", help="One reading as a CSV row")
    p.add_argument("--config", required=True, help="Sensor config file")
    p.add_argument("--speed", type=float, required=True, help="Flow speed, m/s")
    angle = p.add_mutually_exclusive_group(required=True)
    angle.add_argument("--angle", type=float, help="Travel azimuth (direction the air moves toward), deg")
    angle.add_argument("--angle-from", type=float, help="Direction the air comes from, deg")
    add_noise(p)
    add_output(p)
    p.set_defaults(handler=cmd_simulate, inputs=("config",))

    p = subparsers.add_parser("sweep", help="Rotary-table sweep as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--preset", choices=("fig7", "fig8"), default=None,
                   help="fig7: 135/180 deg, 0-45 m/s; fig8: 0-355 deg at 15/20/25/30 m/s")
    p.add_argument("--angles", type=_parse_list, default=_parse_list("0:360:45"),
                   help="Angles as a,b,c or start:stop:step (default 0:360:45)")
    p.add_argument("--speeds", type=_parse_list, default=_parse_list("15,20,25,30"),
                   help="Speeds as a,b,c or start:stop:step (default 15,20,25,30)")
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--workers", type=int, default=None, help="Worker threads (default QUADVANE_WORKERS)")
    add_noise(p)
    add_output(p)
    p.set_defaults(handler=cmd_sweep, inputs=("config",))

    p = subparsers.add_parser("calibrate", help="Speed calibration table as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--grid-step", type=_positive_float, default=0.5, help="Knot spacing, m/s")
    p.add_argument("--max-speed", type=_positive_float, default=MAX_MEASURABLE_SPEED, help="Last knot, m/s")
    p.add_argument("--angle", type=float, default=CALIBRATION_ANGLE, help="Flow direction used, deg")
    add_output(p)
    p.set_defaults(handler=cmd_calibrate, inputs=("config",))

    p = subparsers.add_parser("fit", help="Fit lobe coefficients from a sweep CSV")
    p.add_argument("--input", required=True, help="Sweep CSV")
    p.add_argument("--k-output", default=None, help="Also write per-speed K values to this CSV")
    add_output(p)
    p.set_defaults(handler=cmd_fit, inputs=("input",), extra_outputs=("k_output",))

    p = subparsers.add_parser("estimate", help="Estimate speed and direction for every row of a sweep CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--input", required=True, help="Sweep CSV")
    p.add_argument("--calibration", default=None, help="Calibration CSV (default: built from the config)")
    p.add_argument("--sigma", type=float, default=0.0, help="Noise sigma used for the direction threshold, ohm")
    add_output(p)
    p.set_defaults(handler=cmd_estimate, inputs=("config", "input", "calibration"))

    p = subparsers.add_parser("plotdata", help="Tidy plot data from a sweep CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--kind", choices=("angle", "speed"), required=True)
    add_output(p)
    p.set_defaults(handler=cmd_plotdata, inputs=("input",))

    p = subparsers.add_parser("selftest", help="Run the invariant suite")
    p.add_argument("--config", default=None, help="Sensor config file (default: reference device)")
    p.add_argument("--calibration", default=None, help="Calibration CSV to check")
    p.add_argument("--strict", action="store_true", help="Treat skipped checks as failures")
    add_output(p)
    p.set_defaults(handler=cmd_selftest, inputs=("config", "calibration"))

    p = subparsers.add_parser("init-config", help="Write the reference sensor config")
    add_output(p)
    p.set_defaults(handler=cmd_init_config, inputs=())

    p = subparsers.add_parser("describe", help="Print derived quantities of a config")
    p.add_argument("--config", default=None)
    add_output(p)
    p.set_defaults(handler=cmd_describe, inputs=("config",))

    return parser


def _check_paths(parser: argparse.ArgumentParser, args):
    """Validates every declared input and output path before any work starts."""
    for name in args.inputs:
        path = getattr(args, name, None)
        if path and not os.path.isfile(path):
            parser.error(f"--{name.replace('_', '-')}: file not found: {path}")
    for name in ("output",) + getattr(args, "extra_outputs", ()):
        path = getattr(args, name, None)
        if path:
            try:
                ensure_writable(path)
            except QuadvaneError as e:
                parser.error(f"--{name.replace('_', '-')}: {e}")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _check_paths(parser, args)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    setup_logging(args.log_level or env_config.LOG_LEVEL, args.log_file)
    logger.debug(f"Running command {args.command}")
    try:
        return args.handler(args)
    except (QuadvaneError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
