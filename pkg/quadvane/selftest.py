"""Invariant suite behind the `selftest` subcommand."""
import logging
from enum import Enum
from typing import Callable, List, NamedTuple, Optional

import numpy as np

from .models.sensor import BeamGeometry, FlowCondition, SensorConfig
from .models.response import RelativeChanges
from .models.sweep import NoiseModel
from .sensor_model import (
    MAX_MEASURABLE_SPEED, REFERENCE_SENSITIVITY, REFERENCE_SENSITIVITY_SPEED, trim_sensitivity, validate,
)
from .transduction import (
    angular_lobe, differential_dR_over_R, downwind_sensitivity, forward_response, gauge_dR_over_R,
    mean_resistor_strain, mean_resistor_strain_numeric, resistance,
)
from .estimation import build_calibration, calibration_from_csv, estimate_direction, estimate_speed, fit_lobe
from .windtunnel import export_csv, fig8_dataset, run_sweep
from .utils.error_handler import safe_call

logger = logging.getLogger(__name__)

SELFTEST_SEED = 20080101
# Violation label that only rules out direction decoding
DIRECTION_VIOLATION = "lobe asymmetry"


class CheckStatus(Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    SKIP = "SKIP"


class CheckResult(NamedTuple):
    name: str
    status: CheckStatus
    detail: str


def _outcome(ok: bool, detail: str) -> CheckResult:
    return CheckResult("", CheckStatus.PASS if ok else CheckStatus.FAIL, detail)


def _direction_skip(config: SensorConfig) -> Optional[CheckResult]:
    if not config.lobe.a1 > 0:
        return CheckResult("", CheckStatus.SKIP, f"indeterminate: a1 = {config.lobe.a1}, direction is not decodable")
    return None


def _is_direction_violation(violation: str) -> bool:
    return violation.startswith(f"{DIRECTION_VIOLATION}:")


# --- Checks ---

def check_config(config: SensorConfig) -> CheckResult:
    """FAIL on any violation, except a lone lobe-asymmetry violation which only makes direction indeterminate."""
    violations = validate(config)
    if not violations:
        return _outcome(True, "no violations")
    if all(_is_direction_violation(v) for v in violations):
        return CheckResult("", CheckStatus.SKIP, "indeterminate: " + "; ".join(violations))
    return _outcome(False, "; ".join(violations))


def check_gauge_consistency(config: SensorConfig) -> CheckResult:
    rng = np.random.default_rng(SELFTEST_SEED)
    worst = 0.0
    for eps, nu in zip(rng.uniform(-1e-3, 1e-3, 10_000), rng.uniform(0.0, 0.49, 10_000)):
        a = gauge_dR_over_R(float(eps), float(nu))
        b = differential_dR_over_R(RelativeChanges(d_l=float(eps), d_w=float(-nu * eps), d_t=float(-nu * eps)))
        worst = max(worst, abs(a - b) / max(abs(a), 1e-300))
    return _outcome(worst <= 1e-12, f"max relative gap {worst:.2e} over 10000 draws")


def check_finite_difference(config: SensorConfig) -> CheckResult:
    r, rho = config.resistor, config.materials.resistivity_ohm_m
    h = 1e-6
    base = resistance(r.length, r.width, r.thickness, rho)
    worst = 0.0
    for field in ("d_rho", "d_l", "d_w", "d_t"):
        factors = {name: (1.0 + h if name == field else 1.0) for name in ("d_rho", "d_l", "d_w", "d_t")}
        bumped = resistance(r.length * factors["d_l"], r.width * factors["d_w"],
                            r.thickness * factors["d_t"], rho * factors["d_rho"])
        measured = (bumped - base) / base
        predicted = differential_dR_over_R(RelativeChanges(**{field: h}))
        worst = max(worst, abs(measured - predicted) / abs(predicted))
    return _outcome(worst <= 1e-4, f"max relative gap {worst:.2e} at h = {h}")


def check_strain_oracle(config: SensorConfig) -> CheckResult:
    rng = np.random.default_rng(SELFTEST_SEED)
    worst = 0.0
    for _ in range(100):
        length_um = rng.uniform(200.0, 3000.0)
        beam = BeamGeometry(length_um=length_um, width_um=rng.uniform(50.0, 500.0),
                            thickness_um=rng.uniform(2.0, 50.0), azimuth_deg=0.0)
        x0 = rng.uniform(0.0, 0.5) * beam.length
        x1 = x0 + rng.uniform(0.05, 1.0) * (beam.length - x0)
        q, E = rng.uniform(0.01, 10.0), rng.uniform(50e9, 300e9)
        closed = mean_resistor_strain(q, beam, (x0, x1), E)
        numeric = mean_resistor_strain_numeric(q, beam, (x0, x1), E)
        worst = max(worst, abs(closed - numeric) / closed)
    return _outcome(worst <= 1e-6, f"max relative gap {worst:.2e} over 100 geometries")


def check_lobe_nonnegative(config: SensorConfig) -> CheckResult:
    g = angular_lobe(np.arange(0.0, 360.0, 0.1), config.lobe)
    return _outcome(float(g.min()) >= 0.0, f"min g = {float(g.min()):.4g} on a 0.1 deg grid")


def check_sum_invariance(config: SensorConfig) -> CheckResult:
    sums = [forward_response(config, FlowCondition(speed_m_per_s=20.0, travel_azimuth_deg=a)).sum_abs
            for a in range(360)]
    spread = (max(sums) - min(sums)) / max(sums)
    return _outcome(spread <= 1e-12, f"relative spread {spread:.2e} over 360 directions at 20 m/s")


def check_monotone_speed(config: SensorConfig) -> CheckResult:
    speeds = np.linspace(0.0, MAX_MEASURABLE_SPEED, 451)
    sums = [forward_response(config, FlowCondition(speed_m_per_s=float(v), travel_azimuth_deg=180.0)).sum_abs
            for v in speeds]
    ok = all(b > a for a, b in zip(sums, sums[1:]))
    return _outcome(ok, f"sum of |dR| {'strictly' if ok else 'not strictly'} increasing on [0, 45] m/s")


def check_beam_ordering(config: SensorConfig) -> CheckResult:
    skipped = _direction_skip(config)
    if skipped:
        return skipped
    failures = []
    for v in (15.0, 20.0, 25.0, 30.0):
        for k in range(4):
            dR = forward_response(config, FlowCondition(speed_m_per_s=v, travel_azimuth_deg=90.0 * k)).dR
            down, side_a, up, side_b = (dR[(k + j) % 4] for j in range(4))
            # upwind is the smallest response that is not "almost zero"
            if not (down > up > max(side_a, side_b) and up > 0 and max(side_a, side_b) <= 0.15 * down):
                failures.append(f"{v} m/s @ {90 * k} deg")
    return _outcome(not failures, "downwind > upwind > perpendicular, perpendicular <= 0.15 x downwind"
                    if not failures else "violated at " + ", ".join(failures))


def check_direction_round_trip(config: SensorConfig) -> CheckResult:
    skipped = _direction_skip(config)
    if skipped:
        return skipped
    worst = 0.0
    for v in (1.0, 5.0, 20.0, 45.0):
        for a in range(360):
            theta = estimate_direction(
                forward_response(config, FlowCondition(speed_m_per_s=v, travel_azimuth_deg=a)), config.lobe)
            err = abs((theta - a + 180.0) % 360.0 - 180.0)
            worst = max(worst, err)
    return _outcome(worst <= 1e-6, f"max decode error {worst:.2e} deg over 1440 flows")


def check_speed_round_trip(config: SensorConfig) -> CheckResult:
    table = build_calibration(config, np.linspace(0.0, MAX_MEASURABLE_SPEED, 45001))
    worst = 0.0
    # midway between calibration knots, where interpolation error peaks
    for v in np.arange(0.2505, MAX_MEASURABLE_SPEED, 0.5):
        response = forward_response(config, FlowCondition(speed_m_per_s=float(v), travel_azimuth_deg=77.0))
        worst = max(worst, abs(estimate_speed(response, table).v_hat - v))
    return _outcome(worst <= 1e-5, f"max speed error {worst:.2e} m/s between 0.001 m/s knots")


def check_sensitivity_trim(config: SensorConfig) -> CheckResult:
    slope = downwind_sensitivity(trim_sensitivity(config), REFERENCE_SENSITIVITY_SPEED)
    gap = abs(slope - REFERENCE_SENSITIVITY) / REFERENCE_SENSITIVITY
    return _outcome(gap <= 0.01, f"trimmed slope {slope:.6g} ohm/(m/s), relative gap {gap:.2e}")


def check_lobe_fit(config: SensorConfig) -> CheckResult:
    skipped = _direction_skip(config)
    if skipped:
        return skipped
    fit = fit_lobe(fig8_dataset(config, NoiseModel.noiseless()))
    expected = (config.lobe.a1 / config.lobe.a0, config.lobe.a2 / config.lobe.a0)
    gap = max(abs(fit.lobe.a1 - expected[0]), abs(fit.lobe.a2 - expected[1]))
    return _outcome(gap <= 1e-9, f"recovered (a1, a2) = ({fit.lobe.a1:.12g}, {fit.lobe.a2:.12g}), gap {gap:.1e}")


def check_determinism(config: SensorConfig) -> CheckResult:
    if validate(config):
        return CheckResult("", CheckStatus.SKIP, "indeterminate: sweeps refuse a config with violations")
    noise = NoiseModel(seed=SELFTEST_SEED)
    angles, speeds = list(range(0, 360, 45)), [15.0, 20.0, 25.0, 30.0]
    single = export_csv(run_sweep(config, angles, speeds, noise, workers=1))
    parallel = export_csv(run_sweep(config, angles, speeds, noise, workers=4))
    return _outcome(single == parallel, "1 and 4 workers give identical bytes"
                    if single == parallel else "outputs differ between worker counts")


CHECKS: List[tuple] = [
    ("config validation", check_config),
    ("gauge vs differential relation", check_gauge_consistency),
    ("finite-difference dR/R", check_finite_difference),
    ("strain closed form vs trapezoid", check_strain_oracle),
    ("lobe nonnegativity", check_lobe_nonnegative),
    ("sum invariance", check_sum_invariance),
    ("speed monotonicity", check_monotone_speed),
    ("beam ordering", check_beam_ordering),
    ("direction round trip", check_direction_round_trip),
    ("speed round trip", check_speed_round_trip),
    ("sensitivity trim", check_sensitivity_trim),
    ("lobe fit recovery", check_lobe_fit),
    ("sweep determinism", check_determinism),
]


def _run_one(name: str, check: Callable[[], CheckResult]) -> CheckResult:
    ok, result, exc = safe_call(check, f"Self-test check '{name}' raised")
    if not ok:
        return CheckResult(name, CheckStatus.FAIL, f"{type(exc).__name__}: {exc}")
    return result._replace(name=name)


def run_selftest(config: SensorConfig, calibration_text: Optional[str] = None) -> List[CheckResult]:
    """Runs every invariant check against a config and, if given, a calibration CSV."""
    results = [_run_one(name, lambda check=check: check(config)) for name, check in CHECKS]
    if calibration_text is None:
        results.append(CheckResult("calibration file schema", CheckStatus.SKIP, "no calibration file given"))
    else:
        ok, table, exc = safe_call(calibration_from_csv, "Calibration file rejected", calibration_text)
        results.append(CheckResult("calibration file schema", CheckStatus.PASS if ok else CheckStatus.FAIL,
                                   f"{len(table.knots)} knots" if ok else f"schema failure: {exc}"))
    failed = sum(r.status is CheckStatus.FAIL for r in results)
    logger.info(f"Self-test finished: {len(results)} checks, {failed} failed")
    return results


def format_table(results: List[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check'.ljust(width)}  status  detail"]
    for r in results:
        lines.append(f"{r.name.ljust(width)}  {r.status.value:<6}  {r.detail}")
    return "\n".join(lines) + "\n"


def selftest_passed(results: List[CheckResult], strict: bool = False) -> bool:
    """True when nothing failed; in strict mode skipped checks count as failures."""
    bad = {CheckStatus.FAIL, CheckStatus.SKIP} if strict else {CheckStatus.FAIL}
    return not any(r.status in bad for r in results)
