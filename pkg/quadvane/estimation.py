"""Inverse problem: flow direction, flow speed and lobe coefficients from four-beam readings."""
import csv
import io
import math
import logging
from collections import defaultdict
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy import optimize

from .models.sensor import FlowCondition, LobeCoefficients, SensorConfig, normalize_angle
from .models.response import ResponseVector
from .models.estimate import CalibrationTable, EstimateResult, LobeFit, SpeedEstimate
from .models.sweep import NoiseModel, SweepRecord
from .sensor_model import MAX_MEASURABLE_SPEED, NOMINAL_AZIMUTHS
from .transduction import angular_lobe, angular_lobe_slope, beam_angles, forward_response, response_gains
from .utils.error_handler import (
    DomainError, FitError, IndeterminateDirectionError, ModelViolationError, SchemaError,
)

logger = logging.getLogger(__name__)

# Direction threshold when no noise model is attached, ohms
DEFAULT_DIRECTION_THRESHOLD = 1e-12
DEFAULT_SPEED_GRID = tuple(float(v) for v in np.linspace(0.0, MAX_MEASURABLE_SPEED, 91))
CALIBRATION_ANGLE = 180.0
MIN_FIT_ANGLES = 8
# Standard errors K a0 must clear for a speed to enter the lobe fit
FIT_SIGNIFICANCE = 3.0
CALIBRATION_HEADER = ("v_m_per_s", "sum_dR_ohm")


def direction_threshold(noise: Optional[NoiseModel] = None) -> float:
    """tau_dir: three noise sigmas, or a numerical floor when there is no noise."""
    if noise is None or noise.gaussian_sigma == 0.0:
        return DEFAULT_DIRECTION_THRESHOLD
    return 3.0 * noise.gaussian_sigma


# --- Direction ---

def estimate_direction(response: ResponseVector, lobe: LobeCoefficients,
                       threshold: float = DEFAULT_DIRECTION_THRESHOLD) -> float:
    """Travel azimuth in degrees from opposite-beam differences.

    Under the lobe model dR_0 - dR_180 = 2 a1 K cos(theta) and
    dR_90 - dR_270 = 2 a1 K sin(theta), so atan2 recovers theta exactly.

    Raises:
        DomainError: if a1 <= 0
        IndeterminateDirectionError: if the difference vector is shorter than `threshold`
    """
    if not lobe.a1 > 0:
        raise DomainError(f"direction decoding needs a1 > 0, got {lobe.a1}")
    dR = response.dR
    if not all(math.isfinite(x) for x in dR):
        raise DomainError(f"response contains non-finite values: {dR}")
    d_x = dR[0] - dR[2]
    d_y = dR[1] - dR[3]
    magnitude = math.hypot(d_x, d_y)
    if magnitude < threshold:
        raise IndeterminateDirectionError(magnitude, threshold)
    return normalize_angle(math.degrees(math.atan2(d_y, d_x)))


# --- Speed ---

def _check_grid(speed_grid: Sequence[float]) -> List[float]:
    grid = [float(v) for v in speed_grid]
    if len(grid) < 2:
        raise DomainError(f"speed grid needs at least 2 points, got {len(grid)}")
    if grid[0] != 0.0:
        raise DomainError(f"speed grid must start at 0, got {grid[0]}")
    if not all(math.isfinite(v) for v in grid):
        raise DomainError("speed grid contains non-finite values")
    for a, b in zip(grid, grid[1:]):
        if not b > a:
            raise DomainError(f"speed grid not strictly increasing at {a} -> {b}")
    return grid


def build_calibration(config: SensorConfig, speed_grid: Optional[Sequence[float]] = None,
                      angle_deg: float = CALIBRATION_ANGLE) -> CalibrationTable:
    """Tabulates the summed four-beam response against speed at a fixed flow direction."""
    grid = _check_grid(DEFAULT_SPEED_GRID if speed_grid is None else speed_grid)
    sums = [forward_response(config, FlowCondition(speed_m_per_s=v, travel_azimuth_deg=angle_deg)).sum_abs
            for v in grid]
    for i in range(1, len(sums)):
        if not sums[i] > sums[i - 1]:
            raise ModelViolationError(
                f"summed response not strictly increasing at {grid[i - 1]} -> {grid[i]} m/s "
                f"({sums[i - 1]} -> {sums[i]} ohm)")
    logger.info(f"Built calibration with {len(grid)} knots up to {grid[-1]} m/s (max sum {sums[-1]:.6g} ohm)")
    return CalibrationTable(knots=tuple(zip(grid, sums)))


@lru_cache(maxsize=8)
def default_calibration(config: SensorConfig) -> CalibrationTable:
    return build_calibration(config)


def estimate_speed(response: ResponseVector, table: CalibrationTable, method: str = "linear") -> SpeedEstimate:
    """Inverts the calibration curve at s = sum |dR_i|.

    Args:
        response: Four-beam reading
        table: Calibration table
        method: "linear" for direct piecewise-linear inversion, "bisect" for the bisection fallback

    Returns:
        SpeedEstimate, clamped to the last knot and flagged when s exceeds the table
    """
    if not all(math.isfinite(x) for x in response.dR):
        raise DomainError(f"response contains non-finite values: {response.dR}")
    s = response.sum_abs
    speeds = np.asarray(table.speeds)
    sums = np.asarray(table.sums)
    if s > table.max_sum:
        logger.warning(f"Summed response {s:.6g} ohm beyond calibration maximum {table.max_sum:.6g} ohm; "
                       f"clamping to {table.max_speed} m/s")
        return SpeedEstimate(v_hat=table.max_speed, out_of_range_speed=True)
    if s == 0.0:
        return SpeedEstimate(v_hat=0.0)
    if method == "linear":
        v_hat = float(np.interp(s, sums, speeds))
    elif method == "bisect":
        v_hat = float(optimize.bisect(lambda v: np.interp(v, speeds, sums) - s,
                                      0.0, table.max_speed, xtol=1e-13, maxiter=200))
    else:
        raise DomainError(f"unknown inversion method '{method}'")
    return SpeedEstimate(v_hat=v_hat)


# --- Lobe fitting ---

def fit_lobe(sweep: Iterable[SweepRecord], azimuths: Sequence[float] = NOMINAL_AZIMUTHS) -> LobeFit:
    """Least-squares fit of dR_i = K(v) (a0 + a1 cos phi_i + a2 cos 2 phi_i) with gauge a0 = 1.

    Each speed is solved linearly for (K a0, K a1, K a2). Speeds whose K a0 is not
    significant against that speed's residual standard error carry no lobe
    information and are dropped; the remaining ratios are averaged with weight K**2,
    since their spread scales as sigma / K.

    Raises:
        FitError: for fewer than 8 distinct angles, a rank-deficient design, or no usable speed
    """
    records = list(sweep)
    angles = {round(normalize_angle(r.angle_travel_deg), 9) for r in records}
    if len(angles) < MIN_FIT_ANGLES:
        raise FitError(f"insufficient angular coverage: {len(angles)} distinct angle(s), "
                       f"at least {MIN_FIT_ANGLES} required")

    by_speed: Dict[float, List[SweepRecord]] = defaultdict(list)
    for r in records:
        by_speed[r.v_true_m_per_s].append(r)

    az = np.asarray(azimuths, dtype=float)
    designs = {}
    ratios = []
    weights = []
    k_by_speed: Dict[float, float] = {}
    for speed in sorted(by_speed):
        group = by_speed[speed]
        phi = np.radians(np.array([r.angle_travel_deg for r in group])[:, None] - az[None, :]).ravel()
        X = np.column_stack([np.ones_like(phi), np.cos(phi), np.cos(2.0 * phi)])
        y = np.array([r.dR for r in group], dtype=float).ravel()
        if np.linalg.matrix_rank(X) < 3:
            raise FitError(f"rank-deficient design at {speed} m/s: angles do not separate the three harmonics")
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        residual = y - X @ coef
        dof = max(y.size - 3, 1)
        std_error = math.sqrt(float(residual @ residual) / dof * float(np.linalg.inv(X.T @ X)[0, 0]))
        if speed == 0.0 or not coef[0] > FIT_SIGNIFICANCE * std_error:
            logger.info(f"Skipping {speed} m/s in lobe fit: no resolvable response "
                        f"(K a0 = {coef[0]:.3g}, standard error {std_error:.3g})")
            continue
        ratios.append(coef[1:] / coef[0])
        weights.append(coef[0] ** 2)
        k_by_speed[float(speed)] = float(coef[0])
        designs[speed] = (X, y)

    if not ratios:
        raise FitError("no speed with a nonzero response to fit")

    r1, r2 = np.average(ratios, axis=0, weights=weights)
    lobe = LobeCoefficients(a0=1.0, a1=float(r1), a2=float(r2))
    basis = np.array([1.0, r1, r2])
    squared, count = 0.0, 0
    for speed, (X, y) in designs.items():
        residual = y - k_by_speed[float(speed)] * (X @ basis)
        squared += float(residual @ residual)
        count += residual.size
    rms = math.sqrt(squared / count)
    logger.info(f"Fitted lobe a1={r1:.6g} a2={r2:.6g} over {len(k_by_speed)} speed(s), residual {rms:.3g} ohm")
    return LobeFit(lobe=lobe, k_by_speed=k_by_speed, residual=rms)


# --- Joint estimate ---

class _LobeModel:
    """dR_i(v, theta) = c_i v**n g(theta - theta_i) and its Jacobian."""

    def __init__(self, config: SensorConfig):
        self.gains = response_gains(config)
        self.exponent = config.env.speed_exponent
        self.lobe = config.lobe
        self.config = config

    def predict(self, v: float, theta_deg: float) -> np.ndarray:
        phi = beam_angles(self.config, theta_deg)
        return self.gains * v ** self.exponent * angular_lobe(phi, self.lobe)

    def jacobian(self, v: float, theta_deg: float) -> np.ndarray:
        phi = beam_angles(self.config, theta_deg)
        d_v = self.gains * self.exponent * v ** (self.exponent - 1.0) * angular_lobe(phi, self.lobe)
        d_theta = self.gains * v ** self.exponent * angular_lobe_slope(phi, self.lobe)
        return np.column_stack([d_v, d_theta])


def _rms(residual: np.ndarray) -> float:
    return float(np.sqrt(np.mean(residual ** 2)))


def joint_estimate(response: ResponseVector, config: SensorConfig,
                   table: Optional[CalibrationTable] = None,
                   threshold: float = DEFAULT_DIRECTION_THRESHOLD,
                   max_iterations: int = 50, tolerance: float = 1e-10) -> EstimateResult:
    """Speed and direction from one reading: closed-form initial guess, then Gauss-Newton.

    Steps are taken in (v / v_scale, theta in radians) and halved until the sum of
    squares decreases, so the result is never worse than the initial guess.
    """
    y = np.asarray(response.dR, dtype=float)
    if not np.all(np.isfinite(y)):
        raise DomainError(f"response contains non-finite values: {response.dR}")
    table = table if table is not None else default_calibration(config)

    speed = estimate_speed(response, table)
    indeterminate = False
    try:
        theta = estimate_direction(response, config.lobe, threshold)
    except IndeterminateDirectionError as e:
        logger.warning(f"Direction left at 0 deg: {e}")
        theta, indeterminate = 0.0, True

    model = _LobeModel(config)
    v = speed.v_hat
    best = _rms(y - model.predict(v, theta))
    if indeterminate or speed.out_of_range_speed or v == 0.0:
        return EstimateResult(v_hat=v, theta_hat=theta, residual=best,
                              indeterminate_direction=indeterminate or v == 0.0,
                              out_of_range_speed=speed.out_of_range_speed)

    v_scale = max(v, 1.0)
    converged = False
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        if best == 0.0:
            converged = True
            break
        r = y - model.predict(v, theta)
        # columns: d/d(v / v_scale), d/d(theta in radians)
        J = model.jacobian(v, theta) * np.array([v_scale, 1.0])
        step, *_ = np.linalg.lstsq(J, r, rcond=None)
        alpha = 1.0
        accepted = False
        while alpha > 1e-9:
            v_new = max(v + alpha * step[0] * v_scale, 0.0)
            theta_new = theta + alpha * math.degrees(step[1])
            cost = _rms(y - model.predict(v_new, theta_new))
            if cost < best:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            converged = True
            break
        moved = alpha * float(np.hypot(*step))
        v, theta, best = v_new, theta_new, cost
        if moved < tolerance:
            converged = True
            break

    if not converged:
        logger.warning(f"Gauss-Newton stopped after {max_iterations} iterations without converging "
                       f"(residual {best:.3g} ohm)")
    return EstimateResult(v_hat=v, theta_hat=normalize_angle(theta), residual=best,
                          iterations=iterations, converged=converged)


# --- Calibration CSV ---

def calibration_to_csv(table: CalibrationTable) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CALIBRATION_HEADER)
    for v, s in table.knots:
        writer.writerow((format(v, ".17g"), format(s, ".17g")))
    return out.getvalue()


def calibration_from_csv(text: str) -> CalibrationTable:
    """Parses a calibration CSV, reporting header, row and column problems as SchemaError."""
    reader = csv.DictReader(io.StringIO(text))
    header = [h.strip() for h in (reader.fieldnames or [])]
    if sorted(header) != sorted(CALIBRATION_HEADER):
        raise SchemaError(f"calibration header must be {', '.join(CALIBRATION_HEADER)}; got {header}", row=1)
    reader.fieldnames = header
    knots = []
    for row_number, row in enumerate(reader, start=2):
        pair = []
        for column in CALIBRATION_HEADER:
            raw = row.get(column)
            try:
                pair.append(float(raw))
            except (TypeError, ValueError):
                raise SchemaError(f"not a number: {raw!r}", row=row_number, column=column)
        knots.append(tuple(pair))
    try:
        return CalibrationTable(knots=tuple(knots))
    except ValueError as e:
        raise SchemaError(f"calibration table invalid: {e}") from e
