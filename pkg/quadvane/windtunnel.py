"""Virtual wind tunnel: rotary-table sweeps with an LCR-meter noise model and CSV datasets."""
import csv
import io
import math
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .models.sensor import FlowCondition, SensorConfig, normalize_angle
from .models.sweep import NoiseModel, SweepRecord
from .sensor_model import MAX_MEASURABLE_SPEED, NOMINAL_AZIMUTHS, validate
from .transduction import forward_response
from .utils.config import DEFAULT_WORKERS
from .utils.error_handler import ConfigValidationError, DomainError, SchemaError

logger = logging.getLogger(__name__)

SWEEP_HEADER = (
    "angle_travel_deg", "angle_from_deg", "v_true_m_per_s",
    "dR0_ohm", "dR90_ohm", "dR180_ohm", "dR270_ohm",
    "dR0_clean_ohm", "dR90_clean_ohm", "dR180_clean_ohm", "dR270_clean_ohm",
    "replicate",
)
_DR_COLUMNS = SWEEP_HEADER[3:7]
_CLEAN_COLUMNS = SWEEP_HEADER[7:11]

FIG7_ANGLES = (135.0, 180.0)
FIG8_SPEEDS = (15.0, 20.0, 25.0, 30.0)


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def apply_noise(clean: Sequence[float], noise: NoiseModel, record_index: int) -> Tuple[float, ...]:
    """Noisy, quantized reading for one record.

    The generator is seeded from (seed, record_index) so a record's noise does
    not depend on which worker produced it or in which order.
    """
    if noise.is_noiseless:
        return tuple(float(x) for x in clean)
    values = np.asarray(clean, dtype=float)
    if noise.gaussian_sigma > 0:
        rng = np.random.default_rng([noise.seed, record_index])
        values = values + noise.gaussian_sigma * rng.standard_normal(values.size)
    if noise.quantization_step > 0:
        values = np.round(values / noise.quantization_step) * noise.quantization_step
    return tuple(float(x) for x in values)


def _check_finite(name: str, values: Sequence[float]) -> List[float]:
    out = [float(v) for v in values]
    bad = [v for v in out if not math.isfinite(v)]
    if bad:
        raise DomainError(f"{name} contain non-finite values: {bad}")
    return out


def run_sweep(config: SensorConfig, angles: Sequence[float], speeds: Sequence[float],
              noise: NoiseModel, replicates: int = 1, workers: Optional[int] = None) -> List[SweepRecord]:
    """Measures every (angle, speed, replicate) grid point, sorted lexicographically whatever the input order.

    Args:
        config: Sensor under test
        angles: Rotary-table travel azimuths in degrees
        speeds: Pitot reference speeds in m/s
        noise: Read-out noise model
        replicates: Repeated readings per grid point
        workers: Worker threads (default QUADVANE_WORKERS); output is identical for any count

    Returns:
        One SweepRecord per grid point
    """
    violations = validate(config)
    if violations:
        raise ConfigValidationError(violations)
    angles = sorted(_check_finite("angles", angles), key=normalize_angle)
    speeds = sorted(_check_finite("speeds", speeds))
    if any(v < 0 for v in speeds):
        raise DomainError(f"speeds must be >= 0, got {min(speeds)}")
    if replicates < 1:
        raise DomainError(f"replicates must be >= 1, got {replicates}")
    workers = workers or DEFAULT_WORKERS

    grid = [(angle, speed, rep) for angle in angles for speed in speeds for rep in range(replicates)]

    def measure(indexed):
        index, (angle, speed, rep) = indexed
        flow = FlowCondition(speed_m_per_s=speed, travel_azimuth_deg=angle)
        clean = forward_response(config, flow).dR
        return SweepRecord(
            angle_travel_deg=flow.travel_azimuth_deg,
            angle_from_deg=flow.angle_from_deg,
            v_true_m_per_s=speed,
            dR=apply_noise(clean, noise, index),
            dR_clean=clean,
            replicate=rep,
        )

    if workers == 1:
        records = [measure(item) for item in enumerate(grid)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(measure, enumerate(grid)))
    logger.info(f"Sweep produced {len(records)} records ({len(angles)} angles x {len(speeds)} speeds x "
                f"{replicates} replicate(s), {workers} worker(s), seed {noise.seed})")
    return records


def fig7_dataset(config: SensorConfig, noise: NoiseModel, speed_step: float = 0.5,
                 workers: Optional[int] = None) -> List[SweepRecord]:
    """Speed sweep 0 -> 45 m/s at travel azimuths 135 and 180 deg."""
    count = int(round(MAX_MEASURABLE_SPEED / speed_step))
    speeds = [i * speed_step for i in range(count + 1)]
    return run_sweep(config, FIG7_ANGLES, speeds, noise, workers=workers)


def fig8_dataset(config: SensorConfig, noise: NoiseModel, angle_step: float = 5.0,
                 workers: Optional[int] = None) -> List[SweepRecord]:
    """Full-turn angle sweep at 15, 20, 25 and 30 m/s."""
    count = int(round(360.0 / angle_step))
    angles = [i * angle_step for i in range(count)]
    return run_sweep(config, angles, FIG8_SPEEDS, noise, workers=workers)


# --- CSV ---

def export_csv(records: Iterable[SweepRecord]) -> str:
    """Sweep records as CSV with a header row and 17 significant digits per float."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for r in records:
        writer.writerow(
            [_fmt(r.angle_travel_deg), _fmt(r.angle_from_deg), _fmt(r.v_true_m_per_s)]
            + [_fmt(x) for x in r.dR]
            + [_fmt(x) for x in r.dR_clean]
            + [str(r.replicate)]
        )
    return out.getvalue()


def check_header(fieldnames: Optional[Sequence[str]], required: Sequence[str],
                 allow_extra: bool = False) -> List[str]:
    """Validates a CSV header by column name; columns may appear in any order."""
    header = [name.strip() for name in (fieldnames or [])]
    if not header:
        raise SchemaError("missing header row", row=1)
    duplicates = sorted({name for name in header if header.count(name) > 1})
    if duplicates:
        raise SchemaError(f"duplicate columns {duplicates}", row=1)
    for name in required:
        if name not in header:
            raise SchemaError("missing required column", row=1, column=name)
    if not allow_extra:
        for name in header:
            if name not in required:
                raise SchemaError("unknown column", row=1, column=name)
    return header


def _parse_float(row: dict, column: str, row_number: int) -> float:
    raw = row.get(column)
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise SchemaError(f"not a number: {raw!r}", row=row_number, column=column)


def parse_record(row: dict, row_number: int) -> SweepRecord:
    """Binds one CSV row (by column name) to a SweepRecord."""
    raw_rep = row.get("replicate")
    try:
        replicate = int(raw_rep)
    except (TypeError, ValueError):
        raise SchemaError(f"not an integer: {raw_rep!r}", row=row_number, column="replicate")
    try:
        return SweepRecord(
            angle_travel_deg=_parse_float(row, "angle_travel_deg", row_number),
            angle_from_deg=_parse_float(row, "angle_from_deg", row_number),
            v_true_m_per_s=_parse_float(row, "v_true_m_per_s", row_number),
            dR=tuple(_parse_float(row, c, row_number) for c in _DR_COLUMNS),
            dR_clean=tuple(_parse_float(row, c, row_number) for c in _CLEAN_COLUMNS),
            replicate=replicate,
        )
    except ValueError as e:
        raise SchemaError(f"inconsistent record: {e}", row=row_number) from e


def import_csv(text: str) -> List[SweepRecord]:
    """Parses sweep CSV text; columns are bound by header name."""
    reader = csv.DictReader(io.StringIO(text))
    reader.fieldnames = check_header(reader.fieldnames, SWEEP_HEADER)
    return [parse_record(row, row_number) for row_number, row in enumerate(reader, start=2)]


# --- Plot data ---

def angle_plot_csv(records: Iterable[SweepRecord], azimuths: Sequence[float] = NOMINAL_AZIMUTHS) -> str:
    """Tidy rows of response per beam against flow angle."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("v_m_per_s", "angle_travel_deg", "beam_azimuth_deg", "dR_ohm"))
    for r in records:
        for az, value in zip(azimuths, r.dR):
            writer.writerow((_fmt(r.v_true_m_per_s), _fmt(r.angle_travel_deg), _fmt(az), _fmt(value)))
    return out.getvalue()


def speed_plot_csv(records: Iterable[SweepRecord]) -> str:
    """Tidy rows of summed absolute response against flow speed."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("angle_travel_deg", "v_m_per_s", "sum_abs_dR_ohm"))
    for r in records:
        writer.writerow((_fmt(r.angle_travel_deg), _fmt(r.v_true_m_per_s), _fmt(sum(abs(x) for x in r.dR))))
    return out.getvalue()
