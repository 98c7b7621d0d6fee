"""Parametric description of the four-beam sensor: defaults, validation and the config file format."""
import math
import logging
from functools import lru_cache
from typing import Dict, List, Tuple

from .models.sensor import (
    BeamGeometry, Environment, LobeCoefficients, MaterialProps, ResistorGeometry, SensorConfig,
    normalize_angle,
)
from .models.response import BEAM_COUNT
from .transduction import (
    base_resistance, downwind_sensitivity, mean_resistor_strain, response_gains, second_moment,
)
from .utils.error_handler import ConfigParseError, ConfigValidationError, DomainError

logger = logging.getLogger(__name__)

# Sensitivity anchor of the reference device, ohm per m/s near 20 m/s
REFERENCE_SENSITIVITY = 0.0284
REFERENCE_SENSITIVITY_SPEED = 20.0
# Upper limit of the measurable speed range, m/s
MAX_MEASURABLE_SPEED = 45.0

NOMINAL_AZIMUTHS = (0.0, 90.0, 180.0, 270.0)
PERPENDICULAR_RATIO_LIMIT = 0.15

# --- Config file keys, in file order ---

_SCALAR_KEYS = {
    "resistor.length_um": ("resistor", "length_um"),
    "resistor.width_um": ("resistor", "width_um"),
    "resistor.thickness_um": ("resistor", "thickness_um"),
    "resistor.span_start_um": ("resistor", "span_start_um"),
    "resistor.span_end_um": ("resistor", "span_end_um"),
    "materials.resistivity_ohm_m": ("materials", "resistivity_ohm_m"),
    "materials.poisson_ratio": ("materials", "poisson_ratio"),
    "materials.youngs_modulus_pa": ("materials", "youngs_modulus_pa"),
    "lobe.a0": ("lobe", "a0"),
    "lobe.a1": ("lobe", "a1"),
    "lobe.a2": ("lobe", "a2"),
    "env.air_density_kg_per_m3": ("env", "air_density_kg_per_m3"),
    "env.drag_coefficient": ("env", "drag_coefficient"),
    "env.speed_exponent": ("env", "speed_exponent"),
    "response.scale": ("response", "scale"),
}

# beam.* keys accept one shared value or one value per beam
_BEAM_KEYS = {
    "beam.length_um": "length_um",
    "beam.width_um": "width_um",
    "beam.thickness_um": "thickness_um",
    "beam.pre_bend_um": "pre_bend_um",
    "beam.azimuth_deg": "azimuth_deg",
    "beam.misalignment_deg": "misalignment_deg",
}

CONFIG_KEYS = tuple(list(_SCALAR_KEYS)[:8]) + tuple(_BEAM_KEYS) + tuple(list(_SCALAR_KEYS)[8:])


def _untrimmed_default() -> SensorConfig:
    beams = tuple(
        BeamGeometry(length_um=1000.0, width_um=200.0, thickness_um=20.0, azimuth_deg=az)
        for az in NOMINAL_AZIMUTHS
    )
    return SensorConfig(
        beams=beams,
        resistor=ResistorGeometry(length_um=2000.0, width_um=10.0, thickness_um=0.1,
                                  span_start_um=0.0, span_end_um=400.0),
        # Handbook values: Pt film resistivity, Si modulus, Poisson ratio
        materials=MaterialProps(resistivity_ohm_m=1.06e-7, poisson_ratio=0.38, youngs_modulus_pa=160e9),
        lobe=LobeCoefficients(a0=1.0, a1=0.8, a2=0.9),
        env=Environment(),
        response_scale=1.0,
    )


@lru_cache(maxsize=1)
def default_config() -> SensorConfig:
    """Reference device, with the response scale trimmed to the reference sensitivity."""
    return trim_sensitivity(_untrimmed_default())


def trim_sensitivity(config: SensorConfig, target: float = REFERENCE_SENSITIVITY,
                     at_speed: float = REFERENCE_SENSITIVITY_SPEED) -> SensorConfig:
    """Returns a copy whose response scale makes the downwind-beam slope at `at_speed` equal `target`.

    Args:
        config: Config to trim; its current response scale is the starting point
        target: Desired d(dR)/dv of the downwind beam in ohm per m/s
        at_speed: Speed in m/s at which the slope is taken

    Returns:
        The trimmed SensorConfig
    """
    if not target > 0:
        raise DomainError(f"target sensitivity must be > 0, got {target}")
    slope = downwind_sensitivity(config, at_speed)
    if not slope > 0 or not math.isfinite(slope):
        raise DomainError(f"cannot trim: downwind sensitivity is {slope}")
    # The response is linear in S
    scale = config.response_scale * target / slope
    logger.info(f"Trimmed response scale {config.response_scale:.6g} -> {scale:.6g} "
                f"for {target} ohm/(m/s) at {at_speed} m/s")
    return config.with_scale(scale)


# --- Validation ---

def lobe_minimum(lobe: LobeCoefficients) -> Tuple[float, float]:
    """Minimum of g over all angles and the cos(phi) where it occurs.

    With c = cos(phi), g = 2 a2 c^2 + a1 c + (a0 - a2) on c in [-1, 1].
    """
    def g(c: float) -> float:
        return 2.0 * lobe.a2 * c * c + lobe.a1 * c + (lobe.a0 - lobe.a2)

    candidates = [-1.0, 1.0]
    if lobe.a2 > 0:
        vertex = -lobe.a1 / (4.0 * lobe.a2)
        if -1.0 < vertex < 1.0:
            candidates.append(vertex)
    c_min = min(candidates, key=g)
    return g(c_min), c_min


def _azimuths_distinct(azimuths: List[float]) -> List[Tuple[int, int]]:
    clashes = []
    for i in range(len(azimuths)):
        for j in range(i + 1, len(azimuths)):
            gap = abs(azimuths[i] - azimuths[j]) % 360.0
            if min(gap, 360.0 - gap) < 1e-9:
                clashes.append((i, j))
    return clashes


def validate(config: SensorConfig) -> List[str]:
    """Checks every config invariant.

    Returns:
        Violations as "<label>: <detail>" strings in a fixed order; empty when valid.
    """
    violations: List[str] = []

    def check(ok: bool, label: str, detail: str):
        if not ok:
            violations.append(f"{label}: {detail}")

    r = config.resistor
    check(r.length_um > 0, "l_R > 0", f"resistor length {r.length_um} um")
    check(r.width_um > 0, "w > 0", f"resistor width {r.width_um} um")
    check(r.thickness_um > 0, "t > 0", f"resistor thickness {r.thickness_um} um")
    check(0 <= r.span_start_um < r.span_end_um, "0 <= x0 < x1",
          f"resistor span [{r.span_start_um}, {r.span_end_um}] um")

    m = config.materials
    check(m.resistivity_ohm_m > 0, "rho_e > 0", f"resistivity {m.resistivity_ohm_m} ohm m")
    check(0 <= m.poisson_ratio < 0.5, "0 <= nu < 0.5", f"poisson ratio {m.poisson_ratio}")
    check(m.youngs_modulus_pa > 0, "E > 0", f"young's modulus {m.youngs_modulus_pa} Pa")

    check(len(config.beams) == BEAM_COUNT, "beam count", f"{len(config.beams)} beams, expected {BEAM_COUNT}")
    for i, b in enumerate(config.beams):
        check(b.length_um > 0, "L > 0", f"beam[{i}] length {b.length_um} um")
        check(b.width_um > 0, "w_b > 0", f"beam[{i}] width {b.width_um} um")
        check(b.thickness_um > 0, "t_b > 0", f"beam[{i}] thickness {b.thickness_um} um")
        check(b.pre_bend_um >= 0, "delta0 >= 0", f"beam[{i}] pre-bend {b.pre_bend_um} um")
        check(math.isfinite(b.azimuth_deg) and math.isfinite(b.misalignment_deg), "finite azimuth",
              f"beam[{i}] azimuth {b.azimuth_deg} deg, misalignment {b.misalignment_deg} deg")
        check(r.span_end_um <= b.length_um, "x1 <= L",
              f"resistor span end {r.span_end_um} um beyond beam[{i}] length {b.length_um} um")
    azimuths = [b.azimuth_deg for b in config.beams if math.isfinite(b.azimuth_deg)]
    for i, j in _azimuths_distinct(azimuths):
        check(False, "duplicate azimuth", f"beams {i} and {j} both at {normalize_angle(azimuths[i])} deg")

    lobe = config.lobe
    if all(math.isfinite(a) for a in (lobe.a0, lobe.a1, lobe.a2)):
        g_min, c_min = lobe_minimum(lobe)
        check(g_min >= 0, "lobe negativity",
              f"g reaches {g_min:.4g} at phi = {math.degrees(math.acos(c_min)):.1f} deg")
        check(lobe.a1 > 0, "lobe asymmetry", f"a1 = {lobe.a1} must be > 0 (downwind exceeds upwind)")
        g0 = lobe.a0 + lobe.a1 + lobe.a2
        g90 = lobe.a0 - lobe.a2
        check(g90 <= PERPENDICULAR_RATIO_LIMIT * g0, "lobe perpendicular",
              f"g(90) = {g90:.4g} exceeds {PERPENDICULAR_RATIO_LIMIT} * g(0) = {PERPENDICULAR_RATIO_LIMIT * g0:.4g}")
    else:
        check(False, "finite lobe", f"coefficients ({lobe.a0}, {lobe.a1}, {lobe.a2})")

    env = config.env
    check(env.air_density_kg_per_m3 > 0, "rho_air > 0", f"air density {env.air_density_kg_per_m3} kg/m3")
    check(env.drag_coefficient > 0, "C_d > 0", f"drag coefficient {env.drag_coefficient}")
    check(env.speed_exponent > 0, "speed exponent > 0", f"speed exponent {env.speed_exponent}")
    check(config.response_scale > 0 and math.isfinite(config.response_scale), "S > 0",
          f"response scale {config.response_scale}")

    if violations:
        logger.debug(f"Config validation found {len(violations)} violation(s)")
    return violations


# --- Config text format ---

def _parse_values(raw: str, key: str, line_number: int) -> List[float]:
    try:
        return [float(part) for part in raw.split(",")]
    except ValueError:
        raise ConfigParseError(f"invalid numeric value for '{key}': {raw.strip()!r}", line_number, key)


def parse_config(text: str) -> SensorConfig:
    """Parses config text into a SensorConfig without checking invariants."""
    values: Dict[str, List[float]] = {}
    for line_number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigParseError(f"expected 'section.key = value', got {content!r}", line_number)
        key, raw = (part.strip() for part in content.split("=", 1))
        if key not in _SCALAR_KEYS and key not in _BEAM_KEYS:
            raise ConfigParseError(f"unknown key '{key}'", line_number, key)
        if key in values:
            raise ConfigParseError(f"duplicate key '{key}'", line_number, key)
        parsed = _parse_values(raw, key, line_number)
        allowed = (1, BEAM_COUNT) if key in _BEAM_KEYS else (1,)
        if len(parsed) not in allowed:
            raise ConfigParseError(
                f"'{key}' takes {' or '.join(map(str, allowed))} value(s), got {len(parsed)}", line_number, key)
        values[key] = parsed

    for key in CONFIG_KEYS:
        if key not in values:
            raise ConfigParseError(f"missing key '{key}'", key=key)

    sections: Dict[str, Dict[str, float]] = {}
    for key, (section, field) in _SCALAR_KEYS.items():
        sections.setdefault(section, {})[field] = values[key][0]

    per_beam = [{} for _ in range(BEAM_COUNT)]
    for key, field in _BEAM_KEYS.items():
        vals = values[key] * BEAM_COUNT if len(values[key]) == 1 else values[key]
        for i in range(BEAM_COUNT):
            per_beam[i][field] = vals[i]

    return SensorConfig(
        beams=tuple(BeamGeometry(**b) for b in per_beam),
        resistor=ResistorGeometry(**sections["resistor"]),
        materials=MaterialProps(**sections["materials"]),
        lobe=LobeCoefficients(**sections["lobe"]),
        env=Environment(**sections["env"]),
        response_scale=sections["response"]["scale"],
    )


def load_config(text: str) -> SensorConfig:
    """Parses and validates config text.

    Raises:
        ConfigParseError: on syntax errors, unknown, duplicate or missing keys
        ConfigValidationError: when the parsed config breaks invariants
    """
    config = parse_config(text)
    violations = validate(config)
    if violations:
        raise ConfigValidationError(violations)
    return config


def _fmt(value: float) -> str:
    return repr(float(value))


def save_config(config: SensorConfig) -> str:
    """Serializes a config to the key-value text format; load_config inverts it exactly."""
    if len(config.beams) != BEAM_COUNT:
        raise DomainError(f"cannot save a config with {len(config.beams)} beams")
    lines = ["# quadvane sensor configuration",
             "# lengths in micrometres; beam.* keys take one shared value or four per-beam values"]
    section = None
    for key in CONFIG_KEYS:
        this_section = key.split(".", 1)[0]
        if this_section != section:
            lines.append("")
            section = this_section
        if key in _BEAM_KEYS:
            field = _BEAM_KEYS[key]
            vals = [getattr(b, field) for b in config.beams]
            if all(v == vals[0] for v in vals):
                vals = vals[:1]
            lines.append(f"{key} = {', '.join(_fmt(v) for v in vals)}")
        else:
            sec, field = _SCALAR_KEYS[key]
            owner = config if sec == "response" else getattr(config, sec)
            value = owner.response_scale if sec == "response" else getattr(owner, field)
            lines.append(f"{key} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


def describe_config(config: SensorConfig) -> Dict[str, float]:
    """Derived quantities of a config, including the stored pre-bend which the trim absorbs."""
    beam = config.beams[0]
    strain_per_load = mean_resistor_strain(1.0, beam, config.resistor.span, config.materials.youngs_modulus_pa)
    gains = response_gains(config)
    return {
        "base_resistance_ohm": base_resistance(config.resistor, config.materials.resistivity_ohm_m),
        "second_moment_m4": second_moment(beam),
        "strain_per_unit_load_m_per_n": strain_per_load,
        "gauge_factor": 1.0 + 2.0 * config.materials.poisson_ratio,
        "response_scale": config.response_scale,
        "max_pre_bend_um": max(b.pre_bend_um for b in config.beams),
        "gain_at_1_m_per_s_ohm": float(gains[0]),
        "downwind_sensitivity_ohm_per_m_per_s": downwind_sensitivity(config, REFERENCE_SENSITIVITY_SPEED),
        "lobe_minimum": lobe_minimum(config.lobe)[0],
    }
