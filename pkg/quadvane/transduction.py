"""Forward physics chain of the four-beam sensor.

Resistance of the film resistor, its full differential, the strain-to-resistance
gauge relation, cantilever bending under a uniform aerodynamic load, the angular
lobe of each beam and the composed four-beam response.
"""
import math
import logging
from typing import Tuple, Union

import numpy as np
from scipy import integrate

from .models.sensor import BeamGeometry, LobeCoefficients, ResistorGeometry, SensorConfig, FlowCondition
from .models.response import RelativeChanges, ResponseVector
from .utils.error_handler import DomainError

logger = logging.getLogger(__name__)

# Small-strain regime guard for relative changes and strains
SMALL_STRAIN_LIMIT = 0.1

ArrayLike = Union[float, np.ndarray]


def resistance(length: float, width: float, thickness: float, resistivity: float) -> float:
    """R = rho * l_R / (w * t), all SI."""
    for name, value in (("length", length), ("width", width),
                        ("thickness", thickness), ("resistivity", resistivity)):
        if not math.isfinite(value) or value <= 0:
            raise DomainError(f"resistor {name} must be finite and > 0, got {value}")
    return resistivity * length / (width * thickness)


def base_resistance(resistor: ResistorGeometry, resistivity: float) -> float:
    """Unstrained resistance of the film resistor in ohms."""
    return resistance(resistor.length, resistor.width, resistor.thickness, resistivity)


def differential_dR_over_R(changes: RelativeChanges) -> float:
    """dR/R = drho/rho + dl/l - dw/w - dt/t."""
    for name, value in zip(("d_rho", "d_l", "d_w", "d_t"), changes.as_tuple()):
        if not math.isfinite(value):
            raise DomainError(f"{name} must be finite, got {value}")
        if abs(value) >= SMALL_STRAIN_LIMIT:
            raise DomainError(f"{name} = {value} outside the small-strain regime (|x| < {SMALL_STRAIN_LIMIT})")
    return changes.d_rho + changes.d_l - changes.d_w - changes.d_t


def gauge_dR_over_R(strain: float, poisson_ratio: float) -> float:
    """dR/R ~ (1 + 2 nu) * strain for a film whose resistivity does not change."""
    if not 0.0 <= poisson_ratio < 0.5:
        raise DomainError(f"poisson ratio must lie in [0, 0.5), got {poisson_ratio}")
    if not math.isfinite(strain) or abs(strain) >= SMALL_STRAIN_LIMIT:
        raise DomainError(f"strain {strain} outside the small-strain regime (|x| < {SMALL_STRAIN_LIMIT})")
    return (1.0 + 2.0 * poisson_ratio) * strain


def angular_lobe(phi_deg: ArrayLike, lobe: LobeCoefficients) -> ArrayLike:
    """g(phi) = a0 + a1 cos(phi) + a2 cos(2 phi), phi in degrees, measured from the beam azimuth."""
    phi = np.radians(phi_deg)
    g = lobe.a0 + lobe.a1 * np.cos(phi) + lobe.a2 * np.cos(2.0 * phi)
    return float(g) if np.ndim(g) == 0 else g


def angular_lobe_slope(phi_deg: ArrayLike, lobe: LobeCoefficients) -> ArrayLike:
    """dg/dphi per radian."""
    phi = np.radians(phi_deg)
    dg = -lobe.a1 * np.sin(phi) - 2.0 * lobe.a2 * np.sin(2.0 * phi)
    return float(dg) if np.ndim(dg) == 0 else dg


def load_scale(speed: float, beam: BeamGeometry, config: SensorConfig) -> float:
    """0.5 * rho_air * C_d * v**n * w_b * S: the load before the angular lobe is applied."""
    if not math.isfinite(speed) or speed < 0:
        raise DomainError(f"flow speed must be finite and >= 0, got {speed}")
    env = config.env
    return (0.5 * env.air_density_kg_per_m3 * env.drag_coefficient
            * speed ** env.speed_exponent * beam.width * config.response_scale)


def distributed_load(speed: float, phi_deg: float, config: SensorConfig, beam_index: int = 0) -> float:
    """Uniform aerodynamic line load on a beam in N/m."""
    beam = config.beams[beam_index]
    return load_scale(speed, beam, config) * angular_lobe(phi_deg, config.lobe)


def second_moment(beam: BeamGeometry) -> float:
    """I = w_b * t_b**3 / 12."""
    return beam.width * beam.thickness ** 3 / 12.0


def _check_span(beam: BeamGeometry, span: Tuple[float, float]) -> Tuple[float, float]:
    x0, x1 = span
    if not x1 > x0:
        raise DomainError(f"degenerate resistor span [{x0}, {x1}]")
    if x0 < 0 or x1 > beam.length * (1 + 1e-12):
        raise DomainError(f"resistor span [{x0}, {x1}] outside beam of length {beam.length}")
    return x0, x1


def mean_resistor_strain(load: float, beam: BeamGeometry, span: Tuple[float, float],
                         youngs_modulus: float) -> float:
    """Mean surface strain over the resistor footprint of a cantilever under uniform load.

    M(x) = q (L - x)^2 / 2 and strain(x) = M(x) (t_b / 2) / (E I); the mean over
    [x0, x1] integrates in closed form.
    """
    if not math.isfinite(load) or load < 0:
        raise DomainError(f"line load must be finite and >= 0, got {load}")
    x0, x1 = _check_span(beam, span)
    L = beam.length
    EI = youngs_modulus * second_moment(beam)
    return load * beam.thickness * ((L - x0) ** 3 - (L - x1) ** 3) / (12.0 * EI * (x1 - x0))


def mean_resistor_strain_numeric(load: float, beam: BeamGeometry, span: Tuple[float, float],
                                 youngs_modulus: float, panels: int = 10_000) -> float:
    """Trapezoid-rule evaluation of the same mean strain; reference for the closed form."""
    x0, x1 = _check_span(beam, span)
    x = np.linspace(x0, x1, panels + 1)
    moment = load * (beam.length - x) ** 2 / 2.0
    strain = moment * (beam.thickness / 2.0) / (youngs_modulus * second_moment(beam))
    return float(integrate.trapezoid(strain, x) / (x1 - x0))


def response_gains(config: SensorConfig) -> np.ndarray:
    """Per-beam gain c_i in ohms such that dR_i = c_i * v**n * g(phi_i)."""
    base_R = base_resistance(config.resistor, config.materials.resistivity_ohm_m)
    gains = []
    for beam in config.beams:
        strain = mean_resistor_strain(load_scale(1.0, beam, config), beam,
                                      config.resistor.span, config.materials.youngs_modulus_pa)
        gains.append(base_R * gauge_dR_over_R(strain, config.materials.poisson_ratio))
    return np.asarray(gains)


def beam_angles(config: SensorConfig, travel_azimuth_deg: float) -> np.ndarray:
    """phi_i = theta - theta_i for every beam, using the physical (misaligned) azimuths."""
    azimuths = np.array([b.effective_azimuth_deg for b in config.beams])
    return travel_azimuth_deg - azimuths


def forward_response(config: SensorConfig, flow: FlowCondition) -> ResponseVector:
    """Four-beam resistance variations for a flow condition."""
    base_R = base_resistance(config.resistor, config.materials.resistivity_ohm_m)
    span = config.resistor.span
    dR = []
    for i, (beam, phi) in enumerate(zip(config.beams, beam_angles(config, flow.travel_azimuth_deg))):
        q = distributed_load(flow.speed_m_per_s, float(phi), config, beam_index=i)
        strain = mean_resistor_strain(q, beam, span, config.materials.youngs_modulus_pa)
        dR.append(base_R * gauge_dR_over_R(strain, config.materials.poisson_ratio))
    logger.debug(f"forward_response v={flow.speed_m_per_s} theta={flow.travel_azimuth_deg}: {dR}")
    return ResponseVector(dR=tuple(dR), base_R=base_R)


def downwind_sensitivity(config: SensorConfig, at_speed: float = 20.0) -> float:
    """d(dR)/dv of the downwind beam (flow travelling along beam 0) in ohm per m/s."""
    if not at_speed > 0:
        raise DomainError(f"sensitivity speed must be > 0, got {at_speed}")
    flow = FlowCondition(speed_m_per_s=at_speed, travel_azimuth_deg=config.beams[0].effective_azimuth_deg)
    response = forward_response(config, flow)
    # dR = C v**n  =>  d(dR)/dv = n dR / v
    return config.env.speed_exponent * response.dR[0] / at_speed
