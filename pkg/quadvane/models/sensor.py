import math
from typing import Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

# Lengths are stored in micrometres, the unit of the config file, so that
# save/load round trips stay bit-exact. SI views are exposed as properties.
UM = 1e-6


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True)


# --- Device geometry ---

class ResistorGeometry(_Frozen):
    """Serpentine platinum resistor on a beam; the span is measured from the beam root."""
    length_um: float
    width_um: float
    thickness_um: float
    span_start_um: float = 0.0
    span_end_um: float = 400.0

    @property
    def length(self) -> float:
        return self.length_um * UM

    @property
    def width(self) -> float:
        return self.width_um * UM

    @property
    def thickness(self) -> float:
        return self.thickness_um * UM

    @property
    def span(self) -> Tuple[float, float]:
        return self.span_start_um * UM, self.span_end_um * UM


class MaterialProps(_Frozen):
    resistivity_ohm_m: float
    poisson_ratio: float
    youngs_modulus_pa: float


class BeamGeometry(_Frozen):
    """One cantilever: planform, thickness, nominal azimuth and residual pre-bend."""
    length_um: float
    width_um: float
    thickness_um: float = 20.0
    azimuth_deg: float
    pre_bend_um: float = 0.0
    # Rotary-table / mask misalignment added to the nominal azimuth
    misalignment_deg: float = 0.0

    @property
    def length(self) -> float:
        return self.length_um * UM

    @property
    def width(self) -> float:
        return self.width_um * UM

    @property
    def thickness(self) -> float:
        return self.thickness_um * UM

    @property
    def effective_azimuth_deg(self) -> float:
        return self.azimuth_deg + self.misalignment_deg


class LobeCoefficients(_Frozen):
    """Fourier coefficients of the angular response g(phi) = a0 + a1 cos(phi) + a2 cos(2 phi)."""
    a0: float
    a1: float
    a2: float


class Environment(_Frozen):
    air_density_kg_per_m3: float = 1.204
    drag_coefficient: float = 1.2
    # Load law q ~ v**n; 2 is dynamic pressure
    speed_exponent: float = 2.0


class SensorConfig(_Frozen):
    """Full parametric description of the four-beam sensor and its environment."""
    beams: Tuple[BeamGeometry, ...]
    resistor: ResistorGeometry
    materials: MaterialProps
    lobe: LobeCoefficients
    env: Environment = Field(default_factory=Environment)
    response_scale: float = 1.0

    def with_scale(self, response_scale: float) -> "SensorConfig":
        return self.model_copy(update={"response_scale": response_scale})

    def with_lobe(self, lobe: LobeCoefficients) -> "SensorConfig":
        return self.model_copy(update={"lobe": lobe})


# --- Flow ---

class FlowCondition(_Frozen):
    """Airflow speed and travel azimuth (the direction the air moves toward).

    The downwind beam is the beam whose azimuth equals the travel azimuth.
    """
    speed_m_per_s: float
    travel_azimuth_deg: float

    @field_validator("speed_m_per_s")
    @classmethod
    def _check_speed(cls, v: float) -> float:
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"flow speed must be finite and >= 0, got {v}")
        return v

    @field_validator("travel_azimuth_deg")
    @classmethod
    def _normalize_azimuth(cls, v: float) -> float:
        return normalize_angle(v)

    @classmethod
    def from_angle_from(cls, speed_m_per_s: float, angle_from_deg: float) -> "FlowCondition":
        """Builds a flow from the direction the air comes FROM (travel = from + 180)."""
        return cls(speed_m_per_s=speed_m_per_s, travel_azimuth_deg=angle_from_deg + 180.0)

    @property
    def angle_from_deg(self) -> float:
        return normalize_angle(self.travel_azimuth_deg + 180.0)


def normalize_angle(angle_deg: float) -> float:
    """Maps any finite angle in degrees to [0, 360)."""
    if not math.isfinite(angle_deg):
        raise ValueError(f"angle must be finite, got {angle_deg}")
    wrapped = angle_deg % 360.0
    # -tiny % 360 rounds up to 360.0
    return 0.0 if wrapped >= 360.0 else wrapped
