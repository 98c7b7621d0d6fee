import math
from typing import Tuple

from pydantic import BaseModel, ConfigDict, field_validator, model_validator


class NoiseModel(BaseModel):
    """LCR-meter read-out model: additive Gaussian noise then quantization to the meter step.

    Noise for a record is fully determined by (seed, record index).
    """
    model_config = ConfigDict(frozen=True)

    gaussian_sigma: float = 5e-4
    quantization_step: float = 1e-4
    seed: int = 0

    @field_validator("gaussian_sigma", "quantization_step")
    @classmethod
    def _non_negative(cls, v: float) -> float:
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"noise parameters must be finite and >= 0, got {v}")
        return v

    @field_validator("seed")
    @classmethod
    def _seed_range(cls, v: int) -> int:
        if not 0 <= v < 2 ** 64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {v}")
        return v

    @classmethod
    def noiseless(cls, seed: int = 0) -> "NoiseModel":
        return cls(gaussian_sigma=0.0, quantization_step=0.0, seed=seed)

    @property
    def is_noiseless(self) -> bool:
        return self.gaussian_sigma == 0.0 and self.quantization_step == 0.0


class SweepRecord(BaseModel):
    """One virtual wind-tunnel row: rotary-table angle, Pitot speed and the four readings."""
    model_config = ConfigDict(frozen=True)

    angle_travel_deg: float
    angle_from_deg: float
    v_true_m_per_s: float
    dR: Tuple[float, float, float, float]
    dR_clean: Tuple[float, float, float, float]
    replicate: int = 0

    @model_validator(mode="after")
    def _check_angles(self) -> "SweepRecord":
        expected = (self.angle_travel_deg + 180.0) % 360.0
        gap = abs(expected - self.angle_from_deg) % 360.0
        if min(gap, 360.0 - gap) > 1e-9:
            raise ValueError(
                f"angle_from_deg {self.angle_from_deg} inconsistent with "
                f"angle_travel_deg {self.angle_travel_deg}"
            )
        return self
