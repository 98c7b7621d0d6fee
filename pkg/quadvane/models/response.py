import math
from typing import Tuple

from pydantic import BaseModel, ConfigDict, model_validator

BEAM_COUNT = 4


class RelativeChanges(BaseModel):
    """Relative changes of the quantities in R = rho * l_R / (w * t)."""
    model_config = ConfigDict(frozen=True)

    d_rho: float = 0.0
    d_l: float = 0.0
    d_w: float = 0.0
    d_t: float = 0.0

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return self.d_rho, self.d_l, self.d_w, self.d_t


class ResponseVector(BaseModel):
    """Per-beam resistance variations in ohms, indexed in beam order (azimuths 0, 90, 180, 270)."""
    model_config = ConfigDict(frozen=True)

    dR: Tuple[float, float, float, float]
    base_R: float

    @model_validator(mode="after")
    def _check_values(self) -> "ResponseVector":
        if not all(math.isfinite(x) for x in self.dR):
            raise ValueError(f"dR entries must be finite, got {self.dR}")
        if not (math.isfinite(self.base_R) and self.base_R > 0):
            raise ValueError(f"base_R must be finite and > 0, got {self.base_R}")
        return self

    @property
    def sum_abs(self) -> float:
        return sum(abs(x) for x in self.dR)
