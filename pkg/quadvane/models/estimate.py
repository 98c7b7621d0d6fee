from typing import Dict, Tuple

from pydantic import BaseModel, ConfigDict, model_validator

from .sensor import LobeCoefficients


class CalibrationTable(BaseModel):
    """Monotone speed -> summed response knots, interpolated piecewise-linearly."""
    model_config = ConfigDict(frozen=True)

    knots: Tuple[Tuple[float, float], ...]
    interpolation: str = "linear"

    @model_validator(mode="after")
    def _check_knots(self) -> "CalibrationTable":
        if len(self.knots) < 2:
            raise ValueError(f"calibration needs at least 2 knots, got {len(self.knots)}")
        if self.knots[0] != (0.0, 0.0):
            raise ValueError(f"first calibration knot must be (0, 0), got {self.knots[0]}")
        for i in range(1, len(self.knots)):
            (v0, s0), (v1, s1) = self.knots[i - 1], self.knots[i]
            if not v1 > v0:
                raise ValueError(f"knot {i}: speed not strictly increasing ({v0} -> {v1})")
            if not s1 > s0:
                raise ValueError(f"knot {i}: summed response not strictly increasing ({s0} -> {s1})")
        if self.interpolation != "linear":
            raise ValueError(f"unsupported interpolation '{self.interpolation}'")
        return self

    @property
    def speeds(self) -> Tuple[float, ...]:
        return tuple(v for v, _ in self.knots)

    @property
    def sums(self) -> Tuple[float, ...]:
        return tuple(s for _, s in self.knots)

    @property
    def max_speed(self) -> float:
        return self.knots[-1][0]

    @property
    def max_sum(self) -> float:
        return self.knots[-1][1]


class SpeedEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    v_hat: float
    out_of_range_speed: bool = False


class EstimateResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    v_hat: float
    theta_hat: float
    residual: float
    indeterminate_direction: bool = False
    out_of_range_speed: bool = False
    iterations: int = 0
    converged: bool = True

    @property
    def flags(self) -> Tuple[str, ...]:
        names = []
        if self.indeterminate_direction:
            names.append("indeterminate_direction")
        if self.out_of_range_speed:
            names.append("out_of_range_speed")
        return tuple(names)


class LobeFit(BaseModel):
    """Fitted lobe (gauge a0 = 1), per-speed gain K in ohms, and RMS fit residual in ohms."""
    model_config = ConfigDict(frozen=True)

    lobe: LobeCoefficients
    k_by_speed: Dict[float, float]
    residual: float
