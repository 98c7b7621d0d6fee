from .sensor import (
    ResistorGeometry,
    MaterialProps,
    BeamGeometry,
    LobeCoefficients,
    Environment,
    SensorConfig,
    FlowCondition,
    normalize_angle,
)
from .response import RelativeChanges, ResponseVector, BEAM_COUNT
from .estimate import CalibrationTable, SpeedEstimate, EstimateResult, LobeFit
from .sweep import NoiseModel, SweepRecord

__all__ = [
    'ResistorGeometry',
    'MaterialProps',
    'BeamGeometry',
    'LobeCoefficients',
    'Environment',
    'SensorConfig',
    'FlowCondition',
    'normalize_angle',
    'RelativeChanges',
    'ResponseVector',
    'BEAM_COUNT',
    'CalibrationTable',
    'SpeedEstimate',
    'EstimateResult',
    'LobeFit',
    'NoiseModel',
    'SweepRecord',
]
