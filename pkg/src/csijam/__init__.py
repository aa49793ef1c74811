"""Simulate CSI traces of a jammed UAV-to-ground link and detect the jammer."""

__version__ = "0.1.0"

from .channel import (
    ChannelImpulseResponse,
    FrequencyGrid,
    MultipathComponent,
    cir_compose,
    cir_to_cfr,
    decompose,
    recompose,
    sample_subcarrier_csi,
)
from .errors import (
    ChannelError,
    ConfigError,
    CsiJamError,
    DelayOutOfRangeError,
    InsufficientDataError,
    TraceFormatError,
)
from .scenario import PRESET_NAMES, ScenarioConfig, preset, run_scenario
from .trace import CsiRecord, CsiTrace, PdrWindow, jitter_series, parse_trace, pdr_windows, write_trace
from .detector import (
    BaselineProfile,
    DetectionPolicy,
    Verdict,
    calibrate_baseline,
    detect,
    detect_stream,
    detect_trace,
)

__all__ = [
    "BaselineProfile", "ChannelError", "ChannelImpulseResponse", "ConfigError", "CsiJamError", "CsiRecord",
    "CsiTrace", "DelayOutOfRangeError", "DetectionPolicy", "FrequencyGrid", "InsufficientDataError",
    "MultipathComponent", "PRESET_NAMES", "PdrWindow", "ScenarioConfig", "TraceFormatError", "Verdict",
    "calibrate_baseline", "cir_compose", "cir_to_cfr", "decompose", "detect", "detect_stream", "detect_trace",
    "jitter_series", "parse_trace", "pdr_windows", "preset", "recompose", "run_scenario",
    "sample_subcarrier_csi", "write_trace",
]
