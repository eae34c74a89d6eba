"""Deterministic driving-style simulation and analysis toolkit.

The simulation side models lateral driving behavior as a cascade: a
curve-cutting rule maps previewed lateral acceleration to a target lane
offset, an oncoming-traffic rule shifts the target away from opposing
vehicles, and a GG-envelope-constrained path follower turns the target
into steering and acceleration commands. The analysis side recovers the
style parameters from logs and provides the questionnaire scoring and
statistical procedures used to evaluate the styles in a subject study.
"""

__version__ = "0.1.0"

from .errors import InsufficientDataError, NumericError, ValidationError
from .road import TrackModel, TrackSegment, generate_track
from .scenario import WeatherTag, default_study_scenario, run
from .styles import ReplayTrace, StyleParams, builtin_style

__all__ = [
    "InsufficientDataError",
    "NumericError",
    "ValidationError",
    "TrackModel",
    "TrackSegment",
    "generate_track",
    "WeatherTag",
    "default_study_scenario",
    "run",
    "ReplayTrace",
    "StyleParams",
    "builtin_style",
]
