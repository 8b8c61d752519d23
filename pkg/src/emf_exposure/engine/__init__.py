"""Measurement engine: level tuning, band detection and the three phases."""

from .algorithms import (
    AdjustResult,
    adjust_ref_level_scale_div,
    incr_percent,
    iterate_adjust,
    nar_band_meas,
    preamp_management,
    sel_band_use,
)
from .operator import ANTENNA_AFTER, PROMPTS, FollowingOperator, Operator, ScriptedOperator, StdinOperator
from .params import EngineParams, load_params, params_from_dict
from .phases import SessionMetadata, run_p1, run_p2, run_p3, run_session

__all__ = [
    "ANTENNA_AFTER",
    "PROMPTS",
    "AdjustResult",
    "EngineParams",
    "FollowingOperator",
    "Operator",
    "ScriptedOperator",
    "SessionMetadata",
    "StdinOperator",
    "adjust_ref_level_scale_div",
    "incr_percent",
    "iterate_adjust",
    "load_params",
    "nar_band_meas",
    "params_from_dict",
    "preamp_management",
    "run_p1",
    "run_p2",
    "run_p3",
    "run_session",
    "sel_band_use",
]
