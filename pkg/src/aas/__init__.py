"""Deterministic age-score evaluation over multi-channel memory sessions."""

from .kernel import (
    DEFAULT_EPSILON,
    ChannelState,
    DomainError,
    KernelConfig,
    ScoreBreakdown,
    SessionSnapshot,
    eval_kernel,
    phi,
    score_session,
    trajectory_summary,
)
from .formats import ClauseConfig, Report, SessionFile, emit_report, load_sessions, preset_config
from .pipeline import run_pipeline
from .synth import ScenarioSpec, generate_synthetic

__all__ = [
    "DEFAULT_EPSILON",
    "ChannelState",
    "ClauseConfig",
    "DomainError",
    "KernelConfig",
    "Report",
    "ScenarioSpec",
    "ScoreBreakdown",
    "SessionFile",
    "SessionSnapshot",
    "emit_report",
    "eval_kernel",
    "generate_synthetic",
    "load_sessions",
    "phi",
    "preset_config",
    "run_pipeline",
    "score_session",
    "trajectory_summary",
]

__version__ = "0.1.0"
