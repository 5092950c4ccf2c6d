"""Lagrangian simulator for spherically symmetric free-boundary viscous gas."""

from .diagnostics import DiagnosticRecord, RateVerdict, diagnose, theoretical_rate
from .model import LagState, MassGrid, Params, ProfileSpec, init_profile, make_params
from .solver import StepConfig, StepReport, Trajectory, run, step

__all__ = [
    "DiagnosticRecord",
    "LagState",
    "MassGrid",
    "Params",
    "ProfileSpec",
    "RateVerdict",
    "StepConfig",
    "StepReport",
    "Trajectory",
    "diagnose",
    "init_profile",
    "make_params",
    "run",
    "step",
    "theoretical_rate",
]

__version__ = "0.1.0"
