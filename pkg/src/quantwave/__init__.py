"""Quantile-interacting jump particles: simulation, mean-field dynamics and traveling waves."""

from .grid import EmpiricalCDF, GridCDF
from .kernels import (
    ConfigError,
    JumpKernel,
    ModelParams,
    RateCurve,
    closed_form_wave,
    eta_bar,
    jump_moment,
    rate_smooth,
    wave_speed,
)

__all__ = [
    "ConfigError",
    "EmpiricalCDF",
    "GridCDF",
    "JumpKernel",
    "ModelParams",
    "RateCurve",
    "closed_form_wave",
    "eta_bar",
    "jump_moment",
    "rate_smooth",
    "wave_speed",
]

__version__ = "0.1.0"
