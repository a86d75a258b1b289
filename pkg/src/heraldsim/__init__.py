"""Heralded spin control of a mechanical oscillator: Fock and P-function engines."""

from .config import RunConfig, load_config, parse_config
from .cooling import cooling_recurrence, run_adaptive, speed_limit_rounds, useful_rounds
from .errors import (
    ConfigError,
    DegenerateBathError,
    HeraldSimError,
    PoleError,
    RegimeError,
    StepSizeError,
    TruncationError,
    TruncationWarning,
    ZeroProbabilityError,
)
from .fock import DensityMatrix, Observables, OscillatorSpec, build_thermal, lindblad_damping, observables_of
from .herald import SpinSpec, build_conditional_ops, project, run_ensemble, run_protocol, success_probability
from .pfunction import FilterParams, GridConfig, evolve_p, moments_from_p, p_trajectory, params_from_schedule
from .phys import LabSetup, coupling_from_gradient, gamma_from_q, nbar_from_temperature
from .pulses import PulseSchedule, compose_branch, filter_function, lambda_eff

__all__ = [
    "RunConfig", "load_config", "parse_config",
    "cooling_recurrence", "run_adaptive", "speed_limit_rounds", "useful_rounds",
    "ConfigError", "DegenerateBathError", "HeraldSimError", "PoleError", "RegimeError",
    "StepSizeError", "TruncationError", "TruncationWarning", "ZeroProbabilityError",
    "DensityMatrix", "Observables", "OscillatorSpec", "build_thermal", "lindblad_damping", "observables_of",
    "SpinSpec", "build_conditional_ops", "project", "run_ensemble", "run_protocol", "success_probability",
    "FilterParams", "GridConfig", "evolve_p", "moments_from_p", "p_trajectory", "params_from_schedule",
    "LabSetup", "coupling_from_gradient", "gamma_from_q", "nbar_from_temperature",
    "PulseSchedule", "compose_branch", "filter_function", "lambda_eff",
]
