"""Laboratory numbers to model parameters.

All angular quantities are in rad/s. Couplings are returned both as a
cyclic frequency (Hz) and as an angular frequency, since quoted values in
the literature use either.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from scipy import constants

from .errors import RegimeWarning
from .fock import OscillatorSpec
from .herald import SpinSpec
from .pulses import PulseSchedule

__all__ = [
    "LabSetup",
    "Coupling",
    "coupling_from_gradient",
    "nbar_from_temperature",
    "gamma_from_q",
    "spec_from_lab",
]

NV_GYROMAGNETIC_HZ_PER_T = 2.8e10


@dataclass(frozen=True)
class LabSetup:
    mode_frequency_hz: float = 1e7
    zero_point_motion_m: float = 1e-14
    field_gradient_t_per_m: float = 2e5
    gyromagnetic_hz_per_t: float = NV_GYROMAGNETIC_HZ_PER_T
    temperature_k: float = 4.0
    quality_factor: float = 1e5
    t2_s: float = 1e-2

    def __post_init__(self):
        for name in ("mode_frequency_hz", "zero_point_motion_m", "gyromagnetic_hz_per_t", "temperature_k", "quality_factor", "t2_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.field_gradient_t_per_m < 0:
            raise ValueError("field_gradient_t_per_m must be non-negative")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.mode_frequency_hz


@dataclass(frozen=True)
class Coupling:
    hz: float

    @property
    def rad_per_s(self) -> float:
        return 2.0 * math.pi * self.hz


def coupling_from_gradient(setup: LabSetup) -> Coupling:
    """Spin-phonon coupling gyromagnetic ratio x gradient x zero-point motion."""
    return Coupling(setup.gyromagnetic_hz_per_t * setup.field_gradient_t_per_m * setup.zero_point_motion_m)


def nbar_from_temperature(setup: LabSetup) -> float:
    """Bose occupancy 1 / (exp(h f / k T) - 1)."""
    x = constants.h * setup.mode_frequency_hz / (constants.k * setup.temperature_k)
    if x > 700.0:
        return 0.0
    return 1.0 / math.expm1(x)


def gamma_from_q(setup: LabSetup) -> float:
    """Energy damping rate omega / Q."""
    return setup.omega / setup.quality_factor


def spec_from_lab(setup: LabSetup, dim: int = 256, lam_max: float = 1.0) -> tuple[OscillatorSpec, SpinSpec, PulseSchedule]:
    """Bundle the conversions and suggest a resonant pulse block.

    The suggested kick is lambda = sqrt(0.5 / n), capped at ``lam_max``, with
    n_c = round(lambda omega / 2 g). Room-temperature-scale occupancies do
    not fit any Fock truncation; use the cooling model or the P-function
    engine for those.
    """
    n = nbar_from_temperature(setup)
    g = coupling_from_gradient(setup).rad_per_s
    omega = setup.omega
    if g <= 0:
        raise ValueError("zero coupling: no pulse schedule can be suggested")
    lam = min(math.sqrt(0.5 / n), lam_max) if n > 0 else lam_max
    n_c = max(1, int(round(lam * omega / (2.0 * g))))
    schedule = PulseSchedule(n_c=n_c, g=g)
    block = schedule.block_time(omega)
    if block > setup.t2_s:
        warnings.warn(
            f"block time {block:.3g} s exceeds T2 = {setup.t2_s:.3g} s",
            RegimeWarning,
            stacklevel=2,
        )
    osc = OscillatorSpec(omega=omega, gamma=gamma_from_q(setup), n_thermal=n, dim=dim)
    return osc, SpinSpec(t2=setup.t2_s), schedule
