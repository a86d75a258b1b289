"""Stroboscopic pi-pulse control of the spin and the resulting oscillator propagators.

Between pulses the oscillator sees H_s = omega a^dag a + s g (a + a^dag) with
s = +-1 set by the current spin state. Each pi pulse flips s. Every segment
propagator is a displaced rotation, so the full pulse train reduces to a
single ``e^{i phase} D(beta) R(theta)`` triple without any matrix algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import PoleError
from .fock import OscillatorSpec, displacement_op, rotation_op

__all__ = [
    "PulseSchedule",
    "BranchPropagator",
    "filter_function",
    "lambda_eff",
    "compose_branch",
    "nc_from_power_law",
    "multimode_filter_report",
    "ModeFilterRow",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PulseSchedule:
    """CPMG pulse train repeated once per heralding round.

    The pulse spacing is tau = pi / (omega - epsilon) for ``detuning_sign="minus"``
    and pi / (omega + epsilon) for ``"plus"``. ``nc_schedule`` maps a 1-based
    round index to a pulse count and overrides ``n_c`` for that round.
    """

    n_c: int
    g: float
    epsilon: float = 0.0
    detuning_sign: str = "minus"
    rounds_M: int = 1
    nc_schedule: Mapping[int, int] | None = field(default=None, hash=False, compare=True)

    def __post_init__(self):
        if int(self.n_c) != self.n_c or self.n_c < 1:
            raise ValueError(f"n_c must be a positive integer, got {self.n_c}")
        if self.g < 0:
            raise ValueError(f"g must be non-negative, got {self.g}")
        if self.detuning_sign not in ("minus", "plus"):
            raise ValueError(f"detuning_sign must be 'minus' or 'plus', got {self.detuning_sign!r}")
        if self.rounds_M < 0:
            raise ValueError("rounds_M must be >= 0")
        if self.nc_schedule is not None:
            sched = {int(k): int(v) for k, v in self.nc_schedule.items()}
            if any(v < 1 for v in sched.values()):
                raise ValueError("nc_schedule pulse counts must be >= 1")
            object.__setattr__(self, "nc_schedule", sched)

    def tau(self, omega: float) -> float:
        eff = omega - self.epsilon if self.detuning_sign == "minus" else omega + self.epsilon
        if eff <= 0:
            raise ValueError(f"pulse spacing undefined: omega -+ epsilon = {eff}")
        return math.pi / eff

    def pulses_for_round(self, round_index: int) -> int:
        if self.nc_schedule and round_index in self.nc_schedule:
            return self.nc_schedule[round_index]
        return self.n_c

    def block_time(self, omega: float, round_index: int | None = None) -> float:
        n_c = self.n_c if round_index is None else self.pulses_for_round(round_index)
        return n_c * self.tau(omega)

    def for_round(self, round_index: int) -> "PulseSchedule":
        """Single-round schedule with the pulse count this round uses."""
        return PulseSchedule(
            n_c=self.pulses_for_round(round_index),
            g=self.g,
            epsilon=self.epsilon,
            detuning_sign=self.detuning_sign,
            rounds_M=1,
        )


def nc_from_power_law(rounds: int, base: float = 100.0, exponent: float = 0.25) -> dict[int, int]:
    """Round-dependent pulse counts ``round(base * M**exponent)`` for M = 1..rounds."""
    return {m: max(1, int(round(base * m**exponent))) for m in range(1, rounds + 1)}


@dataclass(frozen=True)
class BranchPropagator:
    """The unitary ``e^{i phase} D(displacement) R(rotation)``; rotation kept in [0, 2 pi)."""

    phase: float
    displacement: complex
    rotation: float

    def matrix(self, dim: int) -> np.ndarray:
        return np.exp(1j * self.phase) * displacement_op(self.displacement, dim) @ rotation_op(self.rotation, dim)

    def then(self, later: "BranchPropagator") -> "BranchPropagator":
        """Propagator for ``self`` followed by ``later`` (operator product later @ self)."""
        return _compose(later, self)


def _compose(first: BranchPropagator, second: BranchPropagator) -> BranchPropagator:
    # e^{i p1} D(b1) R(t1) e^{i p2} D(b2) R(t2)
    #   = e^{i(p1 + p2 + Im(b1 conj(b2'))} D(b1 + b2') R(t1 + t2),   b2' = b2 e^{-i t1}
    b2 = second.displacement * complex(math.cos(first.rotation), -math.sin(first.rotation))
    b1 = first.displacement
    phase = first.phase + second.phase + (b1 * b2.conjugate()).imag
    return BranchPropagator(phase, b1 + b2, (first.rotation + second.rotation) % TWO_PI)


def _segment(sign: int, g: float, omega: float, duration: float) -> BranchPropagator:
    # exp(-i H_s t) = e^{i g^2 t / omega} D(-x) R(omega t) D(x),  x = s g / omega
    x = sign * g / omega
    phi = omega * duration
    disp = x * complex(math.cos(phi) - 1.0, -math.sin(phi))
    phase = g * g * duration / omega - x * x * math.sin(phi)
    return BranchPropagator(phase, disp, phi % TWO_PI)


def segment_durations(n_c: int, tau: float) -> list[float]:
    """Symmetric CPMG layout: tau/2, (n_c - 1) x tau, tau/2."""
    return [0.5 * tau] + [tau] * (n_c - 1) + [0.5 * tau]


def compose_branch(schedule: PulseSchedule, spec: OscillatorSpec, initial_sign: int = 1) -> BranchPropagator:
    """Exact oscillator propagator over one pulse block for a given initial spin branch.

    Uses ``schedule.n_c`` (call ``schedule.for_round(k)`` to apply an
    ``nc_schedule``). The accumulated rotation is reduced mod 2 pi.
    """
    if initial_sign not in (1, -1):
        raise ValueError("initial_sign must be +1 or -1")
    omega = spec.omega
    tau = schedule.tau(omega)
    total = BranchPropagator(0.0, 0j, 0.0)
    sign = initial_sign
    for duration in segment_durations(schedule.n_c, tau):
        total = _compose(_segment(sign, schedule.g, omega, duration), total)
        sign = -sign
    return total


def filter_function(n_c: int, t: float, omega: float) -> float:
    """CPMG filter 4 tan^2(omega t / (2 n_c + 2)) cos^2(omega t / 2)."""
    arg = omega * t / (2 * n_c + 2)
    c = math.cos(arg)
    if abs(c) < 1e-12:
        raise PoleError(f"tan pole at omega*t/(2 n_c + 2) = {arg}")
    tan = math.sin(arg) / c
    return 4.0 * tan * tan * math.cos(0.5 * omega * t) ** 2


def lambda_eff(g: float, n_c: int, omega: float) -> float:
    """Dimensionless kick strength 2 g n_c / omega."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    return 2.0 * g * n_c / omega


@dataclass(frozen=True)
class ModeFilterRow:
    omega: float
    g: float
    filter_value: float
    weight_fraction: float


def _filter_or_zero(n_c: int, t: float, omega: float) -> float:
    try:
        return filter_function(n_c, t, omega)
    except PoleError:
        return math.inf


def multimode_filter_report(modes: Sequence[tuple[float, float]], schedule: PulseSchedule, omega_ref: float) -> list[ModeFilterRow]:
    """Filter weight g_m^2 F(omega_m) / omega_m^2 per mode and its share of the total.

    ``omega_ref`` fixes the pulse spacing (the mode the train is tuned to).
    """
    if not modes:
        raise ValueError("mode list is empty")
    t = schedule.block_time(omega_ref)
    values = []
    for om, g in modes:
        if om <= 0:
            raise ValueError("mode frequencies must be positive")
        values.append(_filter_or_zero(schedule.n_c, t, om))
    weights = np.array([g * g * f / (om * om) for (om, g), f in zip(modes, values)])
    total = weights.sum()
    return [
        ModeFilterRow(om, g, f, float(w / total) if total > 0 else 0.0)
        for (om, g), f, w in zip(modes, values, weights)
    ]
