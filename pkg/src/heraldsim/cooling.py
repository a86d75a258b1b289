"""Closed-form cooling model and the adaptive (re-tuned) heralding run.

The recurrence n_{M+1} = n_M exp(-2 lambda^2 n_M) is the large-occupancy
estimate of one successful round. ``run_adaptive`` is its exact counterpart
on the Fock engine: before every round the kick is re-tuned to the current
occupancy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import RegimeError
from .fock import OscillatorSpec, build_thermal, lindblad_damping, observables_of
from .herald import RoundRecord, SpinSpec, TrajectoryRecord, _normalized, _observed, build_conditional_ops
from .pulses import PulseSchedule

__all__ = [
    "CoolingModelState",
    "cooling_recurrence",
    "cooling_rate",
    "speed_limit_rounds",
    "useful_rounds",
    "retuned_schedule",
    "run_adaptive",
]


@dataclass(frozen=True, eq=False)
class CoolingModelState:
    """Occupancies n_0..n_M of the recurrence and, if g and omega are known, gamma_M."""

    n: np.ndarray
    lam: float
    rates: np.ndarray | None = None

    @property
    def rounds(self) -> int:
        return len(self.n) - 1


def cooling_rate(g: float, omega: float, n: float | np.ndarray):
    """Effective cooling rate (4 g^2 / omega) n."""
    return 4.0 * g * g / omega * np.asarray(n)


def cooling_recurrence(
    n0: float,
    lam: float | Sequence[float],
    rounds: int,
    g: float | None = None,
    omega: float | None = None,
) -> CoolingModelState:
    """Iterate n <- n exp(-2 lambda^2 n) ``rounds`` times from n0.

    ``lam`` may be a per-round sequence (round-dependent pulse counts); the
    regime condition is checked with the first value.
    """
    if n0 < 0:
        raise ValueError("n0 must be non-negative")
    if rounds < 0:
        raise ValueError("rounds must be non-negative")
    if np.ndim(lam) == 0:
        first = float(lam)
        lams = np.full(rounds, first)
    else:
        lams = np.asarray(lam, dtype=float)
        if lams.size < rounds:
            raise ValueError(f"need {rounds} lambda values, got {lams.size}")
        first = float(lams[0]) if lams.size else 0.0
    if first * first * n0 >= 1.0:
        raise RegimeError(f"lambda^2 n0 = {first * first * n0:.3g} violates lambda^2 n < 1")
    n = np.empty(rounds + 1)
    n[0] = n0
    for m in range(rounds):
        n[m + 1] = n[m] * math.exp(-2.0 * lams[m] ** 2 * n[m])
    rates = cooling_rate(g, omega, n) if g is not None and omega is not None else None
    return CoolingModelState(n, first, rates)


def speed_limit_rounds(n0: float) -> int:
    """ceil(2 log2 n0): successful projections needed to reach the ground state."""
    if n0 < 1:
        raise ValueError(f"n0 must be >= 1, got {n0}")
    return max(0, math.ceil(2.0 * math.log2(n0) - 1e-12))


def useful_rounds(
    g: float,
    omega: float,
    gamma: float,
    n0: float,
    lam: float | None = None,
    max_rounds: int = 1000,
) -> int:
    """Largest M with (4 g^2/omega) n_M > Gamma along the recurrence, capped at ``max_rounds``.

    n_M counts from n_0 = n0, so M rounds are useful when the rate still
    beats damping before the M-th round. ``lam`` defaults to sqrt(0.5/n0).
    """
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    if g == 0.0:
        return 0
    if gamma == 0.0:
        return max_rounds
    lam = math.sqrt(0.5 / n0) if lam is None else lam
    state = cooling_recurrence(n0, lam, max_rounds, g, omega)
    above = state.rates[:max_rounds] > gamma
    if above.all():
        return max_rounds
    return int(np.argmin(above))


def retuned_schedule(n_current: float, g: float, omega: float, drift: float = 2.0, lam_max: float = 1.0) -> PulseSchedule:
    """One-round schedule with lambda^2 = 0.5 / n_current.

    The pulse count is round(lambda omega / 2 g). The detuning is set so that
    the oscillator drifts by ``drift`` radians over the block. Successive
    kicks then act on different quadratures.
    """
    if g <= 0:
        raise ValueError("g must be positive")
    lam = min(math.sqrt(0.5 / max(n_current, 1e-12)), lam_max)
    n_c = max(1, int(round(lam * omega / (2.0 * g))))
    eps = drift * omega / (n_c * math.pi + drift)
    return PulseSchedule(n_c=n_c, g=g, epsilon=eps, rounds_M=1)


def run_adaptive(
    spec: OscillatorSpec,
    g: float,
    max_rounds: int,
    spin: SpinSpec | None = None,
    target: float = 1.0,
    drift: float = 2.0,
) -> TrajectoryRecord:
    """Conditioned run that re-tunes the kick to the current occupancy every round.

    Stops after the first round whose occupancy falls below ``target`` or
    after ``max_rounds``.
    """
    spin = spin or SpinSpec()
    rho = build_thermal(spec)
    start = observables_of(rho)
    record = TrajectoryRecord(initial_occupancy=start.occupancy, initial_var_x=start.var_x)
    n = start.occupancy
    for k in range(1, max_rounds + 1):
        kick = build_conditional_ops(retuned_schedule(n, g, spec.omega, drift), spin, spec)
        rho = lindblad_damping(rho, spec, kick.block_time)
        good, _ = _observed(kick, rho)
        p = min(max(float(np.trace(good).real), 0.0), 1.0)
        rho = _normalized(good, "success")
        obs = observables_of(rho)
        n = obs.occupancy
        record.rounds.append(RoundRecord(k, "success", p, n, obs.var_x, obs.var_p, kick.eta))
        if n < target:
            break
    return record
