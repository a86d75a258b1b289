"""Heralded measurement protocol on the Fock engine.

Each round: the spin is prepared in a superposition, the pulse block entangles
it with the oscillator through the two branch propagators, and the spin is
read out. Success applies V = (D+ + D-)/2 to the oscillator, failure
W = (D+ - D-)/2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import TruncationWarning, ZeroProbabilityError
from .fock import (
    DensityMatrix,
    OscillatorSpec,
    build_thermal,
    displacement_op,
    interior_size,
    lindblad_damping,
    observables_of,
    rotation_op,
)
from .pulses import PulseSchedule, compose_branch

__all__ = [
    "SpinSpec",
    "ConditionalKick",
    "RoundRecord",
    "TrajectoryRecord",
    "build_conditional_ops",
    "success_probability",
    "project",
    "run_protocol",
    "run_ensemble",
    "event_rate",
    "trajectory_rng",
]


@dataclass(frozen=True)
class SpinSpec:
    t2: float = math.inf
    readout_fidelity: float = 1.0

    def __post_init__(self):
        if not self.t2 > 0:
            raise ValueError(f"t2 must be positive, got {self.t2}")
        if not 0.5 <= self.readout_fidelity <= 1.0:
            raise ValueError(f"readout_fidelity must lie in [0.5, 1], got {self.readout_fidelity}")

    def contrast(self, block_time: float) -> float:
        if math.isinf(self.t2):
            return 1.0
        return math.exp(-block_time / self.t2)


@dataclass(frozen=True, eq=False)
class ConditionalKick:
    v_op: np.ndarray
    w_op: np.ndarray
    eta: float
    readout_fidelity: float = 1.0
    beta: complex = 0j
    block_time: float = 0.0

    @property
    def dim(self) -> int:
        return self.v_op.shape[0]

    def interior(self) -> int:
        return interior_size(self.dim, self.beta)

    def completeness_error(self) -> float:
        """max |V^dag V + W^dag W - I| over the interior block."""
        v, w = self.v_op, self.w_op
        s = v.conj().T @ v + w.conj().T @ w - np.eye(self.dim)
        k = self.interior()
        return float(np.max(np.abs(s[:k, :k]))) if k else 0.0


def build_conditional_ops(schedule: PulseSchedule, spin: SpinSpec, spec: OscillatorSpec) -> ConditionalKick:
    """Success/failure operators for one pulse block (uses ``schedule.n_c``)."""
    plus = compose_branch(schedule, spec, +1)
    minus = compose_branch(schedule, spec, -1)
    dim = spec.dim
    bmax = max(abs(plus.displacement), abs(minus.displacement))
    if bmax * bmax * (spec.n_thermal + 1.0) > 0.5 * dim:
        warnings.warn(
            f"kick |beta|={bmax:.3g} large for dim={dim} at n_thermal={spec.n_thermal}",
            TruncationWarning,
            stacklevel=2,
        )
    # both branches share the free rotation
    rot = rotation_op(plus.rotation, dim)
    dp = np.exp(1j * plus.phase) * displacement_op(plus.displacement, dim)
    dm = np.exp(1j * minus.phase) * displacement_op(minus.displacement, dim)
    t = schedule.block_time(spec.omega)
    return ConditionalKick(
        v_op=0.5 * (dp + dm) @ rot,
        w_op=0.5 * (dp - dm) @ rot,
        eta=spin.contrast(t),
        readout_fidelity=spin.readout_fidelity,
        beta=plus.displacement,
        block_time=t,
    )


def _observed(kick: ConditionalKick, rho: DensityMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized oscillator states for a read-out success and failure.

    Dephasing mixes V and W with weights (1 +- eta)/2; readout error then
    swaps the two records with probability 1 - f.
    """
    if rho.dim != kick.dim:
        raise ValueError(f"dimension mismatch: state {rho.dim}, kick {kick.dim}")
    r = rho.data
    vrv = kick.v_op @ r @ kick.v_op.conj().T
    wrw = kick.w_op @ r @ kick.w_op.conj().T
    a, b = 0.5 * (1.0 + kick.eta), 0.5 * (1.0 - kick.eta)
    good, bad = a * vrv + b * wrw, b * vrv + a * wrw
    f = kick.readout_fidelity
    if f == 1.0:
        return good, bad
    return f * good + (1.0 - f) * bad, f * bad + (1.0 - f) * good


def success_probability(kick: ConditionalKick, rho: DensityMatrix) -> float:
    """Probability of reading out a success, including dephasing and readout error."""
    good, _ = _observed(kick, rho)
    return float(np.trace(good).real)


def _normalized(out: np.ndarray, outcome: str) -> DensityMatrix:
    p = float(np.trace(out).real)
    if p <= 1e-12:
        raise ZeroProbabilityError(f"outcome {outcome!r} has probability {p:.3e}")
    out = out / p
    return DensityMatrix(0.5 * (out + out.conj().T))


def project(kick: ConditionalKick, rho: DensityMatrix, outcome: Literal["success", "fail"]) -> DensityMatrix:
    """Condition the oscillator on an observed readout outcome and renormalize."""
    if outcome not in ("success", "fail"):
        raise ValueError(f"outcome must be 'success' or 'fail', got {outcome!r}")
    good, bad = _observed(kick, rho)
    return _normalized(good if outcome == "success" else bad, outcome)


@dataclass(frozen=True)
class RoundRecord:
    round: int
    outcome: str
    p_success: float
    occupancy: float
    var_x: float
    var_p: float
    eta: float
    restarted: bool = False


@dataclass
class TrajectoryRecord:
    rounds: list[RoundRecord] = field(default_factory=list)
    initial_occupancy: float = 0.0
    initial_var_x: float = 0.0

    @property
    def rounds_completed(self) -> int:
        return len(self.rounds)

    @property
    def event_rate(self) -> float:
        return event_rate(self)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rounds])


def event_rate(record: TrajectoryRecord) -> float:
    """Product of the per-round success probabilities."""
    return float(np.prod([r.p_success for r in record.rounds])) if record.rounds else 1.0


def trajectory_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Generator for trajectory ``index`` derived from the master seed.

    Depends only on (seed, index), never on scheduling order or thread count.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


def run_protocol(
    spec: OscillatorSpec,
    schedule: PulseSchedule,
    spin: SpinSpec | None = None,
    mode: Literal["conditioned", "trajectory"] = "conditioned",
    seed: int = 0,
    *,
    continue_on_fail: bool = False,
    initial: DensityMatrix | None = None,
    rng: np.random.Generator | None = None,
) -> TrajectoryRecord:
    """Run ``schedule.rounds_M`` heralding rounds starting from the thermal state.

    ``conditioned`` follows the all-success branch. ``trajectory`` samples
    outcomes; on failure the experiment restarts from a fresh thermal state
    unless ``continue_on_fail`` (not part of the heralded protocol) is set.
    """
    if schedule.rounds_M < 1:
        raise ValueError("rounds_M must be >= 1")
    if mode not in ("conditioned", "trajectory"):
        raise ValueError(f"unknown mode {mode!r}")
    spin = spin or SpinSpec()
    fresh = initial if initial is not None else build_thermal(spec)
    if mode == "trajectory" and rng is None:
        rng = trajectory_rng(seed)

    start = observables_of(fresh)
    record = TrajectoryRecord(initial_occupancy=start.occupancy, initial_var_x=start.var_x)
    kicks: dict[int, ConditionalKick] = {}
    rho = fresh
    for k in range(1, schedule.rounds_M + 1):
        n_c = schedule.pulses_for_round(k)
        if n_c not in kicks:
            kicks[n_c] = build_conditional_ops(schedule.for_round(k), spin, spec)
        kick = kicks[n_c]
        rho = lindblad_damping(rho, spec, kick.block_time)
        good, bad = _observed(kick, rho)
        p = min(max(float(np.trace(good).real), 0.0), 1.0)

        restarted = False
        if mode == "conditioned":
            outcome = "success"
        else:
            outcome = "success" if rng.random() < p else "fail"
        if outcome == "success" or continue_on_fail:
            rho = _normalized(good if outcome == "success" else bad, outcome)
        else:
            rho = fresh
            restarted = True
        obs = observables_of(rho)
        record.rounds.append(
            RoundRecord(k, outcome, p, obs.occupancy, obs.var_x, obs.var_p, kick.eta, restarted)
        )
    return record


def _worker_count(n: int) -> int:
    import os

    cap = os.environ.get("HERALD_SIM_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, n))


def run_ensemble(
    spec: OscillatorSpec,
    schedule: PulseSchedule,
    spin: SpinSpec | None = None,
    n_trajectories: int = 1,
    seed: int = 0,
    threads: int | None = None,
    continue_on_fail: bool = False,
) -> list[TrajectoryRecord]:
    """Independent sampled trajectories, returned in index order."""
    from concurrent.futures import ThreadPoolExecutor

    fresh = build_thermal(spec)

    def one(i: int) -> TrajectoryRecord:
        return run_protocol(
            spec, schedule, spin, "trajectory", seed,
            continue_on_fail=continue_on_fail, initial=fresh, rng=trajectory_rng(seed, i),
        )

    workers = threads if threads is not None else _worker_count(n_trajectories)
    if workers <= 1:
        return [one(i) for i in range(n_trajectories)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(n_trajectories)))
