import math

import numpy as np
import pytest
from scipy.linalg import expm

from heraldsim.errors import PoleError
from heraldsim.fock import OscillatorSpec, annihilation
from heraldsim.pulses import (
    BranchPropagator,
    PulseSchedule,
    compose_branch,
    filter_function,
    lambda_eff,
    multimode_filter_report,
    nc_from_power_law,
    segment_durations,
)


def _brute_force(schedule, omega, sign, dim):
    a = annihilation(dim)
    x = a + a.conj().T
    num = a.conj().T @ a
    u = np.eye(dim, dtype=complex)
    for duration in segment_durations(schedule.n_c, schedule.tau(omega)):
        u = expm(-1j * duration * (omega * num + sign * schedule.g * x)) @ u
        sign = -sign
    return u


def test_compose_branch_against_ordered_exponentials():
    rng = np.random.default_rng(7)
    dim, big = 24, 90
    for _ in range(4):
        n_c = int(rng.integers(1, 6))
        g = float(rng.uniform(0.01, 0.1))
        eps = float(rng.uniform(0.0, 0.05))
        sched = PulseSchedule(n_c=n_c, g=g, epsilon=eps, detuning_sign=rng.choice(["minus", "plus"]))
        for sign in (1, -1):
            ref = _brute_force(sched, 1.0, sign, big)[:dim, :dim]
            got = compose_branch(sched, OscillatorSpec(1.0, dim=dim), sign).matrix(dim)
            assert np.linalg.norm(got - ref, 2) < 1e-6


def test_then_is_operator_product():
    a = BranchPropagator(0.2, 0.3 - 0.1j, 1.1)
    b = BranchPropagator(-0.4, 0.2j, 0.5)
    dim = 60
    lhs = a.then(b).matrix(dim)[:20, :20]
    rhs = (b.matrix(dim) @ a.matrix(dim))[:20, :20]
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_resonant_branches_displace_in_opposite_directions():
    sched = PulseSchedule(n_c=400, g=2.5e-4)
    spec = OscillatorSpec(1.0)
    plus, minus = compose_branch(sched, spec, 1), compose_branch(sched, spec, -1)
    assert plus.displacement == pytest.approx(-minus.displacement, abs=1e-12)
    assert abs(plus.displacement) == pytest.approx(lambda_eff(2.5e-4, 400, 1.0), rel=1e-3)


def test_tau_signs():
    assert PulseSchedule(1, 0.1, 0.2).tau(1.0) == pytest.approx(math.pi / 0.8)
    assert PulseSchedule(1, 0.1, 0.2, "plus").tau(1.0) == pytest.approx(math.pi / 1.2)
    with pytest.raises(ValueError):
        PulseSchedule(1, 0.1, 1.0).tau(1.0)


def test_power_law_rounds_to_nearest_integer():
    assert nc_from_power_law(4) == {1: 100, 2: 119, 3: 132, 4: 141}


def test_schedule_override_per_round():
    s = PulseSchedule(n_c=5, g=0.1, rounds_M=3, nc_schedule={2: 9})
    assert [s.pulses_for_round(k) for k in (1, 2, 3)] == [5, 9, 5]
    assert s.for_round(2).n_c == 9


def test_filter_function_value_and_pole():
    val = filter_function(3, 2.0, 1.0)
    assert val == pytest.approx(4 * math.tan(2.0 / 8) ** 2 * math.cos(1.0) ** 2)
    with pytest.raises(PoleError):
        filter_function(0, math.pi, 1.0)


def test_multimode_report_weights_sum_to_one():
    sched = PulseSchedule(n_c=10, g=0.01)
    rows = multimode_filter_report([(1.0, 0.01), (1.3, 0.02), (0.7, 0.01)], sched, omega_ref=1.0)
    assert sum(r.weight_fraction for r in rows) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        multimode_filter_report([], sched, 1.0)


def test_filter_function_period():
    # cos^2 repeats every 2 pi / t, the tan^2 factor only every 2 pi (n_c + 1) / t
    n_c, t = 4, 3.0
    om = np.linspace(0.1, 1.9, 7)
    shifted = [filter_function(n_c, t, w + 2 * math.pi * (n_c + 1) / t) for w in om]
    assert np.allclose(shifted, [filter_function(n_c, t, w) for w in om])
    assert not np.allclose([filter_function(n_c, t, w + 2 * math.pi / t) for w in om], [filter_function(n_c, t, w) for w in om])
