import math

import numpy as np
import pytest

from heraldsim.cooling import (
    cooling_rate,
    cooling_recurrence,
    retuned_schedule,
    run_adaptive,
    speed_limit_rounds,
    useful_rounds,
)
from heraldsim.errors import RegimeError
from heraldsim.fock import OscillatorSpec


def test_recurrence_values():
    state = cooling_recurrence(10.0, 0.1, 3)
    assert np.allclose(state.n, [10.0, 8.1873075307798, 6.9506761473, 6.0485914108], rtol=1e-9)


def test_recurrence_regime_guard():
    with pytest.raises(RegimeError):
        cooling_recurrence(10.0, 0.4, 3)


def test_recurrence_rates():
    state = cooling_recurrence(5.0, 0.2, 2, g=0.01, omega=1.0)
    assert np.allclose(state.rates, cooling_rate(0.01, 1.0, state.n))


def test_speed_limit():
    assert [speed_limit_rounds(n) for n in (4, 16, 64)] == [4, 8, 12]
    with pytest.raises(ValueError):
        speed_limit_rounds(0.5)


def test_useful_rounds_boundaries():
    g, omega = 2.5e-4, 1.0
    assert useful_rounds(g, omega, 0.0, 10.0) == 1000
    assert useful_rounds(0.0, omega, 1e-8, 10.0) == 0
    # rate at n0 just below Gamma: no useful round
    assert useful_rounds(g, omega, 4 * g * g * 10.0 * 1.01, 10.0) == 0
    m = useful_rounds(g, omega, 2.5e-8, 10.0)
    state = cooling_recurrence(10.0, math.sqrt(0.05), m + 1, g, omega)
    assert state.rates[m - 1] > 2.5e-8 >= state.rates[m]


def test_retuned_schedule():
    s = retuned_schedule(8.0, 2.5e-4, 1.0)
    assert s.n_c == 500
    assert s.n_c * s.tau(1.0) * s.epsilon == pytest.approx(2.0)


def test_adaptive_run_reaches_ground_state_band():
    rec = run_adaptive(OscillatorSpec(1.0, n_thermal=4.0, dim=128), 2.5e-4, max_rounds=10)
    assert rec.column("occupancy")[-1] < 1.0
    assert rec.rounds_completed <= speed_limit_rounds(4.0) + 3
