import pytest

from heraldsim.errors import RegimeWarning
from heraldsim.phys import LabSetup, coupling_from_gradient, gamma_from_q, nbar_from_temperature, spec_from_lab


def test_lab_numbers():
    lab = LabSetup()
    assert coupling_from_gradient(lab).hz == pytest.approx(56.0)
    assert nbar_from_temperature(lab) == pytest.approx(8334.1, rel=1e-4)
    assert gamma_from_q(lab) == pytest.approx(628.3185, rel=1e-6)


def test_cold_limit_has_no_occupancy():
    assert nbar_from_temperature(LabSetup(temperature_k=1e-8)) == 0.0


def test_invalid_setup():
    with pytest.raises(ValueError):
        LabSetup(temperature_k=0.0)


def test_spec_from_lab_suggests_pulse_count():
    osc, spin, sched = spec_from_lab(LabSetup(t2_s=1.0))
    assert sched.n_c == 692
    assert spin.t2 == 1.0
    with pytest.warns(RegimeWarning):
        spec_from_lab(LabSetup(t2_s=1e-6))
