import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qloss.calibration import (
    LineCalibration,
    dbm_to_watts,
    loaded_q,
    mean_photon_number,
    qi_from_t1,
    t1_from_qi,
)
from qloss.resonance import ResonanceFit


def test_loaded_q_equal_contributions_halve():
    assert loaded_q(1e6, 1e6) == pytest.approx(5e5, rel=1e-12)


def test_loaded_q_direct_arithmetic():
    assert loaded_q(2e6, 5e5) == pytest.approx(4e5, rel=1e-12)


def test_loaded_q_coupling_limited():
    assert loaded_q(1e30, 5e5) == pytest.approx(5e5, rel=1e-6)


def test_loaded_q_rejects_nonpositive():
    with pytest.raises(ValueError):
        loaded_q(0.0, 1e6)
    with pytest.raises(ValueError):
        loaded_q(1e6, -1.0)


@given(qi=st.floats(1e3, 1e9), qc=st.floats(1e3, 1e9))
def test_loaded_q_below_both(qi, qc):
    ql = loaded_q(qi, qc)
    assert ql <= min(qi, qc)


def test_mean_photon_number_hand_evaluated():
    # (4 Z0/pi)(Ql^2/Qc*) C_L L_R P / (h f0) with Ql = 4e5 and P = 1e-15 W
    # evaluates to about 4.1e3 photons.
    fit = ResonanceFit(f0=6e9, qi=2e6, qc_star=5e5, phi=0.0)
    cal = LineCalibration(z0=50.0, c_per_length=1.6e-10,
                          resonator_length=5e-3, line_attenuation=0.0)
    photons = mean_photon_number(fit, cal, -120.0)  # 1 fW
    assert photons == pytest.approx(4.1e3, rel=0.02)


def test_mean_photon_number_zero_power():
    fit = ResonanceFit(f0=6e9, qi=2e6, qc_star=5e5, phi=0.0)
    cal = LineCalibration()
    assert mean_photon_number(fit, cal, float("-inf")) == 0.0


def test_mean_photon_number_doubles_with_power():
    fit = ResonanceFit(f0=6e9, qi=2e6, qc_star=5e5, phi=0.0)
    cal = LineCalibration(line_attenuation=60.0)
    base = mean_photon_number(fit, cal, -80.0)
    doubled = mean_photon_number(fit, cal, -80.0 + 10.0 * math.log10(2.0))
    assert doubled == pytest.approx(2.0 * base, rel=1e-12)


@given(p1=st.floats(-150, 10), p2=st.floats(-150, 10))
def test_mean_photon_number_linear_in_watts(p1, p2):
    fit = ResonanceFit(f0=5e9, qi=1e6, qc_star=4e5, phi=0.0)
    cal = LineCalibration(line_attenuation=20.0)
    n1 = mean_photon_number(fit, cal, p1)
    n2 = mean_photon_number(fit, cal, p2)
    assert n1 / n2 == pytest.approx(
        dbm_to_watts(p1) / dbm_to_watts(p2), rel=1e-9)


def test_attenuation_reduces_photons():
    fit = ResonanceFit(f0=5e9, qi=1e6, qc_star=4e5, phi=0.0)
    n0 = mean_photon_number(fit, LineCalibration(line_attenuation=0.0), -100.0)
    n70 = mean_photon_number(fit, LineCalibration(line_attenuation=70.0), -100.0)
    assert n70 == pytest.approx(n0 * 1e-7, rel=1e-12)


def test_qi_from_t1_values():
    assert qi_from_t1(0.0, 6e9) == 0.0
    assert qi_from_t1(49.4e-6, 6e9) == pytest.approx(1.862e6, rel=1e-3)
    assert qi_from_t1(9.5e-6, 6e9) == pytest.approx(3.58e5, rel=1e-3)


def test_t1_from_qi_values():
    assert t1_from_qi(0.0, 6e9) == 0.0
    assert t1_from_qi(1.4e5, 6e9) == pytest.approx(3.7e-6, rel=0.01)


def test_negative_inputs_rejected():
    with pytest.raises(ValueError):
        qi_from_t1(-1e-6, 6e9)
    with pytest.raises(ValueError):
        t1_from_qi(-1.0, 6e9)
    with pytest.raises(ValueError):
        qi_from_t1(1e-6, 0.0)


@given(t1=st.floats(0, 1e-2), f=st.floats(1e8, 2e10))
def test_qi_t1_mutual_inverses(t1, f):
    assert t1_from_qi(qi_from_t1(t1, f), f) == pytest.approx(t1, rel=1e-12, abs=1e-300)


def test_line_calibration_validation():
    with pytest.raises(ValueError):
        LineCalibration(z0=-50.0)
    with pytest.raises(ValueError):
        LineCalibration(line_attenuation=-3.0)
