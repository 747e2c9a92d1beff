import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from endohaptics.sensor import (
    PRINTED_CALIBRATION,
    CalibrationMatrix,
    PhotoNoiseModel,
    PhotoReadings,
    SensorError,
    SensorParams,
    SpringDeflections,
    Wrench3,
    calibration_matrix,
    compliance_matrix,
    estimate_wrench,
    forward_deflections,
    photo_from_springs,
    sense,
)
from oracles import compliance_oracle

P = SensorParams()


def round_trip(w, p, cal=None):
    cal = cal or calibration_matrix(p)
    return estimate_wrench(photo_from_springs(forward_deflections(w, p)), cal)


# --- forward model -----------------------------------------------------------


def test_zero_load_gives_zero_deflection():
    s = forward_deflections(Wrench3(), P)
    assert (s.d1, s.d2, s.d3, s.saturated) == (0.0, 0.0, 0.0, False)


def test_pure_fz_example():
    s = forward_deflections(Wrench3(3.0, 0, 0), P)
    assert s.d1 == s.d2 == s.d3
    assert s.d1 == pytest.approx(5.102, abs=5e-4)
    assert not s.saturated


def test_pure_mx_example():
    s = forward_deflections(Wrench3(0, 9.408, 0), P)
    assert s.d1 == pytest.approx(2.0, abs=1e-12)
    assert s.d2 == pytest.approx(-1.0, abs=1e-12)
    assert s.d3 == pytest.approx(-1.0, abs=1e-12)


@pytest.mark.parametrize("k,d", [(0.196, 16.0), (1.0, 1.0), (0.05, 50.0), (5.0, 5.0)])
def test_compliance_matches_lever_arm_oracle(k, d):
    np.testing.assert_allclose(compliance_matrix(SensorParams(k, d)), compliance_oracle(k, d), rtol=1e-14, atol=1e-15)


def test_compliance_entries():
    assert compliance_matrix(P)[0, 0] == pytest.approx(1.7007, abs=1e-4)
    assert compliance_matrix(SensorParams(1.0, 1.0))[0, 1] == pytest.approx(2.0 / 3.0, abs=1e-15)
    for k, d in [(0.1, 7.0), (2.0, 30.0)]:
        assert compliance_matrix(SensorParams(k, d))[0, 2] == 0.0


def test_forward_agrees_with_compliance_matrix():
    rng = np.random.default_rng(3)
    C = compliance_matrix(P)
    for _ in range(50):
        w = rng.uniform(-1, 1, 3) * (1.0, 15.0, 15.0)
        s = forward_deflections(Wrench3(*w), P)
        np.testing.assert_allclose(s.as_array(), C @ w, rtol=1e-13, atol=1e-14)


def test_saturation_clamps_and_flags():
    s = forward_deflections(Wrench3(10.0, 0, 0), P)  # 17 mm requested
    assert s.saturated
    assert (s.d1, s.d2, s.d3) == (5.6, 5.6, 5.6)
    s = forward_deflections(Wrench3(-10.0, 0, 0), P)
    assert s.saturated and s.d1 == -5.6


def test_non_finite_wrench_rejected():
    with pytest.raises(SensorError):
        Wrench3(float("nan"), 0, 0)
    with pytest.raises(SensorError):
        Wrench3(0, float("inf"), 0)
    with pytest.raises(SensorError):
        SensorParams(k=float("inf"))


@pytest.mark.parametrize("kwargs", [dict(k=0), dict(d=-1), dict(deflection_limit=0), dict(spring_angles=(0, 120, 240))])
def test_invalid_params(kwargs):
    with pytest.raises(SensorError):
        SensorParams(**kwargs)


# --- photo readings and noise ------------------------------------------------


def test_photo_sign_flip():
    r = photo_from_springs(SpringDeflections(1.0, -0.5, -0.5))
    assert (r.dA, r.dB, r.dC) == (-1.0, 0.5, 0.5)
    r = photo_from_springs(SpringDeflections(0, 0, 0))
    assert (r.dA, r.dB, r.dC) == (0.0, 0.0, 0.0)


def test_quantization_example():
    noise = PhotoNoiseModel(sigma=0.0, quantization_step=0.3, seed=0)
    r = photo_from_springs(SpringDeflections(1.0, 0, 0), noise)
    # round(-1.0 / 0.3) * 0.3
    assert r.dA == pytest.approx(-0.9, abs=1e-15)
    assert r.dB == 0.0 and r.dC == 0.0


def test_noise_determinism():
    s = SpringDeflections(1.0, -0.3, 2.0)
    a = [photo_from_springs(s, n) for n in [PhotoNoiseModel(0.05, 0.01, seed=42)] * 5]
    b = [photo_from_springs(s, n) for n in [PhotoNoiseModel(0.05, 0.01, seed=42)] * 5]
    assert a == b
    c = photo_from_springs(s, PhotoNoiseModel(0.05, 0.01, seed=43))
    assert c != a[0]


def test_noise_statistics():
    noise = PhotoNoiseModel(sigma=0.1, seed=5)
    x = noise.apply(np.zeros(200_000))
    assert abs(x.mean()) < 2e-3
    assert x.std() == pytest.approx(0.1, rel=0.01)


def test_noise_validation():
    with pytest.raises(SensorError):
        PhotoNoiseModel(sigma=-1)
    with pytest.raises(SensorError):
        PhotoNoiseModel(quantization_step=float("nan"))


# --- calibration matrix ------------------------------------------------------


def test_golden_matrix_against_printed_values():
    P_form = calibration_matrix(P).printed_form
    assert np.max(np.abs(P_form - PRINTED_CALIBRATION)) <= 0.002
    np.testing.assert_allclose(P_form[0], [0.196, 0.196, 0.196], atol=1e-15)
    np.testing.assert_allclose(P_form[1], [3.136, -1.568, -1.568], atol=1e-12)
    np.testing.assert_allclose(P_form[2], [0.0, 2.7159, -2.7159], atol=1e-4)


def test_printed_reference_values():
    expected = np.array([[0.196, 0.196, 0.196], [3.135, -1.567, -1.567], [0.0, 2.717, -2.717]])
    np.testing.assert_array_equal(PRINTED_CALIBRATION, expected)


@pytest.mark.parametrize("k,d", [(0.196, 16.0), (0.05, 5.0), (5.0, 50.0), (1.3, 9.1)])
def test_calibration_is_negated_inverse(k, d):
    p = SensorParams(k, d)
    m = calibration_matrix(p).m
    np.testing.assert_allclose(m @ -compliance_matrix(p), np.eye(3), atol=1e-12)
    np.testing.assert_allclose(m, -np.linalg.inv(compliance_oracle(k, d)), rtol=1e-12, atol=1e-12)


def test_calibration_first_row_equal():
    m = calibration_matrix(SensorParams(0.7, 21.0)).m
    assert m[0, 0] == m[0, 1] == m[0, 2]


def test_symmetric_readings_example():
    w = estimate_wrench(PhotoReadings(-1, -1, -1), calibration_matrix(P))
    assert w.fz == pytest.approx(0.588, abs=1e-12)
    assert w.mx == pytest.approx(0.0, abs=1e-12)
    assert w.my == pytest.approx(0.0, abs=1e-12)


def test_inverse_of_fz_example():
    w = estimate_wrench(PhotoReadings(-5.102, -5.102, -5.102), calibration_matrix(P))
    assert w.fz == pytest.approx(3.0, abs=1e-3)


def test_zero_readings_give_zero_wrench():
    assert estimate_wrench(PhotoReadings(0, 0, 0), calibration_matrix(P)) == Wrench3()


def test_calibration_matrix_validation():
    with pytest.raises(SensorError):
        CalibrationMatrix(np.eye(2))
    with pytest.raises(SensorError):
        CalibrationMatrix(np.full((3, 3), np.nan))
    cal = calibration_matrix(P)
    with pytest.raises(ValueError):
        cal.m[0, 0] = 1.0
    assert 1.0 < cal.condition_number < 100.0


# --- properties --------------------------------------------------------------

finite = st.floats(-1.0, 1.0, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(k=st.floats(0.05, 5.0), d=st.floats(5.0, 50.0), u=st.tuples(finite, finite, finite))
def test_round_trip_property(k, d, u):
    p = SensorParams(k, d)
    # pick deflections inside the limit, map back to a wrench
    w = Wrench3(*(-calibration_matrix(p).m @ (np.array(u) * p.deflection_limit)))
    est = round_trip(w, p).as_array()
    # relative per component; the floor only matters for components that are
    # themselves at rounding level compared with the rest of the wrench
    floor = 1e-12 * np.max(np.abs(w.as_array()))
    np.testing.assert_allclose(est, w.as_array(), rtol=1e-9, atol=floor)


@settings(max_examples=200, deadline=None)
@given(w1=st.tuples(finite, finite, finite), w2=st.tuples(finite, finite, finite), a=finite, b=finite)
def test_linearity(w1, w2, a, b):
    p = SensorParams(deflection_limit=1e6)
    x1 = np.array(w1) * (1, 10, 10)
    x2 = np.array(w2) * (1, 10, 10)
    lhs = forward_deflections(Wrench3(*(a * x1 + b * x2)), p).as_array()
    rhs = a * forward_deflections(Wrench3(*x1), p).as_array() + b * forward_deflections(Wrench3(*x2), p).as_array()
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(f=finite, k=st.floats(0.05, 5.0), d=st.floats(5.0, 50.0))
def test_single_axis_structure(f, k, d):
    p = SensorParams(k, d, deflection_limit=1e6)
    s = forward_deflections(Wrench3(f, 0, 0), p)
    assert s.d1 == s.d2 == s.d3
    s = forward_deflections(Wrench3(0, 0, 10 * f), p)
    assert s.d1 == 0.0 and s.d2 == -s.d3
    mx = 10 * f
    s = forward_deflections(Wrench3(0, mx, 0), p)
    assert k * s.d1 * d - k * s.d2 * d / 2 - k * s.d3 * d / 2 == pytest.approx(mx, abs=1e-12)


def test_sense_pipeline():
    cal = calibration_matrix(P)
    w = Wrench3(1.0, -8.0, 10.0)
    est, sat = sense(w, P, cal)
    assert not sat
    np.testing.assert_allclose(est.as_array(), w.as_array(), rtol=1e-12)
    _, sat = sense(Wrench3(50.0, 0, 0), P, cal)
    assert sat


def test_wrench_helpers():
    w = Wrench3(1, 2, 3)
    assert tuple(w) == (1, 2, 3)
    assert w.scaled(2) == Wrench3(2, 4, 6)
    assert math.isclose(float(np.linalg.norm(w.as_array())), math.sqrt(14))
