import numpy as np
import pytest

from endohaptics.calibration import (
    CSV_HEADER,
    DEFAULT_FULL_SCALE,
    REFERENCE_SIGMA_MM,
    CalibrationSample,
    DegenerateDataError,
    accuracy_report,
    fit_calibration,
    noisy_accuracy,
    random_wrenches,
    read_samples_csv,
    samples_to_csv,
    synthesize_samples,
    write_samples_csv,
)
from endohaptics.sensor import (
    CalibrationMatrix,
    PhotoReadings,
    SensorParams,
    Wrench3,
    calibration_matrix,
    compliance_matrix,
    forward_deflections,
)

P = SensorParams()


def samples_from(cal: CalibrationMatrix, readings: np.ndarray) -> list[CalibrationSample]:
    return [CalibrationSample(PhotoReadings(*r), Wrench3(*(cal.m @ r))) for r in readings]


def test_exact_recovery_from_noise_free_samples():
    cal = fit_calibration(synthesize_samples(P, 20, seed=4))
    np.testing.assert_allclose(cal.m, calibration_matrix(P).m, atol=1e-9)
    assert cal.residual is not None and cal.residual < 1e-9


def test_recovers_arbitrary_generator():
    rng = np.random.default_rng(8)
    truth = CalibrationMatrix(rng.normal(size=(3, 3)) * 5)
    cal = fit_calibration(samples_from(truth, rng.normal(size=(30, 3))))
    np.testing.assert_allclose(cal.m, truth.m, atol=1e-9)


def test_three_pure_axis_samples():
    # readings produced by pure Fz, pure Mx and pure My loads
    C = compliance_matrix(P)
    loads = [Wrench3(2.0, 0, 0), Wrench3(0, 30.0, 0), Wrench3(0, 0, 30.0)]
    samples = [CalibrationSample(PhotoReadings(*(-C @ w.as_array())), w) for w in loads]
    cal = fit_calibration(samples)
    np.testing.assert_allclose(cal.m, calibration_matrix(P).m, atol=1e-12)


def test_two_samples_are_degenerate():
    with pytest.raises(DegenerateDataError) as info:
        fit_calibration(synthesize_samples(P, 2, seed=1))
    d = info.value.direction
    assert d.shape == (3,) and np.linalg.norm(d) == pytest.approx(1.0)


def test_empty_sample_set_is_degenerate():
    with pytest.raises(DegenerateDataError):
        fit_calibration([])


def test_degenerate_direction_is_the_missing_one():
    # dB == dC in every sample: nothing excites (0, 1, -1)
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(2, 10))
    readings = np.column_stack([a, b, b])
    with pytest.raises(DegenerateDataError) as info:
        fit_calibration(samples_from(calibration_matrix(P), readings))
    d = info.value.direction
    assert abs(d @ np.array([0, 1, -1]) / np.sqrt(2)) == pytest.approx(1.0, abs=1e-9)
    assert "rank 2" in str(info.value)


def test_noise_free_accuracy_is_100():
    samples = synthesize_samples(P, 40, seed=3)
    rep = accuracy_report(calibration_matrix(P), samples)
    assert rep.per_axis_accuracy == pytest.approx((100.0, 100.0, 100.0), abs=1e-9)
    assert rep.overall_accuracy == pytest.approx(100.0, abs=1e-9)
    assert rep.sample_count == 40
    assert not rep.out_of_bounds


def test_five_percent_offset_gives_95():
    cal = calibration_matrix(P)
    fs = DEFAULT_FULL_SCALE.as_array()
    rng = np.random.default_rng(0)
    samples = []
    for r in rng.uniform(-2, 2, size=(12, 3)):
        est = cal.m @ r
        signs = rng.choice([-1.0, 1.0], size=3)
        samples.append(CalibrationSample(PhotoReadings(*r), Wrench3(*(est + signs * 0.05 * fs))))
    rep = accuracy_report(cal, samples)
    assert rep.overall_accuracy == pytest.approx(95.0, abs=1e-9)
    assert rep.per_axis_rmse == pytest.approx(tuple(0.05 * fs), rel=1e-9)


def test_accuracy_report_validation():
    samples = synthesize_samples(P, 5)
    cal = calibration_matrix(P)
    with pytest.raises(ValueError):
        accuracy_report(cal, [])
    with pytest.raises(ValueError):
        accuracy_report(cal, samples, Wrench3(5.0, 0.0, 80.0))


def test_pathological_accuracy_is_reported_not_clamped():
    cal = calibration_matrix(P)
    r = np.array([1.0, 0.5, -0.5])
    samples = [CalibrationSample(PhotoReadings(*r), Wrench3(*(cal.m @ r + (15.0, 0, 0))))]
    rep = accuracy_report(cal, samples)
    assert rep.per_axis_accuracy[0] == pytest.approx(-200.0)
    assert rep.out_of_bounds
    assert "outside [0, 100]" in rep.format()


def test_random_wrenches_never_saturate():
    w = random_wrenches(P, 2000, np.random.default_rng(1))
    assert w.shape == (2000, 3)
    assert not any(forward_deflections(Wrench3(*row), P).saturated for row in w)


def test_accuracy_decreases_with_sigma():
    seeds = range(30)
    acc = [noisy_accuracy(P, s, seeds) for s in (0.25, 0.6, 1.0, 1.5, 2.2)]
    assert all(a > b for a, b in zip(acc, acc[1:]))
    assert noisy_accuracy(P, 0.0, range(3)) == pytest.approx(100.0, abs=1e-9)


def test_reference_sigma_gives_95():
    assert noisy_accuracy(P, REFERENCE_SIGMA_MM, range(30)) == pytest.approx(95.0, abs=0.05)


def test_synthesis_is_deterministic():
    a = samples_to_csv(synthesize_samples(P, 10, sigma=0.3, seed=9))
    b = samples_to_csv(synthesize_samples(P, 10, sigma=0.3, seed=9))
    c = samples_to_csv(synthesize_samples(P, 10, sigma=0.3, seed=10))
    assert a == b != c


def test_csv_round_trip(tmp_path):
    samples = synthesize_samples(P, 25, sigma=0.1, quantization_step=0.01, seed=6)
    path = tmp_path / "s.csv"
    write_samples_csv(samples, path)
    assert path.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    assert read_samples_csv(path) == samples


def test_csv_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    write_samples_csv([], path)
    assert path.read_text() == ",".join(CSV_HEADER) + "\n"
    assert read_samples_csv(path) == []


@pytest.mark.parametrize(
    "body, fragment",
    [
        ("a,b,c,d,e,f\n", "header"),
        (",".join(CSV_HEADER) + "\n1,2,3\n", "6 fields"),
        (",".join(CSV_HEADER) + "\n1,2,3,4,5,x\n", ":2:"),
        (",".join(CSV_HEADER) + "\n1,2,3,4,5,nan\n", "non-finite"),
    ],
)
def test_csv_errors(tmp_path, body, fragment):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(ValueError, match=fragment):
        read_samples_csv(path)
