import math

import numpy as np
import pytest

from qumem.hysteresis import (
    EXACT,
    HIGH_FREQ,
    INTERMEDIATE,
    LOW_FREQ,
    POISSON,
    DetectionConfig,
    DetectorModel,
    DriveConfig,
    Trace,
    classify_regime,
    detection_estimate,
    hf_reference,
    lf_reference,
    rms,
    run_closed_loop,
    run_lpf_loop,
)
from qumem.memristor import FROZEN, WINDOWED, MemristorState

T_OSC = 10.0


def windowed_run(ratio, noise=EXACT, seed=None, n_periods=2, rc=0.1):
    drive = DriveConfig(T_osc=T_OSC, n_periods=n_periods)
    mem = MemristorState(0.5, window_seconds=ratio * T_OSC, law=WINDOWED)
    det = DetectionConfig(noise=noise, seed=seed, rc=rc)
    return run_closed_loop(drive, mem, det)


def test_low_frequency_limit():
    trace = windowed_run(0.01).steady()
    assert rms(trace.n_out, lf_reference(trace.n_in)) <= 0.02


def test_high_frequency_limit():
    trace = windowed_run(1.0).steady()
    assert rms(trace.n_out, hf_reference(trace.n_in)) <= 0.02


def test_orbit_pinched_at_origin():
    for ratio in (0.05, 0.3, 0.6, 1.0):
        trace = windowed_run(ratio)
        assert np.all(trace.n_out <= trace.n_in + 1e-12)
        small = trace.n_in <= 0.02
        assert np.all(trace.n_out[small] <= 0.02)


def test_trace_rows_bounded_and_increasing():
    trace = windowed_run(0.4)
    assert np.all(np.diff(trace.t) > 0)
    for arr in (trace.n_in, trace.n_out, trace.R):
        assert np.all(arr >= 0.0) and np.all(arr <= 1.0)


def test_orbit_area_unimodal_in_window():
    ratios = [0.01, 0.05, 0.2, 0.4, 0.6, 0.8, 1.0]
    areas = [windowed_run(r).steady().orbit_area() for r in ratios]
    peak = int(np.argmax(areas))
    assert all(areas[i] >= areas[i + 1] - 1e-12 for i in range(peak, len(areas) - 1))
    assert all(areas[i] <= areas[i + 1] + 1e-12 for i in range(0, peak))
    # vanishing limits on both sides
    assert areas[0] < 0.02
    assert areas[-1] < 1e-4


def test_frozen_law_gives_exact_line():
    drive = DriveConfig(T_osc=T_OSC, n_periods=1)
    mem = MemristorState(0.5, law=FROZEN)
    trace = run_closed_loop(drive, mem, DetectionConfig())
    assert np.allclose(trace.n_out, 0.5 * trace.n_in, atol=1e-14)


def test_rc_larger_than_window_rejected():
    # the guard binds when the RC filter participates (pulse counting)
    drive = DriveConfig(T_osc=T_OSC)
    mem = MemristorState(0.5, window_seconds=0.05, law=WINDOWED)
    with pytest.raises(ValueError):
        run_closed_loop(drive, mem, DetectionConfig(rc=0.1, noise=POISSON))
    # exact readout has no filter, so the same geometry is fine
    mem2 = MemristorState(0.5, window_seconds=0.05, law=WINDOWED)
    run_closed_loop(drive, mem2, DetectionConfig(rc=0.1, noise=EXACT))


def test_drive_config_needs_fine_dt():
    with pytest.raises(ValueError):
        DriveConfig(T_osc=1.0, dt=0.01)


# ---------------------------------------------------------------------------
# detection model

def test_detection_exact_scaling():
    det = DetectionConfig(max_rate=3e4, noise=EXACT)
    assert detection_estimate(3e4, det, 1e-3) == pytest.approx(1.0)
    assert detection_estimate(1.5e4, det, 1e-3) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        detection_estimate(4e4, det, 1e-3)


def test_detection_poisson_converges_to_rate():
    det = DetectionConfig(max_rate=3e4, rc=0.1, noise=POISSON, seed=5)
    model = DetectorModel(det)
    dt = 1e-3
    rate = 1.2e4
    for _ in range(int(50 * det.rc / dt)):  # 50 time constants
        est = model.estimate(rate, dt)
    # stationary filtered-shot-noise variance:
    # Var = alpha/(2-alpha) * rate/(dt * max_rate^2)
    alpha = 1.0 - math.exp(-dt / det.rc)
    sigma = math.sqrt(alpha / (2 - alpha) * rate / (dt * det.max_rate**2))
    assert abs(est - rate / det.max_rate) < 3 * sigma


def test_detection_poisson_empirical_variance():
    det = DetectionConfig(max_rate=3e4, rc=0.05, noise=POISSON, seed=11)
    model = DetectorModel(det)
    dt = 1e-3
    rate = 2.0e4
    values = []
    for k in range(60000):
        est = model.estimate(rate, dt)
        if k > 2000:
            values.append(est)
    alpha = 1.0 - math.exp(-dt / det.rc)
    predicted = alpha / (2 - alpha) * rate / (dt * det.max_rate**2)
    measured = float(np.var(values))
    assert measured == pytest.approx(predicted, rel=0.2)


def test_detection_poisson_reproducible():
    def run():
        model = DetectorModel(DetectionConfig(noise=POISSON, seed=99))
        return [model.estimate(1e4, 1e-3) for _ in range(100)]

    assert run() == run()


def test_poisson_loop_counts_and_orbit_rms():
    noiseless = windowed_run(1.0).steady()
    noisy_trace = windowed_run(1.0, noise=POISSON, seed=3)
    noisy = noisy_trace.steady()
    assert rms(noisy.n_out, noiseless.n_out) <= 0.06
    assert rms(noisy.n_out, hf_reference(noisy.n_in)) <= 0.06
    counts = noisy_trace.meta["mean_counts_per_rc_window"]
    assert 100 <= counts <= 1500  # a few hundred per estimate


# ---------------------------------------------------------------------------
# low-pass (phase-shifter) memristance

def test_lpf_loop_slow_drive_is_nonlinear_resistor():
    f_cut = 4.62
    drive = DriveConfig(T_osc=10.0, n_periods=2)  # f_osc = 0.1 Hz
    trace = run_lpf_loop(drive, f_cut, DetectionConfig()).steady()
    assert rms(trace.n_out, lf_reference(trace.n_in)) <= 0.03


def test_lpf_loop_fast_drive_is_linear():
    f_cut = 4.62
    f_osc = 20 * f_cut
    drive = DriveConfig(T_osc=1.0 / f_osc, n_periods=30)
    trace = run_lpf_loop(drive, f_cut, DetectionConfig(rc=1e-4)).steady(10)
    assert rms(trace.n_out, hf_reference(trace.n_in)) <= 0.02


def test_lpf_loop_pinched_near_cutoff():
    f_cut = 4.62
    for f_osc in (0.1, 1.0, 4.62, 10.0):
        drive = DriveConfig(T_osc=1.0 / f_osc, n_periods=3)
        trace = run_lpf_loop(drive, f_cut, DetectionConfig(rc=1e-3))
        small = trace.n_in <= 0.02
        assert np.all(trace.n_out[small] <= 0.02)


def test_lpf_loop_open_lobe_at_cutoff():
    f_cut = 4.62
    drive = DriveConfig(T_osc=1.0 / f_cut, n_periods=4)
    trace = run_lpf_loop(drive, f_cut, DetectionConfig(rc=1e-3)).steady(2)
    assert trace.orbit_area() > 0.02  # genuinely open hysteresis lobe


# ---------------------------------------------------------------------------
# regimes and trace utilities

def test_classify_regime():
    assert classify_regime(0.1, 10.0) == LOW_FREQ
    assert classify_regime(10.0, 10.0) == HIGH_FREQ
    assert classify_regime(3.0, 10.0) == INTERMEDIATE
    assert classify_regime(0.5, 10.0) == LOW_FREQ
    with pytest.raises(ValueError):
        classify_regime(-1.0, 10.0)


def test_trace_csv_roundtrip(tmp_path):
    trace = windowed_run(0.2, n_periods=1)
    path = tmp_path / "trace.csv"
    trace.write_csv(path)
    rows = np.genfromtxt(path, delimiter=",", names=True)
    assert rows.shape[0] == len(trace)
    assert np.allclose(rows["n_out"], trace.n_out, atol=1e-10)
    meta_path = tmp_path / "trace.json"
    trace.write_meta(meta_path)
    assert meta_path.read_text().startswith("{")
