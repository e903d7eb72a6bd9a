import numpy as np
import pytest

import spectrokalman.oscillator as oscillator
from spectrokalman.ecg import (
    RPeakList,
    SegmentationSpec,
    add_bursts,
    ecg_fourier_spec,
    ecg_oscillator_spec,
    extract_segments,
    featurize,
    iterative_qrs,
    pan_tompkins,
    synthetic_ecg,
)
from spectrokalman.errors import ConfigurationError, PreconditionError, TooFewPeaksError
from spectrokalman.signals import TimedSignal

from conftest import BURST_TIMES

FS = 300


def spike_train(noise_sd=0.0, seed=0):
    t = np.arange(10 * FS) / FS
    centres = 0.5 + np.arange(10)
    y = sum(np.exp(-0.5 * ((t - c) / 0.01) ** 2) for c in centres)
    if noise_sd:
        y = y + np.random.default_rng(seed).normal(0.0, noise_sd, t.size)
    return TimedSignal(y, dt=1 / FS), np.round(centres * FS).astype(int)


def recovered(found, truth, tol=15):
    found = np.asarray(found)
    return sum(bool(found.size) and np.abs(found - r).min() <= tol for r in truth)


def small_osc():
    return ecg_oscillator_spec(f0=0.4, num_freqs=100)


def test_clean_spike_train():
    sig, truth = spike_train()
    p = pan_tompkins(sig, FS)
    assert len(p) == 10
    assert np.abs(np.asarray(p) - truth).max() <= 3


def test_flat_signal_has_no_peaks():
    assert len(pan_tompkins(np.zeros(5 * FS), FS)) == 0


def test_noisy_spike_train_10db():
    sig, truth = spike_train()
    power = np.mean(sig.samples**2)
    noisy, _ = spike_train(noise_sd=np.sqrt(power / 10.0), seed=3)
    assert recovered(pan_tompkins(noisy, FS), truth) >= 9


def test_preconditions():
    with pytest.raises(PreconditionError):
        pan_tompkins(np.zeros(FS), FS)
    with pytest.raises(PreconditionError):
        pan_tompkins(np.zeros(1000), 50.0)


def test_synthetic_ecg_detection(sinus_ecg):
    sig, truth = sinus_ecg
    p = pan_tompkins(sig, FS)
    assert recovered(p, truth, tol=2) == len(truth) == len(p)


def test_iterative_equals_plain_when_enough_peaks():
    sig, _ = spike_train()
    np.testing.assert_array_equal(iterative_qrs(sig, SegmentationSpec()), pan_tompkins(sig, FS))


def test_bursts_capture_plain_detector_and_retry_recovers(burst_ecg):
    sig, truth = burst_ecg
    plain = pan_tompkins(sig, FS)
    assert len(plain) <= SegmentationSpec().delta
    for b in BURST_TIMES:
        assert np.abs(np.asarray(plain) - b * FS).min() <= 3
    assert recovered(iterative_qrs(sig, SegmentationSpec()), truth) >= 0.9 * len(truth)


def test_all_burst_signal_is_too_few_peaks():
    sig = add_bursts(TimedSignal(np.zeros(10 * FS), dt=1 / FS), [1.0, 6.0])
    assert len(iterative_qrs(sig, SegmentationSpec())) < 3
    with pytest.raises(TooFewPeaksError):
        featurize(sig, SegmentationSpec(), small_osc())


def test_segments():
    sig = TimedSignal(np.arange(3000, dtype=float), dt=1 / FS)
    segs = extract_segments(sig, [400, 1000, 1700], 300)
    assert len(segs) == 1 and len(segs[0]) == 601
    assert segs[0].samples[300] == 1000.0
    assert segs[0].times[0] == pytest.approx(700 / FS)
    segs = extract_segments(sig, [5, 10, 900, 1500, 2900], 300)
    assert [s.samples[300] for s in segs] == [900.0, 1500.0]
    with pytest.raises(TooFewPeaksError):
        extract_segments(sig, [100, 900], 300)


def test_segment_centred_on_local_max(sinus_ecg):
    sig, _ = sinus_ecg
    peaks = pan_tompkins(sig, FS)
    for s in extract_segments(sig, peaks, 300):
        assert len(s) == 601 and int(np.argmax(s.samples[250:351])) + 250 == 300


def test_peak_list_validation():
    with pytest.raises(ConfigurationError):
        RPeakList([3, 2])
    with pytest.raises(ConfigurationError):
        RPeakList([1, 10], length=10)
    assert RPeakList([]).size == 0
    with pytest.raises(ConfigurationError):
        SegmentationSpec(beta=0)


def test_featurize_shape_and_determinism(sinus_ecg):
    sig, _ = sinus_ecg
    a = featurize(sig, SegmentationSpec(), small_osc())
    b = featurize(sig, SegmentationSpec(), small_osc())
    assert a.values.shape == (50, 50)
    np.testing.assert_array_equal(a.values, b.values)


def test_featurize_jobs_independent(sinus_ecg):
    sig, _ = sinus_ecg
    a = featurize(sig, SegmentationSpec(), small_osc(), jobs=1)
    b = featurize(sig, SegmentationSpec(), small_osc(), jobs=3)
    np.testing.assert_array_equal(a.values, b.values)


def test_featurize_solves_riccati_once(sinus_ecg, monkeypatch):
    calls = []
    real = oscillator.solve_dare

    def spy(*args, **kwargs):
        calls.append(1)
        return real(*args, **kwargs)

    monkeypatch.setattr(oscillator, "solve_dare", spy)
    sig, _ = sinus_ecg
    featurize(sig, SegmentationSpec(), small_osc(), jobs=2)
    assert len(calls) == 1


def test_estimators_agree(sinus_ecg):
    sig, _ = sinus_ecg
    o = featurize(sig, SegmentationSpec(), small_osc()).values
    f = featurize(sig, SegmentationSpec(), ecg_fourier_spec(f0=0.4, num_harmonics=100)).values
    assert np.corrcoef(o.ravel(), f.ravel())[0, 1] > 0.95


def test_featurize_errors(sinus_ecg):
    sig, _ = sinus_ecg
    with pytest.raises(ConfigurationError):
        featurize(sig, SegmentationSpec(), ecg_oscillator_spec(fs=250.0, f0=0.4, num_freqs=100))
    with pytest.raises(TooFewPeaksError):
        featurize(sig.slice(0, FS), SegmentationSpec(), small_osc())
    with pytest.raises(ConfigurationError):
        featurize(sig, SegmentationSpec(), object())


def test_synthetic_ecg_rr_statistics():
    _, r = synthetic_ecg(duration=60.0, seed=1, jitter=0.3)
    rr = np.diff(r) / FS
    assert rr.min() >= 0.8 * 0.7 - 1e-9 and rr.max() <= 0.8 * 1.3 + 1e-9
    _, r = synthetic_ecg(duration=60.0)
    assert np.ptp(np.diff(r)) <= 1
