import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from spectrokalman.errors import ConfigurationError, PreconditionError
from spectrokalman.fourier import (
    FourierBasisSpec,
    build_step_model,
    estimate_fourierks,
    measurement_rows,
    step_models,
)
from spectrokalman.signals import TimedSignal
from spectrokalman.statespace import kalman_filter, rts_smoother


def test_step_model_values():
    spec = FourierBasisSpec(f0=0.1, num_harmonics=2, lam=0.01, q=2.5)
    m = build_step_model(spec, 3.0, 13.0)
    np.testing.assert_allclose(np.diag(m.transition), math.exp(-0.1), rtol=1e-15)
    assert math.exp(-0.1) == pytest.approx(0.904837, abs=1e-6)
    np.testing.assert_allclose(np.diag(m.process_noise) / 2.5, 0.181269, atol=1e-6)
    assert np.count_nonzero(m.transition - np.diag(np.diag(m.transition))) == 0


def test_step_model_matches_ou_moment_integration():
    # mean and variance ODEs of dc = -lam c dt + sqrt(2 lam q) dW from c(0) = 1
    lam, q, dt = 0.01, 1.7, 10.0

    def rhs(_, z):
        m, v = z
        return [-lam * m, -2 * lam * v + 2 * lam * q]

    sol = solve_ivp(rhs, (0.0, dt), [1.0, 0.0], rtol=1e-12, atol=1e-14)
    m_end, v_end = sol.y[:, -1]
    spec = FourierBasisSpec(f0=0.1, num_harmonics=1, lam=lam, q=q)
    step = build_step_model(spec, 0.0, dt)
    assert step.transition[0, 0] == pytest.approx(m_end, rel=1e-9)
    assert step.process_noise[0, 0] == pytest.approx(v_end, rel=1e-9)


def test_step_model_zero_step_limit():
    spec = FourierBasisSpec(f0=0.1, num_harmonics=3, lam=0.01)
    m = build_step_model(spec, 1.0, 1.0 + 1e-9)
    np.testing.assert_allclose(np.diag(m.transition), 1.0, atol=1e-10)
    np.testing.assert_allclose(np.diag(m.process_noise), 0.0, atol=1e-10)
    with pytest.raises(PreconditionError):
        build_step_model(spec, 1.0, 1.0)


def test_quarter_period_row():
    spec = FourierBasisSpec(f0=1.0, num_harmonics=1)
    h = measurement_rows(spec, [0.25])[0]
    np.testing.assert_allclose(h, [1.0, 0.0, 1.0], atol=1e-15)


def test_row_layout():
    spec = FourierBasisSpec(f0=0.5, num_harmonics=3)
    t = 0.3
    h = measurement_rows(spec, [t])[0]
    j = np.arange(1, 4)
    np.testing.assert_allclose(h[1:4], np.cos(2 * np.pi * j * 0.5 * t))
    np.testing.assert_allclose(h[4:], np.sin(2 * np.pi * j * 0.5 * t))


def test_per_frequency_overrides():
    spec = FourierBasisSpec(f0=1.0, num_harmonics=3, lam=[1.0, 2.0, 3.0])
    np.testing.assert_array_equal(spec.lam_vector(), [1, 1, 2, 3, 1, 2, 3])
    spec = FourierBasisSpec(f0=1.0, num_harmonics=3, q=[9.0, 1.0, 2.0, 3.0])
    np.testing.assert_array_equal(spec.q_vector(), [9, 1, 2, 3, 1, 2, 3])
    with pytest.raises(ConfigurationError):
        FourierBasisSpec(f0=1.0, num_harmonics=3, lam=[1.0, 2.0]).lam_vector()


@pytest.mark.parametrize(
    "kw",
    [dict(f0=0.0), dict(num_harmonics=0), dict(lam=-1.0), dict(q=0.0), dict(r=0.0), dict(prior_var=0.0)],
)
def test_spec_validation(kw):
    base = dict(f0=0.1, num_harmonics=5)
    base.update(kw)
    with pytest.raises(ConfigurationError):
        FourierBasisSpec(**base)


def test_nyquist_check():
    spec = FourierBasisSpec(f0=1.0, num_harmonics=6)
    with pytest.raises(ConfigurationError):
        estimate_fourierks(TimedSignal(np.zeros(50), dt=0.1), spec)


def test_zero_signal_zero_matrix():
    spec = FourierBasisSpec(f0=0.1, num_harmonics=8)
    S = estimate_fourierks(TimedSignal(np.zeros(300), dt=0.05), spec)
    assert S.shape == (8, 300)
    assert np.all(S.values == 0.0)


@pytest.mark.parametrize("M,N", [(1, 2), (5, 37), (12, 200)])
def test_output_shape_and_metadata(M, N):
    spec = FourierBasisSpec(f0=0.2, num_harmonics=M)
    sig = TimedSignal(np.random.default_rng(0).normal(size=N), dt=0.1, t0=4.0)
    S = estimate_fourierks(sig, spec)
    assert S.shape == (M, N)
    np.testing.assert_allclose(S.times, 4.0 + 0.1 * np.arange(N))
    np.testing.assert_allclose(S.freqs, 0.2 * np.arange(1, M + 1))
    assert S.burn_in_cols == 0


def test_matches_dense_reference():
    spec = FourierBasisSpec(f0=0.3, num_harmonics=3, lam=0.5, q=2.0, r=0.4)
    t = np.cumsum(np.random.default_rng(3).uniform(0.05, 0.2, 60))
    y = np.sin(2 * np.pi * 0.6 * t) + 0.1 * np.random.default_rng(4).normal(size=60)
    models = step_models(spec, t)
    ref = rts_smoother(kalman_filter(models, y, spec.prior()), models).means
    S = estimate_fourierks(TimedSignal(y, times=t), spec)
    np.testing.assert_allclose(S.values, np.hypot(ref[:, 1:4], ref[:, 4:]).T, rtol=1e-9, atol=1e-12)


def test_sinusoid_at_tenth_harmonic():
    f0, dt = 0.1, 0.05
    t = np.arange(2400) * dt
    y = np.sin(2 * np.pi * 10 * f0 * t)
    spec = FourierBasisSpec(f0=f0, num_harmonics=20, lam=0.1, q=1.0, r=0.01)
    S = estimate_fourierks(TimedSignal(y, dt=dt), spec)
    interior = slice(400, 2000)
    rows = np.argmax(S.values[:, interior], axis=0)
    # oracle: least-squares Fourier fit over a 20 s sliding window
    H = measurement_rows(spec, t[1000:1400])
    coef, *_ = np.linalg.lstsq(H, y[1000:1400], rcond=None)
    lsq = np.hypot(coef[1:21], coef[21:])
    assert np.argmax(lsq) == 9
    assert np.all(rows == np.argmax(lsq))


def test_uneven_sampling_close_to_full_estimate():
    rng = np.random.default_rng(11)
    dt = 0.1
    t = np.arange(1500) * dt
    y = np.sin(2 * np.pi * 0.2 * t) + 0.7 * np.sin(2 * np.pi * 0.35 * t) + 0.1 * rng.normal(size=t.size)
    spec = FourierBasisSpec(f0=0.05, num_harmonics=10, lam=0.05, q=1.0, r=0.1)
    full = estimate_fourierks(TimedSignal(y, dt=dt), spec).values
    keep = np.ones(t.size, dtype=bool)
    keep[1 + rng.choice(t.size - 2, size=300, replace=False)] = False
    part = estimate_fourierks(TimedSignal(y[keep], times=t[keep]), spec).values
    ref = full[:, keep]
    rms = np.sqrt(np.mean((part - ref) ** 2)) / np.sqrt(np.mean(ref**2))
    assert rms < 0.10


def test_larger_r_never_increases_peak_magnitude():
    y = np.random.default_rng(7).normal(size=400)
    peaks = []
    for r in (0.1, 1.0, 10.0):
        spec = FourierBasisSpec(f0=0.1, num_harmonics=10, lam=1.0, q=1.0, r=r)
        peaks.append(estimate_fourierks(TimedSignal(y, dt=0.05), spec).values.max())
    assert peaks[0] >= peaks[1] >= peaks[2]


def test_backends_agree():
    y = np.random.default_rng(8).normal(size=500)
    spec = FourierBasisSpec(f0=0.1, num_harmonics=15, lam=0.5)
    sig = TimedSignal(y, dt=0.02)
    a = estimate_fourierks(sig, spec, backend="numpy").values
    b = estimate_fourierks(sig, spec, backend="numba").values
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)
