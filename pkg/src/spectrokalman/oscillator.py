"""Bank of damped stochastic oscillators plus a Brownian bias, as an LTI model.

Each oscillator ``j`` has state ``(a_j, b_j)`` and drift
``[[-lam, -w_j], [w_j, -lam]]`` with ``w_j = 2 pi f_j``; the bias is a random
walk with diffusion ``q_b``. Because the model is time-invariant the Kalman
gain converges, so after one Riccati solve the filter and smoother reduce to
constant-gain mean recursions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import ConfigurationError, DareConvergenceError, PreconditionError
from .signals import TimedSignal
from .spectrogram import CoefficientLayout, SpectroTemporalMatrix, magnitude_from_coefficients
from .statespace import GaussianState, StepModel, _solve_spd

DARE_TOL = 1e-9
DARE_MAX_ITER = 100_000


@dataclass(frozen=True)
class OscillatorBankSpec:
    frequencies: np.ndarray
    dt: float
    lam: float = 10.0
    q: float = 1.0
    q_b: float = 1e-7
    r: float = 1.0
    bias_prior_var: float = 1.0

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "frequencies", f)
        if f.size == 0:
            raise ConfigurationError("need at least one oscillator frequency")
        if not (f > 0).all():
            raise ConfigurationError("oscillator frequencies must be positive")
        if np.unique(f).size != f.size:
            raise ConfigurationError("oscillator frequencies must be distinct")
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not self.lam > 0 or not self.q > 0 or not self.r > 0:
            raise ConfigurationError("lam, q and r must be positive")
        if not self.q_b >= 0:
            raise ConfigurationError(f"q_b must be nonnegative, got {self.q_b}")
        nyquist = 0.5 / self.dt
        if f.max() >= nyquist:
            raise ConfigurationError(
                f"oscillator at {f.max():g} Hz is at or above the Nyquist frequency {nyquist:g} Hz"
            )

    @classmethod
    def grid(cls, f0: float, num_freqs: int, dt: float, **kwargs) -> "OscillatorBankSpec":
        """Oscillators at ``j * f0`` for ``j = 1..num_freqs``."""
        return cls(f0 * np.arange(1, int(num_freqs) + 1), dt, **kwargs)

    @property
    def num_freqs(self) -> int:
        return self.frequencies.size

    @property
    def dim(self) -> int:
        return 2 * self.num_freqs + 1

    def burn_in_steps(self) -> int:
        """Samples inside five damping time constants, ``ceil(5 / (lam dt))``."""
        return int(math.ceil(5.0 / (self.lam * self.dt)))

    def prior(self) -> GaussianState:
        """Zero mean; oscillators at their stationary variance ``q / (2 lam)``."""
        var = np.full(self.dim, self.q / (2.0 * self.lam))
        var[0] = self.bias_prior_var
        return GaussianState(np.zeros(self.dim), np.diag(var))


@dataclass(frozen=True)
class StationaryGains:
    P_inf_pred: np.ndarray
    K: np.ndarray
    G: np.ndarray
    P_inf_filt: np.ndarray
    residual: float
    iterations: int


def oscillator_block(lam: float, freq: float, dt: float) -> np.ndarray:
    """``exp(F dt)`` for ``F = [[-lam, -w], [w, -lam]]``: a damped rotation."""
    w = 2.0 * np.pi * freq * dt
    c, s = math.cos(w), math.sin(w)
    return math.exp(-lam * dt) * np.array([[c, -s], [s, c]])


def oscillator_noise(lam: float, q: float, dt: float) -> float:
    """Diagonal entry of the discretised noise, ``q / (2 lam) (1 - exp(-2 lam dt))``."""
    return q / (2.0 * lam) * -math.expm1(-2.0 * lam * dt)


def build_lti_model(spec: OscillatorBankSpec) -> StepModel:
    """Block-diagonal ``A``, ``Q`` and the row ``H = [1, 1, 0, 1, 0, ...]``."""
    n = spec.dim
    A = np.zeros((n, n))
    A[0, 0] = 1.0
    Q = np.zeros((n, n))
    Q[0, 0] = spec.q_b * spec.dt
    qj = oscillator_noise(spec.lam, spec.q, spec.dt)
    for j, f in enumerate(spec.frequencies):
        i = 2 * j + 1
        A[i:i + 2, i:i + 2] = oscillator_block(spec.lam, f, spec.dt)
        Q[i, i] = Q[i + 1, i + 1] = qj
    H = np.zeros(n)
    H[0] = 1.0
    H[1::2] = 1.0
    return StepModel(A, Q, H, spec.r)


def dare_rhs(P: np.ndarray, model: StepModel) -> np.ndarray:
    """One Riccati step: ``A P A' + Q - A P h (h P h' + R)^-1 h' P A'``."""
    A, h = model.transition, model.measurement_row
    AP = A @ P
    APh = AP @ h
    S = float(h @ P @ h) + model.measurement_noise
    out = AP @ A.T + model.process_noise - np.outer(APh, APh) / S
    return 0.5 * (out + out.T)


def _residual(P: np.ndarray, model: StepModel) -> float:
    return float(np.max(np.abs(P - dare_rhs(P, model))))


def _iterate(model, P, tol, max_iter):
    res = np.inf
    for it in range(1, max_iter + 1):
        P_next = dare_rhs(P, model)
        res = float(np.max(np.abs(P_next - P)))
        P = P_next
        if res < tol:
            return P, it
    raise DareConvergenceError("Riccati iteration did not converge", res, max_iter)


def _doubling(model, tol, max_iter):
    # Structure-preserving doubling: step k equals the 2^k-th Riccati iterate
    # started from Q, so convergence is quadratic once the iteration contracts.
    n = model.dim
    h = model.measurement_row
    Ak = model.transition.T.copy()
    Gk = np.outer(h, h) / model.measurement_noise
    Hk = model.process_noise.copy()
    eye = np.eye(n)
    change = np.inf
    # 64 doublings already cover 2**64 plain Riccati steps
    for it in range(1, min(max_iter, 64) + 1):
        W = eye + Gk @ Hk
        lu = scipy.linalg.lu_factor(W, check_finite=False)
        V1 = scipy.linalg.lu_solve(lu, Ak, check_finite=False)
        V2 = scipy.linalg.lu_solve(lu, Gk, check_finite=False)
        H_next = Hk + Ak.T @ Hk @ V1
        H_next = 0.5 * (H_next + H_next.T)
        Gk = Gk + Ak @ V2 @ Ak.T
        Gk = 0.5 * (Gk + Gk.T)
        change = float(np.max(np.abs(H_next - Hk)))
        Ak = Ak @ V1
        Hk = H_next
        if not np.isfinite(Hk).all():
            break
        if change < tol and _residual(Hk, model) < tol:
            return Hk, it
    raise DareConvergenceError("doubling iteration did not converge", change, it)


def solve_dare(
    model: StepModel,
    tol: float = DARE_TOL,
    max_iter: int = DARE_MAX_ITER,
    method: str = "doubling",
) -> StationaryGains:
    """Stationary predicted covariance and the constant filter/smoother gains.

    ``method="iteration"`` repeats the Riccati step from ``P = Q``;
    ``method="doubling"`` reaches the same fixed point with far fewer (but
    costlier) steps and is then polished by plain iteration. Either way the
    result satisfies ``max|P - dare_rhs(P)| < tol``.
    """
    if not tol > 0 or max_iter < 1:
        raise ConfigurationError("tol must be positive and max_iter at least 1")
    if method == "iteration":
        P, iters = _iterate(model, model.process_noise.copy(), tol, max_iter)
    elif method == "doubling":
        P, iters = _doubling(model, tol, max_iter)
        if _residual(P, model) >= tol:
            P, extra = _iterate(model, P, tol, max_iter)
            iters += extra
    else:
        raise ConfigurationError(f"unknown DARE method {method!r}")

    h = model.measurement_row
    Ph = P @ h
    S = float(h @ Ph) + model.measurement_noise
    K = Ph / S
    P_filt = P - np.outer(Ph, Ph) / S
    P_filt = 0.5 * (P_filt + P_filt.T)
    G = _solve_spd(P, model.transition @ P_filt, step=0).T
    return StationaryGains(P, K, G, P_filt, _residual(P, model), iters)


def _backend_pair(backend: str | None):
    backend = backend or _kernels.BACKEND
    if backend == "numba":
        return _kernels.lti_forward_numba, _kernels.lti_backward_numba
    if backend == "numpy":
        return _kernels.lti_forward_numpy, _kernels.lti_backward_numpy
    raise ConfigurationError(f"unknown backend {backend!r}")


def stationary_filter(
    model: StepModel, gains: StationaryGains, observations, initial_mean=None, backend=None
) -> np.ndarray:
    """Constant-gain forward pass ``m_k = A m_{k-1} + K (y_k - h A m_{k-1})``.

    Returns the ``(N, n)`` filtered means; no covariance is touched.
    """
    y = np.asarray(observations, dtype=np.float64).reshape(-1)
    if not np.isfinite(y).all():
        raise PreconditionError("observations contain non-finite values")
    n = model.dim
    m0 = np.zeros(n) if initial_mean is None else np.asarray(initial_mean, dtype=np.float64)
    if m0.shape != (n,):
        raise ConfigurationError(f"initial mean must have length {n}")
    Phi = model.transition - np.outer(gains.K, model.measurement_row @ model.transition)
    forward, _ = _backend_pair(backend)
    return forward(Phi, gains.K, y, m0)


def stationary_smoother(
    model: StepModel, gains: StationaryGains, filtered_means, backend=None
) -> np.ndarray:
    """Constant-gain backward pass ``ms_k = m_k + G (ms_{k+1} - A m_k)``."""
    m = np.asarray(filtered_means, dtype=np.float64)
    if m.shape[0] == 1:
        return m.copy()
    # the (I - G A) m_k terms do not depend on the recursion: one matrix product
    Bm = m @ (np.eye(model.dim) - gains.G @ model.transition).T
    _, backward = _backend_pair(backend)
    return backward(gains.G, Bm, m[-1])


class OscKS:
    """Model and stationary gains for one spec, reusable across signals.

    Solving the Riccati equation dominates the set-up cost, so segment-wise
    callers build one instance and call :meth:`estimate` many times.
    """

    def __init__(self, spec: OscillatorBankSpec, gains: StationaryGains | None = None, backend=None):
        self.spec = spec
        self.model = build_lti_model(spec)
        self.gains = gains if gains is not None else solve_dare(self.model)
        self.backend = backend

    def smoothed_means(self, y) -> np.ndarray:
        filt = stationary_filter(self.model, self.gains, y, backend=self.backend)
        return stationary_smoother(self.model, self.gains, filt, backend=self.backend)

    def estimate(self, signal: TimedSignal) -> SpectroTemporalMatrix:
        if not signal.is_uniform:
            raise ConfigurationError(
                "the oscillator model needs uniformly sampled input; "
                "use the Fourier-series estimator (fourierks) for timestamped signals"
            )
        if not math.isclose(signal.dt, self.spec.dt, rel_tol=1e-6):
            raise ConfigurationError(
                f"signal step {signal.dt:g} s differs from the model step {self.spec.dt:g} s"
            )
        ms = self.smoothed_means(signal.samples)
        return magnitude_from_coefficients(
            ms,
            CoefficientLayout.oscillator(self.spec.num_freqs),
            self.spec.frequencies,
            signal.dt,
            burn_in_cols=min(len(signal), self.spec.burn_in_steps()),
            times=signal.times,
        )


def estimate_oscks(signal: TimedSignal, spec: OscillatorBankSpec, backend=None) -> SpectroTemporalMatrix:
    """Smoothed oscillator magnitudes (bias excluded), an ``M x N`` matrix."""
    if not signal.is_uniform:
        raise ConfigurationError(
            "the oscillator model needs uniformly sampled input; "
            "use the Fourier-series estimator (fourierks) for timestamped signals"
        )
    return OscKS(spec, backend=backend).estimate(signal)
