"""Fourier series with time-varying coefficients under Ornstein-Uhlenbeck priors.

Every coefficient (``a0`` included) follows ``dc = -lam c dt + dW`` and the
signal is observed as ``y_k = h(t_k) x_k + r_k`` with
``h(t) = [1, cos(2 pi f0 t), ..., cos(2 pi M f0 t), sin(2 pi f0 t), ..., sin(2 pi M f0 t)]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, PreconditionError
from .signals import TimedSignal
from .spectrogram import CoefficientLayout, SpectroTemporalMatrix, magnitude_from_coefficients
from .statespace import GaussianState, StepModel, smoothed_means_diagonal


def _per_coefficient(value, M: int, name: str) -> np.ndarray:
    """Expand a scalar or per-frequency setting to the 2M+1 state entries.

    A vector may have length M (``a0`` then reuses the first entry) or M+1
    (entry 0 is for ``a0``).
    """
    v = np.asarray(value, dtype=np.float64)
    if v.ndim == 0:
        return np.full(2 * M + 1, float(v))
    v = v.reshape(-1)
    if v.size == M:
        v = np.concatenate(([v[0]], v))
    if v.size != M + 1:
        raise ConfigurationError(f"{name} must be a scalar or have length {M} or {M + 1}")
    return np.concatenate((v, v[1:]))


@dataclass(frozen=True)
class FourierBasisSpec:
    f0: float
    num_harmonics: int
    lam: float | np.ndarray = 10.0
    q: float | np.ndarray = 1.0
    r: float = 1.0
    prior_var: float | None = None

    def __post_init__(self):
        if not self.f0 > 0:
            raise ConfigurationError(f"f0 must be positive, got {self.f0}")
        if int(self.num_harmonics) != self.num_harmonics or self.num_harmonics < 1:
            raise ConfigurationError(f"num_harmonics must be a positive integer, got {self.num_harmonics}")
        object.__setattr__(self, "num_harmonics", int(self.num_harmonics))
        for name in ("lam", "q"):
            if not (np.asarray(getattr(self, name)) > 0).all():
                raise ConfigurationError(f"{name} must be positive")
        if not self.r > 0:
            raise ConfigurationError(f"r must be positive, got {self.r}")
        if self.prior_var is not None and not self.prior_var > 0:
            raise ConfigurationError(f"prior_var must be positive, got {self.prior_var}")

    @property
    def dim(self) -> int:
        return 2 * self.num_harmonics + 1

    @property
    def freqs(self) -> np.ndarray:
        return self.f0 * np.arange(1, self.num_harmonics + 1)

    def lam_vector(self) -> np.ndarray:
        return _per_coefficient(self.lam, self.num_harmonics, "lam")

    def q_vector(self) -> np.ndarray:
        return _per_coefficient(self.q, self.num_harmonics, "q")

    def prior(self) -> GaussianState:
        """Zero mean; variance ``prior_var`` or, by default, ``q`` per coefficient."""
        var = self.q_vector() if self.prior_var is None else np.full(self.dim, self.prior_var)
        return GaussianState(np.zeros(self.dim), np.diag(var))

    def check_sampling(self, signal: TimedSignal) -> None:
        if signal.is_uniform:
            nyquist = 0.5 / signal.dt
            top = self.num_harmonics * self.f0
            if top > nyquist * (1 + 1e-12):
                raise ConfigurationError(
                    f"highest frequency {top:g} Hz exceeds the Nyquist frequency {nyquist:g} Hz"
                )


def measurement_rows(spec: FourierBasisSpec, times) -> np.ndarray:
    t = np.asarray(times, dtype=np.float64).reshape(-1)
    phase = 2.0 * np.pi * spec.f0 * np.outer(t, np.arange(1, spec.num_harmonics + 1))
    return np.hstack((np.ones((t.size, 1)), np.cos(phase), np.sin(phase)))


def _discrete_diag(spec: FourierBasisSpec, steps) -> tuple[np.ndarray, np.ndarray]:
    lam = spec.lam_vector()
    q = spec.q_vector()
    steps = np.asarray(steps, dtype=np.float64).reshape(-1, 1)
    psi = np.exp(-lam * steps)
    sigma = q * -np.expm1(-2.0 * lam * steps)
    return psi, sigma


def build_step_model(spec: FourierBasisSpec, t_prev: float, t_cur: float) -> StepModel:
    """Transition from ``t_prev`` to ``t_cur`` and the measurement row at ``t_cur``.

    ``psi = exp(-lam dt)`` and ``Sigma = q (1 - exp(-2 lam dt))`` on the diagonal.
    """
    step = float(t_cur) - float(t_prev)
    if not step > 0:
        raise PreconditionError(f"time step must be positive, got {step}")
    psi, sigma = _discrete_diag(spec, [step])
    return StepModel(np.diag(psi[0]), np.diag(sigma[0]), measurement_rows(spec, [t_cur])[0], spec.r)


def step_models(spec: FourierBasisSpec, times):
    """Model provider for the core filter; step 0 starts from the prior at ``t_0``."""
    t = np.asarray(times, dtype=np.float64)
    n = spec.dim
    H = measurement_rows(spec, t)

    def provider(k: int) -> StepModel:
        if k == 0:
            return StepModel(np.eye(n), np.zeros((n, n)), H[0], spec.r)
        return build_step_model(spec, t[k - 1], t[k])

    return provider


def estimate_fourierks(
    signal: TimedSignal, spec: FourierBasisSpec, backend: str | None = None
) -> SpectroTemporalMatrix:
    """Smoothed Fourier-coefficient magnitudes, an ``M x N`` matrix.

    Works for uniform and non-uniform timestamps. ``backend`` selects the
    kernel flavour (``"numba"`` or ``"numpy"``); default follows the
    package-wide setting.
    """
    spec.check_sampling(signal)
    t = signal.times
    steps = np.concatenate(([0.0], np.diff(t)))
    psi, sigma = _discrete_diag(spec, steps)
    ms = smoothed_means_diagonal(
        signal.samples, measurement_rows(spec, t), psi, sigma, spec.r, spec.prior(), backend
    )
    return magnitude_from_coefficients(
        ms, CoefficientLayout.fourier(spec.num_harmonics), spec.freqs, signal.dt, times=t
    )
