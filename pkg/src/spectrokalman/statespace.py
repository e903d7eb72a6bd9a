"""Linear-Gaussian state-space machinery with a scalar measurement.

The filter and smoother here are the straightforward dense recursions and are
meant for moderate state dimensions and as a reference path. The estimators in
:mod:`spectrokalman.fourier` and :mod:`spectrokalman.oscillator` run
structure-exploiting kernels that are checked against these functions.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import ConfigurationError, NumericalFailure, PreconditionError

JITTER = 1e-10


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        cov = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
        if cov.shape != (mean.size, mean.size):
            raise ConfigurationError(
                f"covariance shape {cov.shape} does not match mean length {mean.size}"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class StepModel:
    """Transition ``x_k = A x_{k-1} + q``, ``q ~ N(0, Q)``; measurement ``y = h x + r``."""

    transition: np.ndarray
    process_noise: np.ndarray
    measurement_row: np.ndarray
    measurement_noise: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.transition, dtype=np.float64))
        Q = np.atleast_2d(np.asarray(self.process_noise, dtype=np.float64))
        h = np.asarray(self.measurement_row, dtype=np.float64).reshape(-1)
        n = h.size
        if A.shape != (n, n) or Q.shape != (n, n):
            raise ConfigurationError(
                f"transition {A.shape} / process noise {Q.shape} inconsistent with "
                f"measurement row of length {n}"
            )
        r = float(self.measurement_noise)
        if not r > 0.0:
            raise ConfigurationError(f"measurement noise must be positive, got {r}")
        object.__setattr__(self, "transition", A)
        object.__setattr__(self, "process_noise", Q)
        object.__setattr__(self, "measurement_row", h)
        object.__setattr__(self, "measurement_noise", r)

    @property
    def dim(self) -> int:
        return self.measurement_row.size


ModelProvider = Union[StepModel, Sequence[StepModel], Callable[[int], StepModel]]


def as_provider(models: ModelProvider) -> Callable[[int], StepModel]:
    """Normalise a model argument to a ``k -> StepModel`` callable.

    A single :class:`StepModel` is shared by every step (time-invariant case).
    """
    if isinstance(models, StepModel):
        return lambda k: models
    if callable(models):
        return models
    seq = list(models)
    return seq.__getitem__


@dataclass
class FilterTrace:
    """Everything the forward pass produces, indexed by observation.

    ``pred_covs`` and ``filt_covs`` are ``None`` when the filter ran in
    means-only mode.
    """

    pred_means: np.ndarray
    pred_covs: np.ndarray | None
    filt_means: np.ndarray
    filt_covs: np.ndarray | None
    gains: np.ndarray
    innovation_vars: np.ndarray

    def __len__(self) -> int:
        return self.filt_means.shape[0]

    def state(self, k: int) -> GaussianState:
        if self.filt_covs is None:
            raise PreconditionError("trace was produced without covariances")
        return GaussianState(self.filt_means[k], self.filt_covs[k])


@dataclass
class SmootherResult:
    means: np.ndarray
    covs: np.ndarray

    def __len__(self) -> int:
        return self.means.shape[0]

    def __getitem__(self, k: int) -> GaussianState:
        return GaussianState(self.means[k], self.covs[k])


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def kalman_filter(
    models: ModelProvider,
    observations,
    prior: GaussianState,
    store_covariances: bool = True,
) -> FilterTrace:
    """Forward Kalman recursion for a scalar measurement.

    For ``k = 0..N-1``::

        m-_k = A_k m_{k-1}            P-_k = A_k P_{k-1} A_k^T + Q_k
        S_k  = h_k P-_k h_k^T + R     K_k  = P-_k h_k^T / S_k
        m_k  = m-_k + K_k (y_k - h_k m-_k)
        P_k  = P-_k - K_k S_k K_k^T   (then symmetrised)

    where ``(m_{-1}, P_{-1})`` is ``prior``. Pass ``store_covariances=False``
    to keep only the means, gains and innovation variances.
    """
    y = np.asarray(observations, dtype=np.float64).reshape(-1)
    N = y.size
    if N == 0:
        raise PreconditionError("observations must be non-empty")
    if not np.isfinite(y).all():
        raise PreconditionError("observations contain non-finite values")
    provider = as_provider(models)
    n = prior.dim

    pred_means = np.empty((N, n))
    filt_means = np.empty((N, n))
    gains = np.empty((N, n))
    svars = np.empty(N)
    pred_covs = np.empty((N, n, n)) if store_covariances else None
    filt_covs = np.empty((N, n, n)) if store_covariances else None

    m, P = prior.mean, prior.cov
    for k in range(N):
        model = provider(k)
        if model.dim != n:
            raise ConfigurationError(
                f"model at step {k} has dimension {model.dim}, prior has {n}"
            )
        A, h = model.transition, model.measurement_row
        m_pred = A @ m
        P_pred = _symmetrize(A @ P @ A.T + model.process_noise)
        Ph = P_pred @ h
        S = float(h @ Ph) + model.measurement_noise
        if not (np.isfinite(S) and S > 0.0):
            raise NumericalFailure(f"innovation variance {S!r} is not positive", k)
        K = Ph / S
        m = m_pred + K * (y[k] - h @ m_pred)
        P = _symmetrize(P_pred - S * np.outer(K, K))
        if not (np.isfinite(m).all() and np.isfinite(P).all()):
            raise NumericalFailure("non-finite filter state", k)

        pred_means[k] = m_pred
        filt_means[k] = m
        gains[k] = K
        svars[k] = S
        if store_covariances:
            pred_covs[k] = P_pred
            filt_covs[k] = P
    return FilterTrace(pred_means, pred_covs, filt_means, filt_covs, gains, svars)


def _solve_spd(P: np.ndarray, B: np.ndarray, step: int) -> np.ndarray:
    """Solve ``P X = B`` for symmetric PSD ``P``, retrying once with jitter."""
    for jitter in (0.0, JITTER):
        try:
            Pj = P + jitter * np.eye(P.shape[0]) if jitter else P
            factor = scipy.linalg.cho_factor(Pj, lower=True, check_finite=False)
            X = scipy.linalg.cho_solve(factor, B, check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            continue
        if np.isfinite(X).all():
            return X
    raise NumericalFailure("predicted covariance is singular", step)


def rts_smoother(trace: FilterTrace, models: ModelProvider) -> SmootherResult:
    """Rauch-Tung-Striebel backward pass over a full filter trace.

    For ``k = N-2..0``::

        G_k  = P_k A_{k+1}^T [P-_{k+1}]^{-1}
        ms_k = m_k + G_k (ms_{k+1} - m-_{k+1})
        Ps_k = P_k + G_k (Ps_{k+1} - P-_{k+1}) G_k^T

    The inverse is applied through a Cholesky solve.
    """
    if trace.filt_covs is None or trace.pred_covs is None:
        raise PreconditionError("rts_smoother needs a trace with stored covariances")
    provider = as_provider(models)
    N = len(trace)
    means = trace.filt_means.copy()
    covs = trace.filt_covs.copy()
    for k in range(N - 2, -1, -1):
        A = provider(k + 1).transition
        P = trace.filt_covs[k]
        P_pred = trace.pred_covs[k + 1]
        # G^T = P-^{-1} A P  (both covariances symmetric)
        G = _solve_spd(P_pred, A @ P, k).T
        means[k] = trace.filt_means[k] + G @ (means[k + 1] - trace.pred_means[k + 1])
        covs[k] = _symmetrize(P + G @ (covs[k + 1] - P_pred) @ G.T)
        if not (np.isfinite(means[k]).all() and np.isfinite(covs[k]).all()):
            raise NumericalFailure("non-finite smoother state", k)
    return SmootherResult(means, covs)


def smoothed_means_diagonal(
    observations,
    measurement_rows: np.ndarray,
    transition_diag: np.ndarray,
    noise_diag: np.ndarray,
    measurement_noise: float,
    prior: GaussianState,
    backend: str | None = None,
) -> np.ndarray:
    """Smoothed means for models with diagonal transition and process noise.

    Low-memory counterpart of ``rts_smoother(kalman_filter(...))`` for the
    case where every ``A_k`` and ``Q_k`` is diagonal; row ``k`` of each
    ``(N, n)`` array describes step ``k``. Returns an ``(N, n)`` array equal to
    the RTS smoothed means.
    """
    y = np.asarray(observations, dtype=np.float64).reshape(-1)
    H = np.asarray(measurement_rows, dtype=np.float64)
    psi = np.asarray(transition_diag, dtype=np.float64)
    sig = np.asarray(noise_diag, dtype=np.float64)
    N = y.size
    n = prior.dim
    for name, arr in (("measurement_rows", H), ("transition_diag", psi), ("noise_diag", sig)):
        if arr.shape != (N, n):
            raise ConfigurationError(f"{name} has shape {arr.shape}, expected {(N, n)}")
    if not np.isfinite(y).all():
        raise PreconditionError("observations contain non-finite values")
    if not measurement_noise > 0:
        raise ConfigurationError("measurement noise must be positive")

    backend = backend or _kernels.BACKEND
    kernel = (
        _kernels.diag_smoother_means_numba
        if backend == "numba"
        else _kernels.diag_smoother_means_numpy
    )
    ms, status = kernel(
        y, H, psi, sig, float(measurement_noise), prior.mean, prior.cov,
        _kernels.checkpoint_stride(N),
    )
    if status >= 0:
        raise NumericalFailure("non-finite or non-positive innovation", status)
    return ms
