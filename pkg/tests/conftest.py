"""Shared fixtures and oracles."""

from __future__ import annotations

import numpy as np
import pytest

from spectrokalman.ecg import add_bursts, synthetic_ecg
from spectrokalman.statespace import GaussianState, StepModel

# bursts at 1.0 s (inside the detector's 2 s learning window) and mid-record
BURST_TIMES = (1.0, 15.03)


def batch_posterior(models, y, prior, upto=None):
    """Exact Gaussian conditioning on the stacked states ``x_0..x_{N-1}``.

    Builds ``X = L z`` with ``z = [x_-1, q_0, ..., q_{N-1}]`` so the joint
    covariance is ``L C L^T`` and conditions on ``y_0..y_upto`` directly.
    Returns per-step means and covariances of the posterior.
    """
    N = len(y)
    n = prior.dim
    upto = N - 1 if upto is None else upto
    L = np.zeros((N * n, (N + 1) * n))
    C = np.zeros(((N + 1) * n, (N + 1) * n))
    C[:n, :n] = prior.cov
    mz = np.zeros((N + 1) * n)
    mz[:n] = prior.mean
    prev = np.hstack([np.eye(n), np.zeros((n, N * n))])
    for k, mdl in enumerate(models):
        row = mdl.transition @ prev
        row[:, (k + 1) * n:(k + 2) * n] += np.eye(n)
        L[k * n:(k + 1) * n] = row
        C[(k + 1) * n:(k + 2) * n, (k + 1) * n:(k + 2) * n] = mdl.process_noise
        prev = row
    mx = L @ mz
    Pxx = L @ C @ L.T
    m = upto + 1
    Hb = np.zeros((m, N * n))
    for k in range(m):
        Hb[k, k * n:(k + 1) * n] = models[k].measurement_row
    Ryy = Hb @ Pxx @ Hb.T + np.diag([models[k].measurement_noise for k in range(m)])
    gain = np.linalg.solve(Ryy, Hb @ Pxx).T
    post_m = mx + gain @ (np.asarray(y[:m]) - Hb @ mx)
    post_P = Pxx - gain @ Hb @ Pxx
    means = post_m.reshape(N, n)
    covs = np.array([post_P[k * n:(k + 1) * n, k * n:(k + 1) * n] for k in range(N)])
    return means, covs


def random_model_sequence(rng, n, N):
    models = []
    for _ in range(N):
        A = rng.normal(size=(n, n))
        A *= rng.uniform(0.3, 1.1) / max(1e-9, np.abs(np.linalg.eigvals(A)).max())
        B = rng.normal(size=(n, n))
        Q = 0.5 * B @ B.T + 0.01 * np.eye(n)
        h = rng.normal(size=n)
        models.append(StepModel(A, Q, h, rng.uniform(0.1, 2.0)))
    B = rng.normal(size=(n, n))
    prior = GaussianState(rng.normal(size=n), B @ B.T + 0.1 * np.eye(n))
    y = rng.normal(size=N) * 2.0
    return models, prior, y


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


@pytest.fixture(scope="session")
def sinus_ecg():
    """Sinus rhythm: 0.8 s RR with respiratory modulation and 2% beat-to-beat jitter."""
    return synthetic_ecg(duration=30.0, seed=0, rsa=0.06, jitter=0.02)


@pytest.fixture(scope="session")
def af_ecg():
    """AF-like rhythm: RR intervals jittered uniformly by +-30%."""
    return synthetic_ecg(duration=30.0, seed=0, jitter=0.3)


@pytest.fixture(scope="session")
def burst_ecg():
    sig, r_idx = synthetic_ecg(duration=30.0, seed=0)
    return add_bursts(sig, BURST_TIMES), r_idx
