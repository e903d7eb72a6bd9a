"""Hot inner loops, each in a numba-compiled and a pure-numpy flavour.

The public names (``diag_smoother_means``, ``lti_forward``, ``lti_backward``)
dispatch to the numba kernels unless numba is unavailable or the environment
variable ``SPECTROKALMAN_DISABLE_NUMBA`` is set to a truthy value. Both flavours
stay importable under ``*_numpy`` / ``*_numba`` so tests and the benchmark can
compare them side by side in one process.

All kernels follow the same conventions: observations ``y`` have shape
``(N,)``, states have dimension ``n``, and step ``k`` uses the transition that
carries the state from sample ``k-1`` to sample ``k`` (step 0 starts from the
prior given as a *predicted* moment pair).
"""

from __future__ import annotations

import math
import os

import numpy as np

_FLAG = os.environ.get("SPECTROKALMAN_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("numba disabled by SPECTROKALMAN_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


BACKEND = "numba" if HAVE_NUMBA else "numpy"

# reassociation lets reductions vectorise; nnan/ninf stay off so the
# finiteness checks inside the kernels are kept
_FASTMATH = {"reassoc", "contract"}


def checkpoint_stride(n_steps: int) -> int:
    """Block length for the checkpointed covariance replay (~sqrt(N))."""
    return max(1, int(math.ceil(math.sqrt(n_steps))))


# ---------------------------------------------------------------------------
# Diagonal-transition smoother (time-varying measurement row)
# ---------------------------------------------------------------------------
#
# Forward pass: Kalman filter with diagonal transition psi[k] and diagonal
# process noise sigma[k]. Only means, gains and innovations are stored, plus the
# filtered covariance at the start of every block of ``stride`` steps.
# Backward pass: the adjoint (Bryson-Frazier) form of the RTS smoother,
#     lt_k  = h_k v_k / s_k + (I - K_k h_k^T)^T lam_k
#     ms_k  = m^-_k + P^-_k lt_k
#     lam_{k-1} = psi_k * lt_k
# which yields the same smoothed means without inverting P^-. Covariances are
# replayed block by block from the checkpoints, so peak memory is
# O(sqrt(N) n^2) instead of O(N n^2).


def diag_smoother_means_numpy(y, H, psi, sigma, r, m0, P0, stride):
    N, n = H.shape
    nblk = (N + stride - 1) // stride
    ckpt = np.empty((nblk, n, n))
    m_pred = np.empty((N, n))
    gain = np.empty((N, n))
    innov = np.empty(N)
    svar = np.empty(N)

    m = m0.astype(np.float64).copy()
    P = P0.astype(np.float64).copy()
    for k in range(N):
        if k % stride == 0:
            ckpt[k // stride] = P
        p = psi[k]
        m = p * m
        P = P * np.outer(p, p)
        P[np.diag_indices(n)] += sigma[k]
        h = H[k]
        Ph = P @ h
        s = h @ Ph + r
        if not (s > 0.0 and np.isfinite(s)):
            return None, k
        K = Ph / s
        v = y[k] - h @ m
        m_pred[k] = m
        gain[k] = K
        innov[k] = v
        svar[k] = s
        m = m + K * v
        P = P - np.outer(K, Ph)
        P = 0.5 * (P + P.T)
        if not np.isfinite(m).all():
            return None, k

    ms = np.empty((N, n))
    lam = np.zeros(n)
    buf = np.empty((stride, n, n))
    for b in range(nblk - 1, -1, -1):
        k0 = b * stride
        k1 = min(N, k0 + stride)
        P = ckpt[b].copy()
        for k in range(k0, k1):
            p = psi[k]
            P = P * np.outer(p, p)
            P[np.diag_indices(n)] += sigma[k]
            buf[k - k0] = P
            P = P - np.outer(gain[k], P @ H[k])
            P = 0.5 * (P + P.T)
        for k in range(k1 - 1, k0 - 1, -1):
            h = H[k]
            lt = h * (innov[k] / svar[k]) + lam - h * (gain[k] @ lam)
            ms[k] = m_pred[k] + buf[k - k0] @ lt
            lam = psi[k] * lt
    return ms, -1


@njit(cache=True, nogil=True, fastmath=_FASTMATH)
def _predict_diag(P, p, sg):
    n = P.shape[0]
    for i in range(n):
        for j in range(n):
            P[i, j] *= p[i] * p[j]
        P[i, i] += sg[i]


@njit(cache=True, nogil=True, fastmath=_FASTMATH)
def _update_rank1(P, K, Ph):
    # P - K Ph^T is symmetric in exact arithmetic; write the mean of both halves
    n = P.shape[0]
    for i in range(n):
        for j in range(i, n):
            v = 0.5 * ((P[i, j] - K[i] * Ph[j]) + (P[j, i] - K[j] * Ph[i]))
            P[i, j] = v
            P[j, i] = v


@njit(cache=True, nogil=True, fastmath=_FASTMATH)
def _diag_smoother_means_numba(y, H, psi, sigma, r, m0, P0, stride):
    N, n = H.shape
    nblk = (N + stride - 1) // stride
    ckpt = np.empty((nblk, n, n))
    m_pred = np.empty((N, n))
    gain = np.empty((N, n))
    innov = np.empty(N)
    svar = np.empty(N)
    ms = np.empty((N, n))

    m = m0.copy()
    P = P0.copy()
    Ph = np.empty(n)
    for k in range(N):
        if k % stride == 0:
            ckpt[k // stride] = P
        _predict_diag(P, psi[k], sigma[k])
        for i in range(n):
            m[i] *= psi[k, i]
        s = r
        hm = 0.0
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += P[i, j] * H[k, j]
            Ph[i] = acc
            s += H[k, i] * acc
            hm += H[k, i] * m[i]
        if not (s > 0.0 and np.isfinite(s)):
            return ms, k
        v = y[k] - hm
        for i in range(n):
            m_pred[k, i] = m[i]
            gain[k, i] = Ph[i] / s
            m[i] += gain[k, i] * v
            if not np.isfinite(m[i]):
                return ms, k
        innov[k] = v
        svar[k] = s
        _update_rank1(P, gain[k], Ph)

    lam = np.zeros(n)
    lt = np.empty(n)
    buf = np.empty((stride, n, n))
    for b in range(nblk - 1, -1, -1):
        k0 = b * stride
        k1 = min(N, k0 + stride)
        P[:, :] = ckpt[b]
        for k in range(k0, k1):
            _predict_diag(P, psi[k], sigma[k])
            buf[k - k0] = P
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += P[i, j] * H[k, j]
                Ph[i] = acc
            _update_rank1(P, gain[k], Ph)
        for k in range(k1 - 1, k0 - 1, -1):
            kl = 0.0
            for i in range(n):
                kl += gain[k, i] * lam[i]
            c = innov[k] / svar[k] - kl
            for i in range(n):
                lt[i] = H[k, i] * c + lam[i]
            Pk = buf[k - k0]
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += Pk[i, j] * lt[j]
                ms[k, i] = m_pred[k, i] + acc
            for i in range(n):
                lam[i] = psi[k, i] * lt[i]
    return ms, -1


def diag_smoother_means_numba(y, H, psi, sigma, r, m0, P0, stride):
    ms, status = _diag_smoother_means_numba(
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(H, dtype=np.float64),
        np.ascontiguousarray(psi, dtype=np.float64),
        np.ascontiguousarray(sigma, dtype=np.float64),
        float(r),
        np.ascontiguousarray(m0, dtype=np.float64),
        np.ascontiguousarray(P0, dtype=np.float64),
        int(stride),
    )
    return (None, status) if status >= 0 else (ms, -1)


# ---------------------------------------------------------------------------
# Time-invariant mean recursions (stationary filter / smoother)
# ---------------------------------------------------------------------------
#   forward:  m_k  = Phi m_{k-1} + K y_k,       Phi = (I - K H) A
#   backward: ms_k = Bm_k + G ms_{k+1},         Bm_k = (I - G A) m_k


def lti_forward_numpy(Phi, K, y, m0):
    N = y.shape[0]
    out = np.empty((N, Phi.shape[0]))
    m = np.asarray(m0, dtype=np.float64)
    for k in range(N):
        m = Phi @ m + K * y[k]
        out[k] = m
    return out


def lti_backward_numpy(G, Bm, last):
    N = Bm.shape[0]
    out = np.empty_like(Bm)
    out[N - 1] = last
    for k in range(N - 2, -1, -1):
        out[k] = Bm[k] + G @ out[k + 1]
    return out


@njit(cache=True, nogil=True, fastmath=_FASTMATH)
def _lti_forward_numba(Phi, K, y, m0):
    N = y.shape[0]
    n = Phi.shape[0]
    out = np.empty((N, n))
    m = m0.copy()
    nxt = np.empty(n)
    for k in range(N):
        for i in range(n):
            acc = K[i] * y[k]
            for j in range(n):
                acc += Phi[i, j] * m[j]
            nxt[i] = acc
        for i in range(n):
            m[i] = nxt[i]
            out[k, i] = nxt[i]
    return out


@njit(cache=True, nogil=True, fastmath=_FASTMATH)
def _lti_backward_numba(G, Bm, last):
    N, n = Bm.shape
    out = np.empty((N, n))
    for i in range(n):
        out[N - 1, i] = last[i]
    for k in range(N - 2, -1, -1):
        for i in range(n):
            acc = Bm[k, i]
            for j in range(n):
                acc += G[i, j] * out[k + 1, j]
            out[k, i] = acc
    return out


def lti_forward_numba(Phi, K, y, m0):
    return _lti_forward_numba(
        np.ascontiguousarray(Phi, dtype=np.float64),
        np.ascontiguousarray(K, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(m0, dtype=np.float64),
    )


def lti_backward_numba(G, Bm, last):
    return _lti_backward_numba(
        np.ascontiguousarray(G, dtype=np.float64),
        np.ascontiguousarray(Bm, dtype=np.float64),
        np.ascontiguousarray(last, dtype=np.float64),
    )


if HAVE_NUMBA:
    diag_smoother_means = diag_smoother_means_numba
    lti_forward = lti_forward_numba
    lti_backward = lti_backward_numba
else:
    diag_smoother_means = diag_smoother_means_numpy
    lti_forward = lti_forward_numpy
    lti_backward = lti_backward_numpy
