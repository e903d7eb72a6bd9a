"""Spectro-temporal matrices: assembly from coefficient pairs, averaging, resizing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, PreconditionError

FEATURE_SHAPE = (50, 50)


@dataclass
class SpectroTemporalMatrix:
    """Nonnegative magnitudes, one row per frequency and one column per sample."""

    values: np.ndarray
    freqs: np.ndarray
    dt: float
    burn_in_cols: int = 0
    times: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.freqs = np.asarray(self.freqs, dtype=np.float64).reshape(-1)
        if self.values.ndim != 2 or self.values.shape[0] != self.freqs.size:
            raise ConfigurationError(
                f"values {self.values.shape} inconsistent with {self.freqs.size} frequencies"
            )
        if self.freqs.size > 1 and not (np.diff(self.freqs) > 0).all():
            raise ConfigurationError("frequencies must be strictly ascending")
        if (self.values < 0).any() or not np.isfinite(self.values).all():
            raise ConfigurationError("magnitudes must be finite and nonnegative")
        if self.times is None:
            self.times = self.dt * np.arange(self.values.shape[1])
        else:
            self.times = np.asarray(self.times, dtype=np.float64)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass
class FeatureMatrix:
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != FEATURE_SHAPE:
            raise ConfigurationError(f"feature matrix must be {FEATURE_SHAPE}, got {self.values.shape}")
        if not np.isfinite(self.values).all() or (self.values < 0).any():
            raise ConfigurationError("feature values must be finite and nonnegative")


@dataclass(frozen=True)
class CoefficientLayout:
    """Positions of the cosine (``a``) and sine (``b``) coefficient of each frequency."""

    a_index: np.ndarray
    b_index: np.ndarray

    @classmethod
    def fourier(cls, M: int) -> "CoefficientLayout":
        # [a0, a1..aM, b1..bM]
        j = np.arange(1, M + 1)
        return cls(j, M + j)

    @classmethod
    def oscillator(cls, M: int) -> "CoefficientLayout":
        # [bias, a1, b1, a2, b2, ...]
        j = np.arange(1, M + 1)
        return cls(2 * j - 1, 2 * j)


def magnitude_from_coefficients(
    smoothed_means,
    layout: CoefficientLayout,
    freqs,
    dt: float,
    burn_in_cols: int = 0,
    times=None,
) -> SpectroTemporalMatrix:
    """``S[j, k] = hypot(a_j(t_k), b_j(t_k))`` from an ``(N, n)`` array of means."""
    means = np.asarray(smoothed_means, dtype=np.float64)
    n = means.shape[1]
    a_idx = np.asarray(layout.a_index)
    b_idx = np.asarray(layout.b_index)
    if a_idx.shape != b_idx.shape:
        raise ConfigurationError("layout index arrays differ in length")
    for idx in (a_idx, b_idx):
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise ConfigurationError(f"layout index out of bounds for state dimension {n}")
    values = np.hypot(means[:, a_idx], means[:, b_idx]).T
    return SpectroTemporalMatrix(values, freqs, dt, burn_in_cols, times)


def average_with_max_mask(matrices) -> SpectroTemporalMatrix:
    """Elementwise mean over the inputs times their elementwise maximum.

    The sum runs in input order so the result does not depend on how the
    inputs were computed. Metadata comes from the first matrix.
    """
    mats = list(matrices)
    if not mats:
        raise PreconditionError("need at least one matrix to average")
    shape = mats[0].values.shape
    total = np.zeros(shape)
    peak = np.zeros(shape)
    for m in mats:
        if m.values.shape != shape:
            raise PreconditionError(f"shape mismatch: {m.values.shape} vs {shape}")
        total += m.values
        np.maximum(peak, m.values, out=peak)
    first = mats[0]
    return SpectroTemporalMatrix(
        (total / len(mats)) * peak, first.freqs, first.dt, first.burn_in_cols, first.times
    )


def bin_edges(size: int, bins: int) -> np.ndarray:
    """Edges of ``bins`` contiguous groups covering ``range(size)``.

    Sizes differ by at most one; the larger groups come first.

    >>> bin_edges(7, 3)
    array([0, 3, 5, 7])
    """
    if bins < 1 or size < bins:
        raise ConfigurationError(f"cannot split {size} items into {bins} bins")
    base, extra = divmod(size, bins)
    counts = np.full(bins, base)
    counts[:extra] += 1
    return np.concatenate(([0], np.cumsum(counts)))


def resize_block_mean(matrix, out_rows: int = 50, out_cols: int = 50) -> np.ndarray:
    """Down-sample by averaging contiguous blocks (see :func:`bin_edges`)."""
    values = matrix.values if hasattr(matrix, "values") else np.asarray(matrix, dtype=np.float64)
    rows, cols = values.shape
    if rows < out_rows or cols < out_cols:
        raise ConfigurationError(
            f"input {values.shape} smaller than requested output {(out_rows, out_cols)}"
        )
    re = bin_edges(rows, out_rows)
    ce = bin_edges(cols, out_cols)
    # block sums via cumulative reductions over the bin starts
    row_sums = np.add.reduceat(values, re[:-1], axis=0)
    block_sums = np.add.reduceat(row_sums, ce[:-1], axis=1)
    return block_sums / np.outer(np.diff(re), np.diff(ce))


def to_feature(matrix) -> FeatureMatrix:
    return FeatureMatrix(resize_block_mean(matrix, *FEATURE_SHAPE))
