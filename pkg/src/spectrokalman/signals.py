from __future__ import annotations

import numpy as np

from .errors import ConfigurationError

_UNIFORM_RTOL = 1e-6


class TimedSignal:
    """Scalar samples with either a uniform step or explicit timestamps.

    >>> s = TimedSignal([0.0, 1.0, 0.0], dt=0.5)
    >>> s.times
    array([0. , 0.5, 1. ])
    """

    def __init__(self, samples, dt: float | None = None, times=None, t0: float = 0.0):
        y = np.asarray(samples, dtype=np.float64).reshape(-1)
        if y.size < 2:
            raise ConfigurationError("a signal needs at least two samples")
        if not np.isfinite(y).all():
            raise ConfigurationError("signal samples must be finite")
        if (dt is None) == (times is None):
            raise ConfigurationError("give exactly one of dt or times")
        if dt is not None:
            dt = float(dt)
            if not dt > 0:
                raise ConfigurationError(f"dt must be positive, got {dt}")
            t = float(t0) + dt * np.arange(y.size)
        else:
            t = np.asarray(times, dtype=np.float64).reshape(-1)
            if t.shape != y.shape:
                raise ConfigurationError("times and samples differ in length")
            if not np.isfinite(t).all() or not (np.diff(t) > 0).all():
                raise ConfigurationError("timestamps must be finite and strictly increasing")
        self.samples = y
        self.times = t
        self._dt = dt

    def __len__(self) -> int:
        return self.samples.size

    @property
    def is_uniform(self) -> bool:
        if self._dt is not None:
            return True
        d = np.diff(self.times)
        return bool(np.allclose(d, d.mean(), rtol=_UNIFORM_RTOL, atol=0.0))

    @property
    def dt(self) -> float:
        """Sampling step; for timestamped input the mean spacing."""
        if self._dt is not None:
            return self._dt
        return float(np.diff(self.times).mean())

    def slice(self, start: int, stop: int) -> "TimedSignal":
        if self._dt is not None:
            return TimedSignal(self.samples[start:stop], dt=self._dt, t0=self.times[start])
        return TimedSignal(self.samples[start:stop], times=self.times[start:stop])
