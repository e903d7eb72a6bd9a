"""Piecewise multi-sinusoid test signals, an STFT baseline, scoring and timing."""

from __future__ import annotations

import csv
import platform
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .fourier import FourierBasisSpec, estimate_fourierks
from .oscillator import OscillatorBankSpec, build_lti_model, OscKS, solve_dare
from .signals import TimedSignal
from .spectrogram import SpectroTemporalMatrix

DEFAULT_SEGMENTS = (
    (1.0, 150.0, (0.01, 0.3)),
    (150.0, 250.0, (0.2, 0.3)),
    (250.0, 300.0, (0.13, 0.2)),
    (300.0, 400.0, (0.2, 0.43)),
    (400.0, 500.0, (0.1, 0.43)),
)

# Estimator settings for the simulated signal. lam, f0 and M give a 0.01 Hz
# grid up to 0.5 Hz with slow coefficient dynamics; q, r and q_b are local
# choices documented in the README.
SIM_F0 = 0.01
SIM_M = 50
SIM_LAM = 0.01
SIM_Q = 1.0
SIM_R = 0.01
SIM_QB = 1e-4


def sim_fourier_spec(**overrides) -> FourierBasisSpec:
    kw = dict(f0=SIM_F0, num_harmonics=SIM_M, lam=SIM_LAM, q=SIM_Q, r=SIM_R)
    kw.update(overrides)
    return FourierBasisSpec(**kw)


def sim_oscillator_spec(dt: float, **overrides) -> OscillatorBankSpec:
    # q scaled by 2 lam so both models share the stationary coefficient variance
    kw = dict(lam=SIM_LAM, q=2.0 * SIM_LAM * SIM_Q, q_b=SIM_QB, r=SIM_R)
    kw.update(overrides)
    return OscillatorBankSpec.grid(SIM_F0, SIM_M, dt, **kw)


@dataclass(frozen=True)
class PiecewiseSinusoidSpec:
    segments: tuple = DEFAULT_SEGMENTS
    noise_sd: float = 0.1
    dt: float = 0.1
    seed: int = 42

    def __post_init__(self):
        segs = tuple((float(a), float(b), tuple(float(f) for f in fs)) for a, b, fs in self.segments)
        if not segs:
            raise ConfigurationError("need at least one segment")
        for (a, b, _), nxt in zip(segs, segs[1:] + (None,)):
            if not b > a:
                raise ConfigurationError(f"segment [{a}, {b}) is empty")
            if nxt is not None and nxt[0] != b:
                raise ConfigurationError("segments must be contiguous and ascending")
        if not self.dt > 0 or not self.noise_sd >= 0:
            raise ConfigurationError("dt must be positive and noise_sd nonnegative")
        object.__setattr__(self, "segments", segs)

    @property
    def start(self) -> float:
        return self.segments[0][0]

    @property
    def end(self) -> float:
        return self.segments[-1][1]

    @property
    def num_samples(self) -> int:
        # samples t0 + k dt with t < end; the epsilon absorbs round-off in the ratio
        return int(np.ceil((self.end - self.start) / self.dt - 1e-9))

    def times(self) -> np.ndarray:
        return self.start + self.dt * np.arange(self.num_samples)

    def boundary_indices(self) -> np.ndarray:
        """First sample index of every segment, plus ``num_samples``."""
        starts = [int(np.ceil((a - self.start) / self.dt - 1e-9)) for a, _, _ in self.segments]
        return np.array(starts + [self.num_samples])

    def regime_of(self, t) -> np.ndarray:
        """Segment index for each time, ``-1`` outside the covered span."""
        t = np.asarray(t, dtype=np.float64)
        edges = np.array([a for a, _, _ in self.segments] + [self.end])
        idx = np.searchsorted(edges, t, side="right") - 1
        idx[(t < self.start) | (t >= self.end)] = -1
        return idx

    def transitions(self) -> np.ndarray:
        return np.array([a for a, _, _ in self.segments[1:]])


def clean_signal(spec: PiecewiseSinusoidSpec) -> np.ndarray:
    t = spec.times()
    y = np.empty_like(t)
    b = spec.boundary_indices()
    for i, (_, _, freqs) in enumerate(spec.segments):
        tt = t[b[i]:b[i + 1]]
        y[b[i]:b[i + 1]] = sum(np.sin(2.0 * np.pi * f * tt) for f in freqs)
    return y


def generate_simulated(spec: PiecewiseSinusoidSpec | None = None) -> TimedSignal:
    """Sum of unit sinusoids per segment plus white noise, deterministic per seed."""
    spec = spec or PiecewiseSinusoidSpec()
    y = clean_signal(spec)
    if spec.noise_sd > 0:
        y = y + np.random.default_rng(spec.seed).normal(0.0, spec.noise_sd, y.size)
    return TimedSignal(y, dt=spec.dt, t0=spec.start)


def _hann(n: int) -> np.ndarray:
    # periodic-free symmetric Hann, matching the usual DSP definition
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / (n - 1))


def stft_baseline(
    signal: TimedSignal, window_len: int = 350, overlap: int = 340, window: str = "hann"
) -> SpectroTemporalMatrix:
    """Windowed DFT magnitudes on the bins ``k / (window_len dt)``, ``k >= 1``.

    Magnitudes are scaled by ``2 / sum(window)`` so a unit sinusoid on a bin
    reads about 1, like the state-space estimators. Column ``i`` sits at the
    centre of frame ``i``.
    """
    N = len(signal)
    if not (2 <= window_len <= N):
        raise ConfigurationError(f"window length must be in [2, {N}], got {window_len}")
    if not (0 <= overlap < window_len):
        raise ConfigurationError("overlap must be nonnegative and smaller than the window")
    if window == "hann":
        w = _hann(window_len)
    elif window in ("rect", "boxcar", "rectangular"):
        w = np.ones(window_len)
    else:
        raise ConfigurationError(f"unknown window {window!r}")
    hop = window_len - overlap
    frames = np.lib.stride_tricks.sliding_window_view(signal.samples, window_len)[::hop]
    spec = np.fft.rfft(frames * w, axis=1)[:, 1:]
    values = (2.0 / w.sum()) * np.abs(spec).T
    k = np.arange(1, values.shape[0] + 1)
    dt = signal.dt
    freqs = k / (window_len * dt)
    starts = np.arange(frames.shape[0]) * hop
    times = signal.times[0] + (starts + (window_len - 1) / 2.0) * dt
    return SpectroTemporalMatrix(values, freqs, hop * dt, times=times)


def frequency_recovery_score(
    S: SpectroTemporalMatrix,
    truth: PiecewiseSinusoidSpec,
    top_k: int = 2,
    guard: float = 5.0,
    skip_cols: int = 0,
) -> float:
    """Fraction of scored columns whose top rows hit every true frequency.

    A column is scored when its time lies inside the truth span and more than
    ``guard`` seconds from every regime transition. It counts as a hit when
    each true frequency is within one grid spacing of one of the ``top_k``
    largest rows. ``skip_cols`` drops leading columns (e.g. burn-in).
    """
    freqs = S.freqs
    spacing = float(np.median(np.diff(freqs))) if freqs.size > 1 else float(freqs[0])
    times = S.times
    regime = truth.regime_of(times)
    near = np.zeros(times.size, dtype=bool)
    for tr in truth.transitions():
        near |= np.abs(times - tr) <= guard
    cols = np.flatnonzero((regime >= 0) & ~near)
    cols = cols[cols >= skip_cols]
    if cols.size == 0:
        return 0.0
    top = np.argsort(-S.values[:, cols], axis=0, kind="stable")[:top_k]
    top_f = freqs[top]  # (top_k, ncols)
    hits = np.ones(cols.size, dtype=bool)
    tol = spacing * (1 + 1e-9)
    for c_i, c in enumerate(cols):
        for f in truth.segments[regime[c]][2]:
            if not (np.abs(top_f[:, c_i] - f) <= tol).any():
                hits[c_i] = False
                break
    return float(hits.mean())


# ---------------------------------------------------------------------------
# Timing
# ---------------------------------------------------------------------------

BENCH_METHODS = ("FourierKS", "OscKS", "STFT")
CSV_COLUMNS = ("method", "length", "repeat", "phase", "seconds")


@dataclass(frozen=True)
class BenchRecord:
    method: str
    length: int
    repeat: int
    phase: str
    seconds: float


@dataclass
class BenchReport:
    records: list = field(default_factory=list)
    machine: str = field(default_factory=lambda: f"{platform.machine()} Python {platform.python_version()}")

    def cell(self, method: str, length: int, phase: str = "total") -> np.ndarray:
        return np.array(
            [r.seconds for r in self.records if (r.method, r.length, r.phase) == (method, length, phase)]
        )

    def summary(self) -> list[tuple[str, int, str, float, float]]:
        """``(method, length, phase, mean, min)`` for every cell, in first-seen order."""
        keys = dict.fromkeys((r.method, r.length, r.phase) for r in self.records)
        out = []
        for m, n, p in keys:
            s = self.cell(m, n, p)
            out.append((m, n, p, float(s.mean()), float(s.min())))
        return out

    def speedup(self, length: int) -> float:
        """Mean FourierKS total time over mean OscKS total time."""
        f, o = self.cell("FourierKS", length), self.cell("OscKS", length)
        if f.size == 0 or o.size == 0:
            raise ConfigurationError(f"need FourierKS and OscKS timings at length {length}")
        return float(f.mean() / o.mean())

    def format_table(self) -> str:
        lines = [f"{'method':<10} {'length':>7} {'phase':<7} {'mean s':>10} {'min s':>10}"]
        for m, n, p, mean, mn in self.summary():
            lines.append(f"{m:<10} {n:>7d} {p:<7} {mean:>10.4f} {mn:>10.4f}")
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in self.records:
                w.writerow([r.method, r.length, r.repeat, r.phase, f"{r.seconds:.9g}"])


def bench_signal(length: int) -> TimedSignal:
    """The default simulated signal resampled to ``length`` points over the same span."""
    if length < 2:
        raise ConfigurationError(f"benchmark length must be at least 2, got {length}")
    base = PiecewiseSinusoidSpec()
    spec = PiecewiseSinusoidSpec(dt=(base.end - base.start) / length)
    return generate_simulated(spec)


def _time(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def run_benchmark(
    methods=BENCH_METHODS,
    lengths=(5000, 50000),
    repeats: int = 20,
    backend: str | None = None,
) -> BenchReport:
    """Time each method on the simulated signal at each length.

    Runs are sequential. Every (method, length) cell gets one untimed warm-up
    so that JIT compilation and caches do not pollute the numbers. OscKS is
    split into its ``dare`` and ``filter`` phases; every method also reports
    ``total``.
    """
    unknown = set(methods) - set(BENCH_METHODS)
    if unknown:
        raise ConfigurationError(f"unknown benchmark methods {sorted(unknown)}")
    if repeats < 1:
        raise ConfigurationError(f"repeats must be at least 1, got {repeats}")
    report = BenchReport()
    for n in lengths:
        sig = bench_signal(int(n))
        fspec = sim_fourier_spec()
        ospec = sim_oscillator_spec(sig.dt)
        for method in methods:
            if method == "FourierKS":
                def run():
                    _, t = _time(lambda: estimate_fourierks(sig, fspec, backend=backend))
                    return {"total": t}
            elif method == "OscKS":
                def run():
                    gains, t_dare = _time(lambda: solve_dare(build_lti_model(ospec)))
                    _, t_filt = _time(lambda: OscKS(ospec, gains=gains, backend=backend).estimate(sig))
                    return {"dare": t_dare, "filter": t_filt, "total": t_dare + t_filt}
            else:
                def run():
                    _, t = _time(lambda: stft_baseline(sig))
                    return {"total": t}
            run()  # warm-up
            for rep in range(repeats):
                for phase, sec in run().items():
                    report.records.append(BenchRecord(method, int(n), rep, phase, sec))
    return report
