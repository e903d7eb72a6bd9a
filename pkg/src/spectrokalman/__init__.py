"""Spectro-temporal estimation with Kalman smoothing of time-varying Fourier coefficients.

Two estimators share one output type: a Fourier series whose coefficients
follow Ornstein-Uhlenbeck priors (``estimate_fourierks``, any timestamps) and a
bank of damped stochastic oscillators solved through its stationary Riccati
gain (``estimate_oscks`` / ``OscKS``, uniform sampling). The ECG helpers turn a
recording into a 50x50 R-peak-aligned feature matrix.
"""

from ._kernels import BACKEND
from .ecg import (
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
from .errors import (
    ConfigurationError,
    DareConvergenceError,
    NumericalFailure,
    PreconditionError,
    SpectroKalmanError,
    TooFewPeaksError,
)
from .fourier import FourierBasisSpec, estimate_fourierks
from .oscillator import OscillatorBankSpec, OscKS, StationaryGains, build_lti_model, dare_rhs, estimate_oscks, solve_dare
from .signals import TimedSignal
from .simbench import (
    BenchReport,
    PiecewiseSinusoidSpec,
    frequency_recovery_score,
    generate_simulated,
    run_benchmark,
    stft_baseline,
)
from .spectrogram import FeatureMatrix, SpectroTemporalMatrix, average_with_max_mask, resize_block_mean, to_feature
from .statespace import FilterTrace, GaussianState, SmootherResult, StepModel, kalman_filter, rts_smoother

__version__ = "0.1.0"
