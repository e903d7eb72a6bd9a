"""Command-line front end: ``simulate``, ``estimate``, ``featurize`` and ``bench``.

Exit codes: 0 success, 1 usage or I/O problem, 2 configuration or numerical
error, 3 too few R peaks.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .ecg import SegmentationSpec, featurize
from .errors import ConfigurationError, SpectroKalmanError, TooFewPeaksError
from .fourier import FourierBasisSpec, estimate_fourierks
from .oscillator import OscillatorBankSpec, OscKS
from .signals import TimedSignal
from .simbench import BENCH_METHODS, PiecewiseSinusoidSpec, generate_simulated, run_benchmark, stft_baseline

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MODEL = 2
EXIT_TOO_FEW_PEAKS = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(kind):
    def parse(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a {kind.__name__}, got {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v

    parse.__name__ = f"positive {kind.__name__}"
    return parse


def _nonnegative(kind):
    def parse(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a {kind.__name__}, got {text!r}") from None
        if v < 0:
            raise argparse.ArgumentTypeError(f"must be nonnegative, got {text}")
        return v

    parse.__name__ = f"nonnegative {kind.__name__}"
    return parse


def _length_list(text):
    try:
        vals = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 2:
        raise argparse.ArgumentTypeError("lengths must be integers of at least 2")
    return vals


def _method_list(text):
    vals = [s.strip() for s in text.split(",") if s.strip()]
    bad = [v for v in vals if v not in BENCH_METHODS]
    if not vals or bad:
        raise argparse.ArgumentTypeError(f"choose from {','.join(BENCH_METHODS)}, got {text!r}")
    return vals


# ---------------------------------------------------------------------------
# I/O helpers
# ---------------------------------------------------------------------------


def read_columns(path) -> np.ndarray:
    """Numeric CSV as an ``(N, k)`` array; ``#`` lines and one text header are skipped."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = [f.strip() for f in line.split(",")]
            try:
                rows.append([float(f) for f in fields])
            except ValueError:
                if rows:
                    raise ValueError(f"{path}: non-numeric row {line!r}") from None
                continue  # header
    if not rows:
        raise ValueError(f"{path}: no numeric rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows) or width not in (1, 2):
        raise ValueError(f"{path}: expected one or two columns on every row")
    return np.array(rows)


def read_signal(path, dt: float | None) -> TimedSignal:
    """One column needs ``dt``; two columns are ``time,value`` pairs."""
    data = read_columns(path)
    if data.shape[1] == 2:
        return TimedSignal(data[:, 1], times=data[:, 0])
    if dt is None:
        raise ValueError(f"{path} has a single column; pass --dt (or --fs) to give the sampling step")
    return TimedSignal(data[:, 0], dt=dt)


def write_matrix(path, values: np.ndarray, header: str | None = None) -> None:
    with open(path, "w") as fh:
        if header:
            fh.write(f"# {header}\n")
        np.savetxt(fh, values, fmt="%.9g", delimiter=",")


def write_pgm(path, values: np.ndarray) -> None:
    """8-bit binary greymap scaled by the maximum; row 0 is drawn at the bottom."""
    v = np.asarray(values, dtype=np.float64)
    top = v.max() if v.size else 0.0
    img = np.zeros(v.shape) if not top > 0 else v / top
    pix = np.round(255.0 * img[::-1]).astype(np.uint8)
    rows, cols = pix.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    spec = PiecewiseSinusoidSpec(noise_sd=args.noise_sd, dt=args.dt, seed=args.seed)
    sig = generate_simulated(spec)
    with open(args.out, "w") as fh:
        fh.write("time,value\n")
        np.savetxt(fh, np.column_stack((sig.times, sig.samples)), fmt="%.17g", delimiter=",")
    return EXIT_OK


def _estimator_spec(args, method: str, dt: float):
    if method == "fourierks":
        return FourierBasisSpec(f0=args.f0, num_harmonics=args.num_freq, lam=args.lam, q=args.q, r=args.r)
    return OscillatorBankSpec.grid(args.f0, args.num_freq, dt, lam=args.lam, q=args.q, q_b=args.qb, r=args.r)


def cmd_estimate(args) -> int:
    sig = read_signal(args.input, args.dt)
    if args.method == "stft":
        S = stft_baseline(sig, window_len=args.window_len, overlap=args.overlap)
        f0 = S.freqs[0]
    elif args.method == "oscks":
        if not sig.is_uniform:
            raise ConfigurationError(
                "oscks needs uniformly sampled input; use --method fourierks for timestamped signals"
            )
        S = OscKS(_estimator_spec(args, "oscks", sig.dt)).estimate(sig)
        f0 = args.f0
    else:
        S = estimate_fourierks(sig, _estimator_spec(args, "fourierks", sig.dt))
        f0 = args.f0
    header = f"method={args.method} f0={f0:.9g} M={S.shape[0]} dt={sig.dt:.9g} burn_in={S.burn_in_cols}"
    write_matrix(args.out, S.values, header)
    if args.pgm:
        write_pgm(args.pgm, S.values)
    return EXIT_OK


def cmd_featurize(args) -> int:
    data = read_columns(args.input)
    sig = TimedSignal(data[:, -1], dt=1.0 / args.fs)
    seg = SegmentationSpec(beta=args.beta, fs=args.fs, delta=args.delta, alpha=args.alpha)
    est = _estimator_spec(args, args.method, 1.0 / args.fs)
    F = featurize(sig, seg, est, jobs=args.jobs)
    write_matrix(args.out, F.values)
    if args.pgm:
        write_pgm(args.pgm, F.values)
    return EXIT_OK


def cmd_bench(args) -> int:
    report = run_benchmark(methods=args.methods, lengths=args.lengths, repeats=args.repeats)
    print(f"# {report.machine}")
    print(report.format_table())
    if "FourierKS" in args.methods and "OscKS" in args.methods:
        for n in args.lengths:
            print(f"speedup OscKS vs FourierKS at N={n}: {report.speedup(n):.2f}x")
    if args.out:
        report.write_csv(args.out)
    return EXIT_OK


def _add_estimator_flags(p, f0=0.1, num_freq=400, lam=10.0, q=1.0, r=1.0, qb=1e-7):
    g = p.add_argument_group("estimator")
    g.add_argument("--f0", type=_positive(float), default=f0, help="frequency spacing in Hz (default %(default)s)")
    g.add_argument("--num-freq", type=_positive(int), default=num_freq, help="number of frequencies M (default %(default)s)")
    g.add_argument("--lambda", dest="lam", type=_positive(float), default=lam, help="damping rate (default %(default)s)")
    g.add_argument("--q", type=_positive(float), default=q, help="coefficient diffusion (default %(default)s)")
    g.add_argument("--r", type=_positive(float), default=r, help="measurement noise variance (default %(default)s)")
    g.add_argument("--qb", type=_nonnegative(float), default=qb, help="bias diffusion, oscks only (default %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spectrokalman", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="write the piecewise multi-sinusoid test signal")
    s.add_argument("--out", required=True, help="output CSV (time,value)")
    s.add_argument("--dt", type=_positive(float), default=0.1, help="sampling step in s (default %(default)s)")
    s.add_argument("--noise-sd", type=_nonnegative(float), default=0.1, help="white-noise sd (default %(default)s)")
    s.add_argument("--seed", type=int, default=42, help="noise seed (default %(default)s)")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="spectro-temporal magnitudes of a signal")
    e.add_argument("--method", choices=("fourierks", "oscks", "stft"), default="fourierks")
    e.add_argument("--input", required=True, help="CSV: one value column (needs --dt) or time,value")
    e.add_argument("--dt", type=_positive(float), default=None, help="sampling step for single-column input")
    e.add_argument("--out", required=True, help="output CSV, one row per frequency")
    e.add_argument("--pgm", default=None, help="optional greyscale image of the matrix")
    e.add_argument("--window-len", type=_positive(int), default=350, help="stft window in samples (default %(default)s)")
    e.add_argument("--overlap", type=_nonnegative(int), default=340, help="stft overlap in samples (default %(default)s)")
    _add_estimator_flags(e)
    e.set_defaults(func=cmd_estimate)

    f = sub.add_parser("featurize", help="50x50 R-peak-aligned feature matrix of an ECG")
    f.add_argument("--input", required=True, help="CSV: one value column or time,value")
    f.add_argument("--fs", type=_positive(float), default=300.0, help="sampling rate in Hz (default %(default)s)")
    f.add_argument("--beta", type=_positive(int), default=300, help="half window in samples (default %(default)s)")
    f.add_argument("--delta", type=_positive(int), default=5, help="retry when at most this many peaks (default %(default)s)")
    f.add_argument("--alpha", type=_nonnegative(int), default=45, help="blanking half width in samples (default %(default)s)")
    f.add_argument("--method", choices=("oscks", "fourierks"), default="oscks")
    f.add_argument("--jobs", type=_positive(int), default=1, help="worker threads (default %(default)s)")
    f.add_argument("--out", required=True, help="output CSV (50 x 50)")
    f.add_argument("--pgm", default=None, help="optional greyscale image of the features")
    _add_estimator_flags(f)
    f.set_defaults(func=cmd_featurize)

    b = sub.add_parser("bench", help="time the estimators on the simulated signal")
    b.add_argument("--lengths", type=_length_list, default=[5000, 50000], help="comma-separated signal lengths (default 5000,50000)")
    b.add_argument("--repeats", type=_positive(int), default=20, help="timed runs per cell (default %(default)s)")
    b.add_argument("--methods", type=_method_list, default=list(BENCH_METHODS),
                   help="comma-separated subset of FourierKS,OscKS,STFT (default all)")
    b.add_argument("--out", default=None, help="optional CSV (method,length,repeat,phase,seconds)")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TooFewPeaksError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOO_FEW_PEAKS
    except (SpectroKalmanError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
