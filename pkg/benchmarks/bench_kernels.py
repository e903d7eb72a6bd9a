"""Time the numba kernels against their pure-numpy twins.

Both flavours are importable side by side, so one process can compare them
on identical inputs and check that they agree. Usage::

    python benchmarks/bench_kernels.py [--repeats 5] [--lengths 5000,50000]

Setting ``SPECTROKALMAN_DISABLE_NUMBA=1`` disables the numba column.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from spectrokalman import _kernels
from spectrokalman.fourier import estimate_fourierks
from spectrokalman.oscillator import OscKS
from spectrokalman.simbench import bench_signal, sim_fourier_spec, sim_oscillator_spec


def best_of(fn, repeats):
    fn()  # warm-up, includes JIT compilation on first use
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), float(np.mean(times))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--lengths", default="5000,50000")
    args = p.parse_args(argv)
    lengths = [int(s) for s in args.lengths.split(",")]

    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    print(f"{'kernel':<10} {'length':>7} {'backend':<7} {'min s':>9} {'mean s':>9}")
    for n in lengths:
        sig = bench_signal(n)
        fspec = sim_fourier_spec()
        osc = OscKS(sim_oscillator_spec(sig.dt))
        results = {}
        for b in backends:
            out = {}
            for name, fn in (
                ("fourierks", lambda: estimate_fourierks(sig, fspec, backend=b)),
                ("oscks", lambda: OscKS(osc.spec, gains=osc.gains, backend=b).estimate(sig)),
            ):
                mn, mean = best_of(fn, args.repeats)
                out[name] = (mn, fn().values)
                print(f"{name:<10} {n:>7d} {b:<7} {mn:>9.4f} {mean:>9.4f}")
            results[b] = out
        if len(backends) == 2:
            for name in ("fourierks", "oscks"):
                (t_np, v_np), (t_nb, v_nb) = results["numpy"][name], results["numba"][name]
                diff = float(np.max(np.abs(v_np - v_nb)))
                print(f"  {name}: numba speedup {t_np / t_nb:.2f}x, max |difference| {diff:.2e}")


if __name__ == "__main__":
    main()
