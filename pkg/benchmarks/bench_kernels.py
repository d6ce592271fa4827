"""Time the compiled and pure-Python streaming softmax kernels.

    python benchmarks/bench_kernels.py [--sizes 1000 4000 16000] [--repeat 3]

Prints one CSV row per (backend, mode, N): best wall time over the repeats
and the max abs difference from the other backend's output.
"""
from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from attnlab import kernels
from attnlab.numeric.rng import RandomSource


def best_time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 4000, 16000])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--tau", type=float, default=0.1)
    args = ap.parse_args(argv)
    backends = ["python"] + (["compiled"] if kernels._core is not None else [])
    if len(backends) == 1:
        print("compiled extension not built; timing the fallback only", file=sys.stderr)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["backend", "mode", "n", "seconds", "speedup_vs_python", "max_abs_diff"])
    for n in args.sizes:
        rng = RandomSource(n)
        x = rng.normal_matrix(n, 2)
        v = rng.normal_matrix(n, 1)
        for mode in ("sqdist", "dot"):
            results = {}
            for b in backends:
                results[b] = best_time(lambda: kernels.softmax_smooth(x, x, v, args.tau, mode, backend=b),
                                       args.repeat)
            base = results["python"][0]
            for b, (sec, out) in results.items():
                other = results["python" if b != "python" else backends[-1]][1]
                w.writerow([b, mode, n, f"{sec:.4f}", f"{base / sec:.2f}", f"{np.abs(out - other).max():.3e}"])
            sys.stdout.flush()


if __name__ == "__main__":
    main()
