"""Time the numba kernels against their pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Also times one end-to-end two-qubit MLE fit under each backend, by running
it in a subprocess with FTQST_DISABLE_NUMBA set or unset.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from ftqst import _kernels
from ftqst.forward import angle_grid, default_waveplates, measurement_operators, mode_chi
from ftqst.qmat import cholesky_matrix

MLE_SNIPPET = """
import time
from ftqst.forward import sample_counts, simulate_scan
from ftqst.qmat import random_density
from ftqst.reconstruct import mle_fit
import numpy as np
rng = np.random.default_rng(0)
scans = [sample_counts(simulate_scan(random_density(4, rng), 100), 500, rng) for _ in range(21)]
mle_fit(scans[0])
t0 = time.perf_counter()
for s in scans[1:]:
    mle_fit(s)
print((time.perf_counter() - t0) / 20)
"""


def cases():
    rng = np.random.default_rng(0)
    chi3 = np.ascontiguousarray(mode_chi(angle_grid(400), default_waveplates(3)))
    s3 = rng.normal(size=64)
    theta = angle_grid(1249)
    values = rng.random(1249)
    freqs = np.arange(2.0, 625.0, 2.0)
    t = np.ascontiguousarray(cholesky_matrix(rng.normal(size=16), 4))
    ops = np.ascontiguousarray(measurement_operators(angle_grid(100), default_waveplates(2)))
    y = rng.random(100)
    return {
        "stokes_signal (n=3, N=400)": ("stokes_signal", (s3, chi3)),
        "harmonic_projection (N=1249, 312 freqs)": ("harmonic_projection", (values, theta, freqs)),
        "lsq_cost_grad (n=2, N=100)": ("lsq_cost_grad", (t, ops, y, True)),
    }


def time_call(fn, args, repeat):
    fn(*args)
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def mle_time(disable):
    env = dict(os.environ)
    if disable:
        env["FTQST_DISABLE_NUMBA"] = "1"
    else:
        env.pop("FTQST_DISABLE_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", MLE_SNIPPET], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--skip-mle", action="store_true")
    args = ap.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        sys.exit("numba is not installed")
    print(f"{'kernel':42s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for label, (name, fargs) in cases().items():
        a = time_call(getattr(_kernels, name + "_numpy"), fargs, args.repeat)
        b = time_call(getattr(_kernels, name + "_numba"), fargs, args.repeat)
        print(f"{label:42s} {a * 1e3:11.3f} {b * 1e3:11.3f} {a / b:8.1f}x")
    if not args.skip_mle:
        a, b = mle_time(True), mle_time(False)
        print(f"{'mle_fit two-qubit, per fit':42s} {a * 1e3:11.3f} {b * 1e3:11.3f} {a / b:8.1f}x")


if __name__ == "__main__":
    main()
