"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs once untimed (JIT compile / cache load) and is then timed
``repeat`` times; the best time is reported.
"""

import argparse
import time

import numpy as np

from oedcalib._kernels import _numba, _numpy
from oedcalib.criteria import vi_moment
from oedcalib.model import radiochromic


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    model = radiochromic()
    th = model.theta()
    cand = model.response_space.linspace(2001)
    F = np.ascontiguousarray(model.regressor(cand, th))
    G = np.ascontiguousarray(model.dmu_dtheta(cand, th))
    A = np.ascontiguousarray(vi_moment(model, th))
    w0 = np.zeros(cand.size)
    w0[[666, 1333, 2000]] = 1 / 3
    M = np.linalg.inv(F.T @ F / cand.size)
    y = np.linspace(0.0, 0.45, 200_000)
    L = model.response_space.length
    return {
        "radiochromic_grad (2e5 pts)": lambda k: k.radiochromic_grad(y, *th),
        "quad_form_rows (2001 x 3)": lambda k: k.quad_form_rows(F, M),
        "weighted_gram (2001 x 3)": lambda k: k.weighted_gram(F, np.full(cand.size, 1 / cand.size)),
        "wynn_gi (2000 iterations)": lambda k: k.wynn_gi(F, G, w0, 2000, 10**9, 0.0, False, 50),
        "wynn_vi (to delta 0.999)": lambda k: k.wynn_vi(F, A, L, w0, 200_000, 0.999, False, 50),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'kernel':<30} {'numpy [ms]':>12} {'numba [ms]':>12} {'speed-up':>9}")
    for name, call in cases().items():
        t_np = best_of(lambda: call(_numpy), args.repeat)
        t_nb = best_of(lambda: call(_numba), args.repeat)
        print(f"{name:<30} {1e3 * t_np:>12.3f} {1e3 * t_nb:>12.3f} {t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
