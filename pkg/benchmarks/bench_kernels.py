"""Time the numba kernels against their numpy fallbacks.

Usage: python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from layered_blowup import _accel


def cases(rng):
    y = rng.uniform(-60.0, 60.0, 400_000)
    F = rng.standard_normal((512, 512))
    n = 200_000
    ia = rng.integers(0, F.size, n)
    ib = rng.integers(0, F.size, n)
    denom = rng.uniform(0.01, 1.0, n)
    return {
        "transition": (rng.uniform(-0.5, 1.5, 400_000),),
        "cutoff": (y,),
        "profile": (y, 1.7),
        "shift_absdiff_max": (F, 7, 1),
        "pair_quotient_max": (F.ravel(), ia, ib, denom),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    nb = _accel.load_numba_kernels()
    if nb is None:
        print("numba unavailable; nothing to compare")
        return
    args_by_name = cases(np.random.default_rng(0))
    print(f"{'kernel':20s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speedup':>8s} {'max diff':>10s}")
    for name, a in args_by_name.items():
        f_np, f_nb = _accel.NUMPY_KERNELS[name], nb[name]
        r_nb = f_nb(*a)  # compile outside the timed region
        r_np = f_np(*a)
        diff = float(np.max(np.abs(np.asarray(r_nb) - np.asarray(r_np))))
        t_np = min(timeit.repeat(lambda: f_np(*a), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: f_nb(*a), number=1, repeat=args.repeat))
        print(f"{name:20s} {1e3 * t_np:12.2f} {1e3 * t_nb:12.2f} {t_np / t_nb:8.2f} {diff:10.2e}")


if __name__ == "__main__":
    main()
