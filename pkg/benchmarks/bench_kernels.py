"""Time one training epoch on the numba kernel against the numpy kernel.

    python benchmarks/bench_kernels.py [--n 7000] [--d 64] [--hidden 32] [--repeat 5]

Both kernels run the same mini-batch AdamW epoch; the numba timing excludes
the first (compiling) call.
"""
import argparse
import time

import numpy as np

from swarmlearn import kernels


def bench(fn, X, y, w0, args, repeat):
    times = []
    for _ in range(repeat):
        w, m, v = w0.copy(), np.zeros_like(w0), np.zeros_like(w0)
        perm = np.random.default_rng(0).permutation(len(y))
        t0 = time.perf_counter()
        fn(X, y, perm, w, m, v, 0, 1e-2, 1e-4, 0.9, 0.999, 1e-8, *args)
        times.append(time.perf_counter() - t0)
    return min(times), w


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=7000)
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--repeat", type=int, default=5)
    a = p.parse_args()

    rng = np.random.default_rng(1)
    X = rng.normal(size=(a.n, a.d))
    y = (rng.random(a.n) < 0.5).astype(np.float64)
    w0 = rng.normal(scale=0.1, size=kernels.param_count(a.d, a.hidden))
    args = (a.batch, a.d, a.hidden)

    t_np, w_np = bench(kernels.epoch_np, X, y, w0, args, a.repeat)
    print(f"numpy  epoch: {t_np * 1e3:9.2f} ms")
    if not kernels.NUMBA_AVAILABLE:
        print("numba not installed; skipping the compiled kernel")
        return
    t0 = time.perf_counter()
    bench(kernels.epoch_nb, X, y, w0, args, 1)
    print(f"numba  first call (compile or cache load): {(time.perf_counter() - t0) * 1e3:.0f} ms")
    t_nb, w_nb = bench(kernels.epoch_nb, X, y, w0, args, a.repeat)
    print(f"numba  epoch: {t_nb * 1e3:9.2f} ms")
    print(f"speedup: {t_np / t_nb:.2f}x   max |w_np - w_nb| = {np.abs(w_np - w_nb).max():.2e}")


if __name__ == "__main__":
    main()
