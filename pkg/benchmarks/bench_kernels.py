"""Time the hot kernels on the compiled and pure backends.

Run from the repository root after installing the package:

    python3 benchmarks/bench_kernels.py

Each kernel is called with a fixed workload on both backends and the best
of several repeats is reported.  Random inputs are regenerated per call
from the same seed, so both backends do identical work.
"""

import argparse
import time

import numpy as np

from impactlab import _hot_py
from impactlab._uniform import UniformSource

try:
    from impactlab import _hot
except ImportError:
    _hot = None


def bench_tim_path(hot):
    rng = np.random.default_rng(0)
    table = rng.normal(size=(2, 512))
    types = rng.integers(0, 2, size=20_000)
    fv = rng.normal(size=20_000)
    return lambda: hot.tim_path(table, types, fv)


def bench_hdim_deltas(hot):
    rng = np.random.default_rng(1)
    g1 = rng.normal(size=3)
    kappa = rng.normal(size=(3, 3, 64))
    types = rng.integers(0, 3, size=20_000)
    eps = rng.normal(size=20_000)
    return lambda: hot.hdim_deltas(g1, kappa, types, eps)


def bench_hawkes_thinning(hot):
    mu = np.array([0.4, 0.6])
    amps = np.array([[[0.3], [0.1]], [[0.1], [0.3]]])
    betas = np.array([1.5])
    dirac = np.zeros((2, 2))

    def run():
        src = UniformSource(np.random.default_rng(7))
        return hot.hawkes_thinning(mu, amps, betas, dirac, 20_000.0, src, 10**6)

    return run


def bench_llob_ftcs(hot):
    dx = 0.02
    x = -4.0 + dx / 2 + dx * np.arange(400)
    phi = -1.3 * x + 0.2 * np.exp(-(x**2))
    dt = 0.45 * dx * dx
    source = np.full(4000, 0.5)

    def run():
        return hot.llob_ftcs(phi.copy(), x, dx, dt, 1.0, 0.5, 0.65, source, 4000)

    return run


def bench_selfconsistent_sweep(hot):
    rng = np.random.default_rng(3)
    n = 2000
    t = np.linspace(0.0, 1.0, n)
    tm = 0.5 * (t[:-1] + t[1:])
    w = np.tril(np.abs(rng.normal(size=(n, n - 1))), -1)
    r = rng.normal(size=n - 1)
    y = np.cumsum(rng.normal(size=n)) * 0.01
    return lambda: hot.selfconsistent_sweep(t, tm, w, r, y)


BENCHES = [
    ("tim_path", "2 types, 512-lag table, 20k events", bench_tim_path),
    ("hdim_deltas", "3 types, 64-lag influence, 20k events", bench_hdim_deltas),
    ("hawkes_thinning", "2-d process, horizon 20k (~26k events)",
     bench_hawkes_thinning),
    ("llob_ftcs", "400 cells, 4000 steps", bench_llob_ftcs),
    ("selfconsistent_sweep", "2000-point trajectory", bench_selfconsistent_sweep),
]


def best_of(fn, repeats):
    fn()  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timed repeats per kernel (best is kept)")
    args = parser.parse_args()

    if _hot is None:
        print("compiled extension not built; timing the pure backend only")
    header = f"{'kernel':<22}{'workload':<40}{'pure':>10}{'compiled':>10}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, desc, make in BENCHES:
        pure_s = best_of(make(_hot_py), args.repeats)
        if _hot is not None:
            comp_s = best_of(make(_hot), args.repeats)
            ratio = f"{pure_s / comp_s:8.1f}x"
            comp_ms = f"{comp_s * 1e3:8.2f}ms"
        else:
            ratio, comp_ms = f"{'':>9}", f"{'-':>10}"
        print(f"{name:<22}{desc:<40}{pure_s * 1e3:8.2f}ms{comp_ms}{ratio}")


if __name__ == "__main__":
    main()
