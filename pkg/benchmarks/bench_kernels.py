"""Time the numba kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 20]

Each kernel is called once per backend before timing so numba compilation
is excluded. The outputs of the two backends are compared as a sanity check.
"""

import argparse
import time

import numpy as np

from spatgmm import grid_coords
from spatgmm._kernels import get_backend


def _cases(rng):
    cs = grid_coords((10, 10, 10))
    coords = np.ascontiguousarray(cs.coords, dtype=np.float64)
    index = np.ascontiguousarray(cs.level_index, dtype=np.int64)
    levels = np.ascontiguousarray(1.0 / (1.0 + np.exp(-4.0 * (cs.levels - 1.0))))
    wl = rng.standard_normal((20000, 6)) * 50
    x = rng.standard_normal((20000, 125))
    centers = rng.standard_normal((6, 125))
    return {
        "pairwise_distances p=1000": lambda k: k.pairwise_distances(coords),
        "spatial_covariance p=1000": lambda k: k.spatial_covariance(index, levels, 4.0, 3.0, 2.0),
        "logsumexp_rows 20000x6": lambda k: k.logsumexp_rows(wl),
        "kmeans_assign 20000x125, G=6": lambda k: k.kmeans_assign(x, centers),
    }


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _max_diff(a, b):
    if isinstance(a, tuple):
        return max(_max_diff(u, v) for u, v in zip(a, b))
    return float(np.max(np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()

    backends = {"numpy": get_backend("numpy"), "numba": get_backend("numba")}
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s} {'max diff':>9s}")
    for name, call in _cases(rng).items():
        outputs = {b: call(k) for b, k in backends.items()}  # also warms the JIT
        times = {b: _time(lambda k=k: call(k), args.repeat) for b, k in backends.items()}
        diff = _max_diff(outputs["numpy"], outputs["numba"])
        print(
            f"{name:32s} {times['numpy'] * 1e3:10.3f} {times['numba'] * 1e3:10.3f}"
            f" {times['numpy'] / times['numba']:8.2f} {diff:9.1e}"
        )


if __name__ == "__main__":
    main()
