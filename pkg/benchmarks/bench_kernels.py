"""Compare the numba and numpy kernel paths.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is warmed up once (numba compile) and the best of ``--repeat``
runs is reported.  The full pipeline can also be timed per backend with
``POINTLCA_DISABLE_NUMBA=1 pointlca bench ...``.
"""
import argparse
import time

import numpy as np

from pointlca import _kernels
from pointlca._accel import HAS_NUMBA


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    g = np.random.default_rng(0)

    X = g.normal(size=(1024, 128))
    W = g.normal(size=(1024, 128)) / np.sqrt(128)
    bias = g.normal(size=1024)
    WT = np.ascontiguousarray(W.T)

    M = 2000
    Phi = g.normal(size=(256, M))
    Phi /= np.linalg.norm(Phi, axis=0)
    G = Phi.T @ Phi
    b = Phi.T @ (g.normal(size=256) / 16.0)

    cases = [
        ("dense 1024x128->1024", lambda: _kernels.dense_numpy(X, W, bias, True),
         lambda: _kernels.dense_numba(X, WT, bias, True)),
        (f"lca M={M} K=200", lambda: _kernels.lca_dynamics_numpy(b, G, 0.1, 0.1, 200, 1e6),
         lambda: _kernels.lca_dynamics_numba(b, G, 0.1, 0.1, 200, 1e6)),
    ]
    print(f"{'kernel':<24}{'numpy (s)':>12}{'numba (s)':>12}{'speedup':>10}")
    for name, np_fn, nb_fn in cases:
        t_np = best_of(np_fn, args.repeat)
        if HAS_NUMBA:
            t_nb = best_of(nb_fn, args.repeat)
            print(f"{name:<24}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.1f}")
        else:
            print(f"{name:<24}{t_np:>12.4f}{'n/a':>12}{'':>10}")


if __name__ == "__main__":
    main()
