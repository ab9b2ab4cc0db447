"""Time each compiled kernel against its pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 400] [--repeat 5]

Prints one row per kernel: best-of-``repeat`` wall time for each backend and
the numpy/numba ratio. The first numba call is made before timing so JIT
compilation is excluded.
"""
import argparse
import timeit

import numpy as np

from err_rewiring import kernels
from err_rewiring._backend import HAVE_NUMBA
from err_rewiring.synthetic import planted_partition


def workloads(n, rng):
    g = planted_partition(n=n, n_classes=4, p_in=8.0 / n, p_out=1.0 / n, seed=1).graph
    indptr, indices = g.csr("out")
    a = rng.normal(size=(n, n)) + n * np.eye(n)
    b = rng.normal(size=(n, 3))
    lu, piv = kernels.lu_factor(a, use_numba=False)
    k = 12
    supply = np.full(k, 60.0)
    demand = np.full(k, 60.0)
    cost = rng.integers(0, 4, size=(k, k)).astype(float)
    return {
        "lu_factor": lambda nb: kernels.lu_factor(a, use_numba=nb),
        "lu_solve": lambda nb: kernels.lu_solve(lu, piv, b, use_numba=nb),
        "all_pairs_bfs": lambda nb: kernels.all_pairs_bfs(indptr, indices, use_numba=nb),
        "tarjan_scc": lambda nb: kernels.tarjan_scc(indptr, indices, use_numba=nb),
        "find_bridges": lambda nb: kernels.find_bridges(indptr, indices, use_numba=nb),
        "commute_times": lambda nb: kernels.commute_times(indptr, indices, 0, n - 1, 2000, 7, use_numba=nb),
        "transport_plan": lambda nb: kernels.transport_plan(supply, demand, cost, 0.5, use_numba=nb),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=400, help="graph / matrix size")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = [True, False] if HAVE_NUMBA else [False]
    rng = np.random.default_rng(0)
    print(f"n={args.n}  repeat={args.repeat}  numba={'yes' if HAVE_NUMBA else 'not installed'}")
    print(f"{'kernel':<16}{'numba [ms]':>12}{'numpy [ms]':>12}{'ratio':>9}")
    for name, fn in workloads(args.n, rng).items():
        times = {}
        for nb in backends:
            fn(nb)  # warm-up / JIT compile
            times[nb] = 1e3 * min(timeit.repeat(lambda: fn(nb), number=1, repeat=args.repeat))
        t_nb = times.get(True, float("nan"))
        print(f"{name:<16}{t_nb:>12.2f}{times[False]:>12.2f}{times[False] / t_nb:>9.1f}")


if __name__ == "__main__":
    main()
