"""Time every kernel under the numba and numpy backends, then one solver run each.

    python3 benchmarks/bench_kernels.py [--repeat 50] [--size 20000]

Kernel timings call both backends in-process via ``kernels.get_backend``.
The solver timing runs ``pdsplit solve`` in a subprocess per backend, since
the backend is fixed at import time by ``PDSPLIT_BACKEND``.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from pdsplit import kernels
from pdsplit.graph import build_graph


def _cases(size, rng):
    m, n = size, max(size // 10, 2)
    nnz = 5 * size
    rows = rng.integers(0, m, nnz).astype(np.int64)
    cols = rng.integers(0, n, nnz).astype(np.int64)
    vals = rng.standard_normal(nnz)
    x, y = rng.standard_normal(n), rng.standard_normal(m)
    g = build_graph("ring", 64)
    edges = g.edges
    q = 50
    xi = rng.standard_normal((64, q))
    eta = rng.standard_normal((2 * edges.shape[0], q))
    pinv = np.ones(q)
    return {
        "coo_matvec": lambda k: k.coo_matvec(rows, cols, vals, x, m),
        "coo_rmatvec": lambda k: k.coo_rmatvec(rows, cols, vals, y, n),
        "abs_power_sums": lambda k: k.abs_power_sums(rows, cols, vals, 1.0, m, n),
        "soft_threshold": lambda k: k.soft_threshold(y, np.full(m, 0.1)),
        "logistic_terms": lambda k: k.logistic_terms(y),
        "edge_gather": lambda k: k.edge_gather(xi, edges),
        "edge_scatter": lambda k: k.edge_scatter(eta, edges, 64),
        "edge_dual_update": lambda k: k.edge_dual_update(eta, xi, edges, pinv, False),
        "neighbor_aggregate": lambda k: k.neighbor_aggregate(eta, xi, edges, pinv, 64, False),
    }


def bench_kernels(repeat, size):
    backends = [kernels.get_backend(b) for b in kernels.available_backends()]
    cases = _cases(size, np.random.default_rng(0))
    print(f"{'kernel':<20}" + "".join(f"{b.name + ' [us]':>14}" for b in backends))
    for name, call in cases.items():
        times = []
        for k in backends:
            call(k)  # compile / warm up
            times.append(min(timeit.repeat(lambda: call(k), number=1, repeat=repeat)) * 1e6)
        print(f"{name:<20}" + "".join(f"{t:>14.1f}" for t in times))


def bench_solver(algo):
    for name in kernels.available_backends():
        env = dict(os.environ, PDSPLIT_BACKEND=name)
        cmd = [sys.executable, "-m", "pdsplit.cli", "solve", "--algo", algo,
               "--synth", "200,50,10,1.0", "--batches", "4", "--trace-every", "100"]
        out = subprocess.run(cmd, env=env, capture_output=True, text=True)
        print(f"{name:<6} {out.stdout.strip() or out.stderr.strip()}")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=50)
    p.add_argument("--size", type=int, default=20000)
    p.add_argument("--algo", default="dist-padmm")
    ns = p.parse_args(argv)
    bench_kernels(ns.repeat, ns.size)
    print()
    bench_solver(ns.algo)


if __name__ == "__main__":
    main()
