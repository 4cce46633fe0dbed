"""Compare the compiled and pure-Python kernels on a planted graph.

    python benchmarks/bench_kernels.py --n 100000 --avg-degree 25 --repeat 5
"""

import argparse
import time

import numpy as np

from sslh import kernels
from sslh.compatibility import CompatibilityMatrix
from sslh.generator import PlantedGraphSpec, fit_degree_sequence, generate, validate_spec
from sslh.graph import build_propagation_matrix


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def edge_inputs(spec, seed=0):
    rep = validate_spec(spec)
    rng = np.random.default_rng(seed)
    node_class = rng.permutation(np.repeat(np.arange(spec.k), rep["class_counts"]))
    out_deg = np.zeros(spec.n, dtype=np.int64)
    in_deg = np.zeros(spec.n, dtype=np.int64)
    for c in range(spec.k):
        mem = np.flatnonzero(node_class == c)
        out_deg[mem] = fit_degree_sequence(len(mem), rep["m_out"][c], spec.dist)
        in_deg[mem] = rng.permutation(fit_degree_sequence(len(mem), rep["m_in"][c], spec.dist))
    return node_class, out_deg, in_deg, rep["M"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--avg-degree", type=float, default=25)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    H = CompatibilityMatrix.planted(8).values
    spec = PlantedGraphSpec(args.n, int(args.n * args.avg_degree / 2), (1 / 3,) * 3, H, "powerlaw:0.3", seed=1)
    pg = generate(spec)
    P = build_propagation_matrix(pg.graph)
    A = P.matrix
    rng = np.random.default_rng(0)
    G = rng.normal(size=(args.n, 3))
    G2 = rng.normal(size=(args.n, 3))
    X = rng.normal(size=(args.n, 3))
    edge_args = edge_inputs(spec)

    backends = kernels.backends()
    print(f"n={args.n} m={pg.graph.m} threads={args.threads} (best of {args.repeat})")
    print(f"{'kernel':<16}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    rows = {
        "propagate_step": lambda mod: (lambda: mod.propagate_step(A.indptr, A.indices, A.data, G, X,
                                                                  P.echo_degree, G2, np.empty_like(G),
                                                                  args.threads)),
        "assign_edges": lambda mod: (lambda: mod.assign_edges(*edge_args, 7)),
    }
    for name, make in rows.items():
        t = {b: best_of(make(mod), args.repeat) for b, mod in backends.items()}
        speed = t["python"] / t["cython"] if "cython" in t else float("nan")
        print(f"{name:<16}" + "".join(f"{t[b]:>11.3f}s" for b in backends) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
