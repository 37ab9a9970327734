"""Compiled kernels versus the pure-Python fallback.

    python benchmarks/bench_kernels.py [--replicas 2000] [--repeat 3]

Times the dispatch solver and whole Monte Carlo blocks (dispatch plus
cascade) on the six-node example graph and a 2-node graph, checks that both
backends return the same numbers, and prints a table with the speedups.
"""
import argparse
import time

import numpy as np

from cascadia import kernels
from cascadia import reference as R
from cascadia.cascade_engine import REL_TOL
from cascadia.graph_core import build_graph
from cascadia.power_flow import compute_ptdf


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def bench_solver(impl, v, demands):
    def run():
        res = []
        for d in demands:
            vd = v @ d
            s = np.where(vd < 0, -1.0, 1.0)
            res.append(impl.solve_generation(s[:, None] * v, 0.5 * np.abs(vd), 1.5 * np.abs(vd), d, 10 * (2 * v.shape[0] + 1))[0])
        return np.array(res)
    return run


def bench_block(impl, g, v, demands, firsts):
    def run():
        return impl.simulate_block(g.tails(), g.heads(), g.n, v, demands, firsts, 0.5, 0.5, 0, REL_TOL,
                                   10 * (2 * g.m + 1))[0]
    return run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--replicas", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    py = kernels.get("python")
    try:
        cc = kernels.get("compiled")
    except ImportError:
        print("compiled kernels not built; nothing to compare")
        return

    rng = np.random.default_rng(args.seed)
    graphs = {"six-node": R.graph(), "two-node": build_graph(2, [(1, 2)])}
    print(f"{'case':<22}{'python [s]':>12}{'compiled [s]':>14}{'speedup':>10}{'max diff':>11}")
    for name, g in graphs.items():
        v = compute_ptdf(g).v
        demands = (1.0 - rng.random((args.replicas, g.n))) ** (-1 / 1.5)
        firsts = rng.integers(1, g.m + 1, size=args.replicas)
        cases = {
            "solver": (bench_solver(py, v, demands[:200]), bench_solver(cc, v, demands[:200])),
            "mc block": (bench_block(py, g, v, demands, firsts), bench_block(cc, g, v, demands, firsts)),
        }
        for case, (fp, fc) in cases.items():
            tp, op = best_of(fp, args.repeat)
            tc, oc = best_of(fc, args.repeat)
            diff = float(np.abs(np.asarray(op) - np.asarray(oc)).max())
            print(f"{name + ' ' + case:<22}{tp:>12.4f}{tc:>14.5f}{tp / tc:>10.1f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
