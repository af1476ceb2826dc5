"""Compiled vs pure-Python kernel timings.

Run with ``python3 benchmarks/bench_kernels.py``. Each kernel is called with
identical inputs and seeds on both backends; outputs are checked for equality
and the best of ``--repeat`` wall-clock times is reported.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from brwtrace import kernels, parse_group_spec
from brwtrace.brw import occupation_state_graph
from brwtrace.network import grid_ball_network
from brwtrace.trees import parse_offspring, root_offspring_law


def _best(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases():
    net = grid_ball_network(20)
    w = np.ones(len(net.indices))
    sink = np.zeros(net.n, dtype=np.uint8)
    yield ("walk: 200 SRWs x 2000 steps on a grid ball",
           lambda k: k.walk(net.indptr, net.indices, w, 0, 2000, 200, sink, np.random.default_rng(1)))

    u = np.random.default_rng(2).random((100, net.n_edges))
    far = (net.distance >= 20).astype(np.uint8)
    yield ("crossing: 100 replicas, union-find on a grid ball",
           lambda k: k.crossing_thresholds(net.n, net.edge_u, net.edge_v, u, far, 0))

    for group, horizon in (("free:2", 80), ("abelian:2", 40)):
        ip, ix, wt = occupation_state_graph(parse_group_spec(group), horizon)
        wt = np.ascontiguousarray(wt, dtype=float)
        dist = parse_offspring("1:0.8,2:0.2")
        args = (ip, ix, wt, 0, list(root_offspring_law(dist, "GW")), list(dist.probs), horizon)
        yield (f"occupation: BRW on {group}, horizon {horizon}",
               lambda k, a=args: k.brw_occupation(*a, np.random.default_rng(3), 10 ** 12))


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast, slow = kernels, kernels.python_backend
    print(f"active backend: {kernels.BACKEND}")
    if kernels.BACKEND == slow.BACKEND:
        print("compiled extension not available; nothing to compare")
        return
    print(f"{'kernel':52s} {'compiled':>10s} {'python':>10s} {'speedup':>8s}  equal")
    for name, fn in cases():
        tf, of = _best(lambda: fn(fast), args.repeat)
        ts, os_ = _best(lambda: fn(slow), 1)
        print(f"{name:52s} {tf:9.4f}s {ts:9.3f}s {ts / tf:7.0f}x  {_same(of, os_)}")


if __name__ == "__main__":
    main()
