"""The compiled and pure-Python kernels must agree draw for draw."""
import os
import subprocess
import sys

import numpy as np
import pytest

from brwtrace import kernels, parse_group_spec
from brwtrace.brw import occupation_state_graph
from brwtrace.network import grid_ball_network, star_network
from brwtrace.trees import parse_offspring, root_offspring_law

py = kernels.python_backend
compiled = pytest.mark.skipif(kernels.BACKEND == py.BACKEND, reason="extension not built")


@compiled
def test_walk_equivalence():
    net = grid_ball_network(4)
    w = np.ones(len(net.indices))
    sink = (net.distance == 4).astype(np.uint8)
    a = kernels.walk(net.indptr, net.indices, w, 0, 200, 50, sink, np.random.default_rng(3))
    b = py.walk(net.indptr, net.indices, w, 0, 200, 50, sink, np.random.default_rng(3))
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


@compiled
def test_crossing_equivalence():
    net = grid_ball_network(5)
    u = np.random.default_rng(1).random((30, net.n_edges))
    far = (net.distance >= 5).astype(np.uint8)
    a = kernels.crossing_thresholds(net.n, net.edge_u, net.edge_v, u, far, 0)
    b = py.crossing_thresholds(net.n, net.edge_u, net.edge_v, u, far, 0)
    assert np.array_equal(a, b)


@compiled
@pytest.mark.parametrize("group", ["free:2", "abelian:2"])
def test_occupation_equivalence(group):
    spec = parse_group_spec(group)
    ip, ix, w = occupation_state_graph(spec, 12)
    w = np.ascontiguousarray(w, dtype=float)
    dist = parse_offspring("1:0.6,2:0.4")
    args = (ip, ix, w, 0, list(root_offspring_law(dist, "GW")), list(dist.probs), 12)
    a = kernels.brw_occupation(*args, np.random.default_rng(5), 10 ** 8)
    b = py.brw_occupation(*args, np.random.default_rng(5), 10 ** 8)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_pn_walk_python_backend():
    net = star_network([3, 1])
    ret, absorbed = py.walk(net.indptr, net.indices, net.slot_counts.astype(float), 0, 1, 4000,
                            np.array([0, 1, 0], np.uint8), np.random.default_rng(0))
    assert np.mean(absorbed == 1) == pytest.approx(0.75, abs=0.03)


def test_env_forces_python_backend():
    code = "import brwtrace.kernels as k; print(k.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={**os.environ, "BRWTRACE_PURE_PYTHON": "1"})
    assert out.stdout.strip() == py.BACKEND
