import numpy as np
import pytest

from brwtrace.acceptance import binary_tree_crossing_exact
from brwtrace.network import complete_tree_network, path_network, grid_ball_network
from brwtrace.percolation import (crossing_probability, crossing_thresholds, estimate_pc,
                                  percolate, sweep_csv)


def test_extreme_p(rng):
    net = grid_ball_network(5)
    full = percolate(net, 1.0, rng, window=5)
    assert full.root_cluster_size == net.n and full.crossing and full.n_clusters == 1
    empty = percolate(net, 0.0, rng, window=5)
    assert empty.root_cluster_size == 1 and not empty.crossing and empty.n_clusters == net.n


def test_percolate_validates(rng):
    with pytest.raises(ValueError):
        percolate(path_network(3), 1.5, rng)
    with pytest.raises(ValueError):
        percolate(path_network(3), 0.5, rng, window=4)
    with pytest.raises(ValueError):
        crossing_thresholds(path_network(3), 0, 5, rng)


def test_threshold_matches_direct_percolation(rng):
    net = grid_ball_network(6)
    thr = crossing_thresholds(net, 6, 50, np.random.default_rng(0))
    # replay with explicit uniforms from the same generator state
    g = np.random.default_rng(0)
    u = g.random((50, net.n_edges))
    for i in range(50):
        for p in (0.3, 0.5, 0.7):
            direct = percolate(net, p, rng, window=6, uniforms=u[i]).crossing
            assert direct == (thr[i] <= p)


def test_path_crossing_is_power(rng):
    est = crossing_probability(path_network(5), 0.8, 5, 20_000, rng)
    assert est.ci_low <= 0.8 ** 5 <= est.ci_high


@pytest.mark.parametrize("p", [0.4, 0.6])
def test_binary_tree_against_recursion(p, rng):
    net = complete_tree_network(2, 10)
    exact = binary_tree_crossing_exact(p, 10)
    est = crossing_probability(net, p, 10, 4000, rng, level=0.99)
    assert est.ci_low <= exact <= est.ci_high


def test_sweep_monotone_and_bracket(rng):
    net = complete_tree_network(2, 12)
    grid = np.round(np.arange(0.05, 1.0001, 0.05), 2)
    pc = estimate_pc(net, [6, 12], 400, grid, rng)
    for w in (6, 12):
        fr = [e.fraction for e in pc.sweep if e.window == w]
        assert all(a <= b for a, b in zip(fr, fr[1:]))
    assert pc.verdict == "pc-below-one"
    assert pc.lower[1] < pc.upper[1] < 1
    assert sweep_csv(pc.sweep).splitlines()[0] == "p,window,replicas,crossing_fraction,ci_low,ci_high"


def test_path_threshold_is_one(rng):
    pc = estimate_pc(path_network(40), 40, 200, [0.5, 0.9, 0.95, 1.0], rng)
    assert pc.upper == [1.0] and pc.verdict == "inconclusive"


def test_grid_validation(rng):
    with pytest.raises(ValueError):
        estimate_pc(path_network(3), 3, 10, [0.5, 0.4], rng)
    with pytest.raises(ValueError):
        estimate_pc(path_network(3), 3, 10, [0.0, 0.5], rng)
