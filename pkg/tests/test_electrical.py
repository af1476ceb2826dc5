import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse.csgraph import laplacian

from brwtrace.brw import LabelledTree, compute_positions, run_brw
from brwtrace.electrical import (DisconnectedError, FlowAssignment, FlowValidationError,
                                 NoSurvivingRayError, build_t_n, cutset_infimum,
                                 effective_resistance, flow_energy, induce_flow,
                                 unit_flow_on_tree)
from brwtrace.network import Network, complete_tree_network, grid_ball_network, path_network
from brwtrace.trees import complete_tree, parse_offspring, tree_from_parents


def _dense_reff(net, source, sinks):
    """Reference value from the pseudo-inverse-free Dirichlet solve."""
    A = np.zeros((net.n, net.n))
    A[net.edge_u, net.edge_v] = 1
    A[net.edge_v, net.edge_u] = 1
    L = laplacian(A)
    fixed = np.zeros(net.n, bool)
    fixed[source] = True
    fixed[list(sinks)] = True
    free = ~fixed
    v = np.zeros(net.n)
    v[source] = 1
    v[free] = np.linalg.solve(L[np.ix_(free, free)], -L[np.ix_(free, fixed)] @ v[fixed])
    return 1 / float(L[source] @ v)


@pytest.mark.parametrize("n", [1, 3, 8])
def test_binary_tree_flow_energy(n):
    flow = unit_flow_on_tree(complete_tree(2, n))
    assert flow_energy(flow).energy == pytest.approx(1 - 2.0 ** -n, abs=1e-12)
    div = flow.divergence(2 ** (n + 1) - 1)
    assert div[0] == pytest.approx(1) and div[flow.sinks].sum() == pytest.approx(-1)
    inner = np.setdiff1d(np.arange(1, len(div)), flow.sinks)
    assert np.allclose(div[inner], 0)


def test_flow_avoids_dead_branches():
    # root -> 1 -> 3 -> 4 and root -> 2 (dead end)
    t = tree_from_parents([-1, 0, 0, 1, 3])
    flow = unit_flow_on_tree(t)
    assert flow.to_dict()[(0, 1)] == 1.0 and (0, 2) not in flow.to_dict()
    assert flow_energy(flow).energy == 3.0


def test_flow_truncation_depth():
    flow = unit_flow_on_tree(complete_tree(2, 6), depth=2)
    assert flow_energy(flow).energy == pytest.approx(0.75)
    with pytest.raises(ValueError):
        unit_flow_on_tree(complete_tree(2, 3), depth=4)


def test_no_surviving_ray():
    t = tree_from_parents([-1, 0, 0], depth=3)
    with pytest.raises(NoSurvivingRayError):
        unit_flow_on_tree(t)


def test_flow_from_dict_checks_antisymmetry():
    ok = FlowAssignment.from_dict({(0, 1): 0.5, (1, 0): -0.5, (1, 2): 0.5}, 0, [2])
    assert len(ok.value) == 2
    with pytest.raises(FlowValidationError, match=r"\(0, 1\)"):
        FlowAssignment.from_dict({(0, 1): 0.5, (1, 0): 0.5}, 0)
    with pytest.raises(FlowValidationError):
        FlowAssignment.from_dict({(1, 1): 0.5}, 0)


def test_flow_csv():
    flow = unit_flow_on_tree(complete_tree(2, 1))
    assert flow.to_csv(["o", "a", "b"]).splitlines() == ["x,y,theta", "o,a,0.5", "o,b,0.5"]


def test_t_n_counts_undirected_preimages(free2):
    # o -a-> x, o -a-> x, x -A-> o: the image edge {o, x} has three preimages
    tree = tree_from_parents([-1, 0, 0, 1])
    lab = LabelledTree(tree, np.array([-1, 0, 0, 1]))
    pos = compute_positions(free2, lab)
    tn = build_t_n(lab, pos, 2)
    assert tn.preimages[1:].tolist() == [3, 3, 3]
    assert not tn.retained[1:].any() and tn.component_size == 1
    tn3 = build_t_n(lab, pos, 3)
    assert tn3.retained_fraction == 1.0 and tn3.component_size == 4
    with pytest.raises(ValueError):
        build_t_n(lab, pos, 0)


def test_t_n_component_is_root_connected(free2, rng):
    lab, pos = run_brw(free2, parse_offspring("1:0.5,2:0.5"), "GW", 15, rng)
    tn = build_t_n(lab, pos, 2)
    t = tn.tree
    comp = tn.in_component
    assert comp[0]
    assert np.all(comp[1:] == (comp[t.parent[1:]] & tn.retained[1:]))
    sub = tn.component_tree()
    assert len(sub) == tn.component_size and np.all(comp[sub.origin])


def test_induced_flow_conserves_mass(free2, rng):
    lab, pos = run_brw(free2, parse_offspring("1:0.5,2:0.5"), "GW", 10, rng)
    flow = unit_flow_on_tree(lab.tree)
    img = induce_flow(flow, pos)
    div = img.divergence(len(pos.elements))
    assert div[img.source] == pytest.approx(1.0)
    assert div[img.sinks].sum() == pytest.approx(-1.0)
    rest = np.ones(len(div), bool)
    rest[img.source] = False
    rest[img.sinks] = False
    assert np.allclose(div[rest], 0, atol=1e-12)


@pytest.mark.parametrize("N", [1, 2, 5])
def test_induced_energy_bounded_by_multiplicity(N, free2):
    # at most N tree edges share an image edge, so (sum of N terms)^2 <= N * sum of squares
    checked = 0
    for seed in range(30):
        lab, pos = run_brw(free2, parse_offspring("1:0.5,2:0.5"), "GW", 12,
                           np.random.default_rng(seed))
        try:
            flow = unit_flow_on_tree(build_t_n(lab, pos, N))
        except NoSurvivingRayError:
            continue
        img = induce_flow(flow, pos)
        assert flow_energy(img).energy <= N * flow_energy(flow).energy * (1 + 1e-12)
        checked += 1
    assert checked > 0


def test_reff_series_and_parallel():
    assert effective_resistance(path_network(7), 0, [7]) == pytest.approx(7, abs=1e-8)
    # two parallel paths of length 2 and 3
    net = Network(5, [0, 1, 0, 3, 4], [1, 2, 3, 4, 2])
    assert effective_resistance(net, 0, [2]) == pytest.approx(2 * 3 / 5, abs=1e-8)
    assert effective_resistance(path_network(3), 0, [1, 3]) == pytest.approx(1.0)


def test_reff_binary_tree_matches_energy():
    net = complete_tree_network(2, 7)
    leaves = np.flatnonzero(net.distance == 7)
    r = effective_resistance(net, 0, leaves)
    assert r == pytest.approx(1 - 2.0 ** -7, abs=1e-8)
    # Thomson: the symmetric unit flow is the current flow here
    assert flow_energy(unit_flow_on_tree(complete_tree(2, 7))).energy == pytest.approx(r, abs=1e-8)


def test_reff_grid_against_dense():
    net = grid_ball_network(6)
    sinks = np.flatnonzero(net.distance == 6)
    assert effective_resistance(net, 0, sinks) == pytest.approx(_dense_reff(net, 0, sinks), rel=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 10 ** 6), min_size=4, max_size=25))
def test_thomson_on_random_trees(seeds):
    parent = [-1] + [s % (i + 1) for i, s in enumerate(seeds)]
    tree = _bfs_tree(parent)
    net = Network(len(tree), tree.parent[1:], np.arange(1, len(tree)))
    flow = unit_flow_on_tree(tree)
    r = effective_resistance(net, 0, flow.sinks)
    assert flow_energy(flow).energy >= r - 1e-8


def _bfs_tree(parent):
    kids = {}
    for v, p in enumerate(parent[1:], start=1):
        kids.setdefault(p, []).append(v)
    order, new = [0], {0: 0}
    i = 0
    while i < len(order):
        for c in kids.get(order[i], []):
            new[c] = len(order)
            order.append(c)
        i += 1
    par = [-1] + [new[parent[v]] for v in order[1:]]
    return tree_from_parents(par)


def test_reff_errors():
    net = Network(4, [0, 2], [1, 3])
    with pytest.raises(DisconnectedError):
        effective_resistance(net, 0, [3])
    with pytest.raises(ValueError):
        effective_resistance(net, 0, [0])


def test_cutset_infimum_binary_tree():
    t = complete_tree(2, 10)
    assert cutset_infimum(t, 1.5) == pytest.approx(2 / 1.5)
    assert cutset_infimum(t, 3.0) == pytest.approx((2 / 3) ** 10)
    assert cutset_infimum(tree_from_parents([-1, 0, 1, 2]), 2.0) == pytest.approx(1 / 8)
    with pytest.raises(ValueError):
        cutset_infimum(t, 1.0)


def test_cutset_ignores_dead_ends():
    # root with a dead child and a path of length 3
    t = tree_from_parents([-1, 0, 0, 2, 3])
    assert cutset_infimum(t, 2.0) == pytest.approx(1 / 8)
