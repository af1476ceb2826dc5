import numpy as np
import pytest

from brwtrace.stats import chi_square
from brwtrace.trees import (OffspringDist, TreeBudgetError, TreeKind, complete_tree,
                            extract_stretched_binary, mean_offspring, parse_offspring,
                            root_offspring_law, sample_tree, tree_from_parents)


def test_mean_offspring():
    assert mean_offspring(parse_offspring("2:1")) == 2
    assert mean_offspring(parse_offspring("1:0.5,3:0.5")) == 2
    assert mean_offspring(parse_offspring("p=1:0.95,2:0.05")) == pytest.approx(1.05, abs=1e-15)


@pytest.mark.parametrize("text", ["0:0.5,2:0.5", "1:1", "1:0.5,2:0.4", "1:0.5;2:0.5", "1:0.5,1:0.5"])
def test_invalid_laws(text):
    with pytest.raises(ValueError):
        parse_offspring(text)


def test_sum_tolerance():
    OffspringDist((0.0, 0.5, 0.5 + 5e-13))
    with pytest.raises(ValueError):
        OffspringDist((0.0, 0.5, 0.5 + 5e-12))


def test_complete_binary(rng):
    t = sample_tree(parse_offspring("2:1"), "GW", 3, rng)
    assert len(t) == 15 and list(t.level_sizes()) == [1, 2, 4, 8]


def test_depth_zero(rng):
    t = sample_tree(parse_offspring("1:0.5,2:0.5"), "UGW", 0, rng)
    assert len(t) == 1 and t.depth == 0


def test_ugw_regular_root_degree(rng):
    for _ in range(20):
        t = sample_tree(parse_offspring("2:1"), TreeKind.UGW, 2, rng)
        assert t.n_children[0] == 3


def test_tree_invariants(rng):
    t = sample_tree(parse_offspring("1:0.6,2:0.3,3:0.1"), "AGW", 12, rng)
    assert t.parent[0] == -1 and np.all(t.parent[1:] < np.arange(1, len(t)))
    assert np.all(t.level[1:] == t.level[t.parent[1:]] + 1)
    internal = t.level < t.depth
    assert np.all(t.n_children[internal] >= 1)  # no leaves above the truncation level
    assert np.all(t.n_children[~internal] == 0)


def test_mean_level_size(rng):
    dist = parse_offspring("1:0.5,2:0.5")
    n = 10_000
    sizes = np.array([sample_tree(dist, "GW", 8, rng).level_sizes()[8] for _ in range(n)])
    se = sizes.std(ddof=1) / np.sqrt(n)
    assert abs(sizes.mean() - 1.5 ** 8) < 3 * se


def test_log_size_slope(rng):
    dist = parse_offspring("1:0.6,2:0.4")
    logs = np.array([np.log(sample_tree(dist, "GW", 15, rng).level_sizes()) for _ in range(1000)])
    slope = np.polyfit(np.arange(5, 16), logs.mean(axis=0)[5:], 1)[0]
    assert abs(slope - np.log(1.4)) < 0.05 * np.log(1.4)


@pytest.mark.parametrize("kind", ["UGW", "AGW"])
def test_root_law_chi_square(kind, rng):
    dist = parse_offspring("1:0.5,2:0.3,3:0.2")
    law = root_offspring_law(dist, kind)
    support = np.flatnonzero(law > 0)
    n = 100_000 if kind == "UGW" else 20_000
    degs = np.array([sample_tree(dist, kind, 1, rng).n_children[0] for _ in range(n)])
    rep = chi_square([int(np.sum(degs == k)) for k in support], law[support])
    assert rep.passed and set(np.unique(degs)) <= set(support)


def test_ugw_law_formula():
    dist = parse_offspring("1:0.5,2:0.5")
    c = 0.5 / 2 + 0.5 / 3
    law = root_offspring_law(dist, "UGW")
    assert law[2] == pytest.approx(0.5 / (2 * c)) and law[3] == pytest.approx(0.5 / (3 * c))


def test_budget(rng):
    with pytest.raises(TreeBudgetError) as err:
        sample_tree(parse_offspring("2:1"), "GW", 20, rng, budget=1000)
    assert err.value.budget == 1000


def _is_stretched_binary(sub, K):
    kids = sub.n_children
    assert np.all(kids <= 2)
    # branch vertices have two retained children; chains between them are <= K long
    branch = np.flatnonzero(kids == 2)
    for v in range(len(sub)):
        if kids[v] == 2 or v == 0:
            for c in sub.children(v):
                steps, w = 1, c
                while sub.n_children[w] == 1:
                    w = sub.children(w)[0]
                    steps += 1
                assert steps <= K
                assert sub.n_children[w] == 2 or sub.level[w] == sub.depth
    return len(branch) > 0


def test_stretched_binary_examples(rng):
    full = complete_tree(2, 6)
    sub = extract_stretched_binary(full, 1)
    assert len(sub) == len(full)
    path = tree_from_parents([-1, 0, 1, 2, 3], depth=4)
    assert extract_stretched_binary(path, 3) is None


def _exists(tree, K):
    """Independent oracle, bottom-up over levels.

    ``dmin[v]`` is the distance from ``v`` down to the nearest vertex that can
    serve as a skeleton branch vertex (or leaf at the truncation level).
    """
    n = len(tree)
    dmin = np.full(n, np.inf)
    good = np.zeros(n, dtype=np.int64)
    for lvl in range(tree.depth, -1, -1):
        vs = np.flatnonzero(tree.level == lvl)
        if lvl == tree.depth:
            ok = np.ones(len(vs), dtype=bool)
        else:
            ok = good[vs] >= 2
        dmin[vs] = np.where(ok, 0.0, dmin[vs])
        if lvl > 0:
            par = tree.parent[vs]
            np.add.at(good, par, (dmin[vs] <= K - 1).astype(np.int64))
            np.minimum.at(dmin, par, dmin[vs] + 1)
    return dmin[0] <= K


@pytest.mark.slow
def test_stretched_binary_against_oracle(rng):
    dist = parse_offspring("1:0.5,2:0.5")
    found = 0
    n = 1000
    for _ in range(n):
        t = sample_tree(dist, "GW", 30, rng)
        sub = extract_stretched_binary(t, 6)
        assert (sub is not None) == _exists(t, 6)
        if sub is not None:
            found += 1
            assert _is_stretched_binary(sub, 6)
            assert np.all(t.level[sub.origin] == sub.level)
    assert found >= 0.95 * n


def test_stretched_binary_small_trees(rng):
    # sparse branching, where skeletons are often absent
    dist = parse_offspring("1:0.8,2:0.2")
    outcomes = set()
    for _ in range(300):
        t = sample_tree(dist, "GW", 12, rng)
        for K in (1, 2, 4):
            sub = extract_stretched_binary(t, K)
            assert (sub is not None) == _exists(t, K)
            outcomes.add(sub is None)
            if sub is not None:
                assert _is_stretched_binary(sub, K)
    assert outcomes == {True, False}


def test_stretched_binary_bad_k():
    with pytest.raises(ValueError):
        extract_stretched_binary(complete_tree(2, 2), 0)
