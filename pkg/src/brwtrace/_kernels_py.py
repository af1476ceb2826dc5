"""Pure-Python reference implementation of the hot kernels.

Every function here has a twin in ``_kernels.pyx`` that consumes the same
random stream in the same order, so both backends return identical results
for the same ``numpy.random.Generator`` state.
"""
import math

import numpy as np

BACKEND = "python"


class PopulationOverflow(RuntimeError):
    pass


def _binomial(rng, n, p):
    if n <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return n
    return int(rng.binomial(n, p))


def brw_occupation(indptr, indices, weights, root, root_probs, probs,
                   horizon, rng, max_population):
    """Particle counts of a branching random walk, aggregated per state.

    Each generation, the ``c`` particles at state ``s`` produce offspring by a
    multinomial split over the offspring law (``root_probs`` for generation 0,
    ``probs`` afterwards), and the children move to neighbour slots of ``s`` by
    a multinomial split with slot weights ``weights``. Multinomials are drawn as
    sequences of binomials.

    Returns
    -------
    root_counts, population : int64 arrays of length ``horizon + 1``
    """
    n_states = len(indptr) - 1
    cur = np.zeros(n_states, dtype=np.int64)
    cur[root] = 1
    root_counts = np.zeros(horizon + 1, dtype=np.int64)
    population = np.zeros(horizon + 1, dtype=np.int64)
    root_counts[0] = 1
    population[0] = 1
    row_total = [0.0] * n_states
    for s in range(n_states):
        acc = 0.0
        for j in range(indptr[s], indptr[s + 1]):
            acc += weights[j]
        row_total[s] = acc
    root_law = [(k, float(p)) for k, p in enumerate(root_probs) if p > 0.0]
    law = [(k, float(p)) for k, p in enumerate(probs) if p > 0.0]

    for t in range(1, horizon + 1):
        nxt = np.zeros(n_states, dtype=np.int64)
        offspring_law = root_law if t == 1 else law
        total_pop = 0
        for s in np.flatnonzero(cur):
            s = int(s)
            rem = int(cur[s])
            mass = 1.0
            children = 0
            last = len(offspring_law) - 1
            for i, (k, pk) in enumerate(offspring_law):
                if rem == 0:
                    break
                if i == last:
                    nk = rem
                else:
                    nk = _binomial(rng, rem, pk / mass)
                children += k * nk
                rem -= nk
                mass -= pk
            lo, hi = int(indptr[s]), int(indptr[s + 1])
            if hi == lo:
                continue
            rem = children
            wrem = row_total[s]
            for j in range(lo, hi):
                if rem == 0:
                    break
                if j == hi - 1:
                    nj = rem
                else:
                    nj = _binomial(rng, rem, weights[j] / wrem)
                nxt[indices[j]] += nj
                rem -= nj
                wrem -= weights[j]
            total_pop += children
            if total_pop > max_population:
                raise PopulationOverflow(
                    f"population exceeded max_population={max_population} at generation {t}")
        cur = nxt
        root_counts[t] = cur[root]
        population[t] = total_pop
    return root_counts, population


def walk(indptr, indices, weights, root, steps, replicas, sink, rng):
    """Independent weighted random walks from ``root``.

    A walk at ``x`` moves along slot ``j`` with probability
    ``weights[j] / sum(row)``. Walks entering a vertex with ``sink[x]`` set are
    absorbed.

    Returns
    -------
    returns : int64 array, visits to ``root`` at times ``1..steps`` per replica
    absorbed : int64 array, absorption time or -1
    """
    n_states = len(indptr) - 1
    row_total = [0.0] * n_states
    for s in range(n_states):
        acc = 0.0
        for j in range(indptr[s], indptr[s + 1]):
            acc += weights[j]
        row_total[s] = acc
    ip = [int(v) for v in indptr]
    ix = [int(v) for v in indices]
    w = [float(v) for v in weights]
    sk = [bool(v) for v in sink]
    returns = np.zeros(replicas, dtype=np.int64)
    absorbed = np.full(replicas, -1, dtype=np.int64)
    rand = rng.random
    for r in range(replicas):
        x = root
        count = 0
        for t in range(1, steps + 1):
            lo, hi = ip[x], ip[x + 1]
            u = rand() * row_total[x]
            acc = 0.0
            nxt = ix[hi - 1]
            for j in range(lo, hi):
                acc += w[j]
                if u < acc:
                    nxt = ix[j]
                    break
            x = nxt
            if x == root:
                count += 1
            if sk[x]:
                absorbed[r] = t
                break
        returns[r] = count
    return returns, absorbed


def _find(parent, a):
    root = a
    while parent[root] != root:
        root = parent[root]
    while parent[a] != root:
        parent[a], a = root, parent[a]
    return root


def crossing_thresholds(n_vertices, edge_u, edge_v, uniforms, far, root):
    """Smallest retention level at which the root cluster reaches a far vertex.

    ``uniforms`` has one row per replica and one column per edge; an edge is
    kept at level ``p`` iff its uniform is ``<= p``. Edges are added in
    increasing uniform order with union-find, so the returned level ``p*``
    satisfies: the root cluster crosses at ``p`` iff ``p >= p*``.
    Returns ``inf`` for replicas that never cross.
    """
    replicas = uniforms.shape[0]
    out = np.full(replicas, math.inf)
    if far[root]:
        out[:] = 0.0
        return out
    eu = [int(v) for v in edge_u]
    ev = [int(v) for v in edge_v]
    for r in range(replicas):
        u = uniforms[r]
        order = np.argsort(u, kind="stable")
        parent = list(range(n_vertices))
        size = [1] * n_vertices
        has_far = [bool(f) for f in far]
        for e in order:
            a = _find(parent, eu[e])
            b = _find(parent, ev[e])
            if a == b:
                continue
            if size[a] < size[b]:
                a, b = b, a
            parent[b] = a
            size[a] += size[b]
            has_far[a] = has_far[a] or has_far[b]
            if has_far[a] and _find(parent, root) == a:
                out[r] = float(u[e])
                break
    return out
