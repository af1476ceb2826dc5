"""Finite undirected networks in CSR form, plus small graph constructors."""
from __future__ import annotations

from collections import deque
from typing import Sequence

import numpy as np

__all__ = [
    "Network",
    "path_network",
    "cycle_network",
    "star_network",
    "tree_network",
    "complete_tree_network",
    "grid_ball_network",
]


class Network:
    """Undirected simple graph with positive integer edge counts.

    Parameters
    ----------
    n : int
        Number of vertices, labelled ``0..n-1``.
    edge_u, edge_v : array_like
        Edge endpoints. Duplicate edges are merged and their counts added.
    counts : array_like, optional
        Edge multiplicities (traversal counts); defaults to 1.
    root : int
        Distinguished vertex ``o``.
    distance : array_like, optional
        Distance of each vertex from the root used for balls and shells.
        Defaults to the graph distance in this network.
    """

    def __init__(self, n: int, edge_u, edge_v, counts=None, root: int = 0, distance=None):
        eu = np.asarray(edge_u, dtype=np.int64).reshape(-1)
        ev = np.asarray(edge_v, dtype=np.int64).reshape(-1)
        if counts is None:
            cnt = np.ones(len(eu), dtype=np.int64)
        else:
            cnt = np.asarray(counts, dtype=np.int64).reshape(-1)
        if not (len(eu) == len(ev) == len(cnt)):
            raise ValueError("edge arrays have different lengths")
        if np.any(eu == ev):
            raise ValueError("self-loops are not allowed")
        if len(eu) and (min(eu.min(), ev.min()) < 0 or max(eu.max(), ev.max()) >= n):
            raise ValueError("edge endpoint out of range")
        if np.any(cnt < 1):
            raise ValueError("edge counts must be >= 1")
        lo = np.minimum(eu, ev)
        hi = np.maximum(eu, ev)
        if len(lo):
            keys = lo * n + hi
            uniq, inv = np.unique(keys, return_inverse=True)
            merged = np.zeros(len(uniq), dtype=np.int64)
            np.add.at(merged, inv, cnt)
            lo, hi, cnt = uniq // n, uniq % n, merged
        self.n = int(n)
        self.edge_u = lo
        self.edge_v = hi
        self.counts = cnt
        self.root = int(root)
        self._build_csr()
        if distance is None:
            self.distance = self.bfs_distance(self.root)
        else:
            self.distance = np.asarray(distance, dtype=np.int64)

    def _build_csr(self):
        n = self.n
        src = np.concatenate([self.edge_u, self.edge_v])
        dst = np.concatenate([self.edge_v, self.edge_u])
        w = np.concatenate([self.counts, self.counts])
        order = np.lexsort((dst, src))
        src, dst, w = src[order], dst[order], w[order]
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.indptr, src + 1, 1)
        np.cumsum(self.indptr, out=self.indptr)
        self.indices = np.ascontiguousarray(dst, dtype=np.int64)
        self.slot_counts = np.ascontiguousarray(w, dtype=np.int64)

    @property
    def n_edges(self) -> int:
        return len(self.edge_u)

    @property
    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, x: int) -> np.ndarray:
        return self.indices[self.indptr[x]:self.indptr[x + 1]]

    def bfs_distance(self, source: int, removed=None) -> np.ndarray:
        """Graph distances from ``source``; ``-1`` for unreachable vertices."""
        dist = np.full(self.n, -1, dtype=np.int64)
        if removed is not None and removed[source]:
            return dist
        dist[source] = 0
        queue = deque([source])
        ip, ix = self.indptr, self.indices
        while queue:
            x = queue.popleft()
            for y in ix[ip[x]:ip[x + 1]]:
                if dist[y] < 0 and (removed is None or not removed[y]):
                    dist[y] = dist[x] + 1
                    queue.append(y)
        return dist

    def is_connected(self) -> bool:
        return bool(np.all(self.bfs_distance(self.root) >= 0))

    def edge_dict(self) -> dict[tuple[int, int], int]:
        return {(int(a), int(b)): int(c) for a, b, c in zip(self.edge_u, self.edge_v, self.counts)}

    def induced(self, keep) -> tuple["Network", np.ndarray]:
        """Subnetwork induced on the boolean mask ``keep``; returns (net, old ids)."""
        keep = np.asarray(keep, dtype=bool)
        old = np.flatnonzero(keep)
        new_id = np.full(self.n, -1, dtype=np.int64)
        new_id[old] = np.arange(len(old))
        m = keep[self.edge_u] & keep[self.edge_v]
        sub = Network(len(old), new_id[self.edge_u[m]], new_id[self.edge_v[m]], self.counts[m],
                      root=int(new_id[self.root]) if keep[self.root] else 0,
                      distance=self.distance[old])
        return sub, old


def path_network(k: int, root: int = 0) -> Network:
    """Path ``0 - 1 - ... - k`` with ``k`` edges."""
    return Network(k + 1, np.arange(k), np.arange(1, k + 1), root=root)


def cycle_network(k: int) -> Network:
    return Network(k, np.arange(k), (np.arange(k) + 1) % k)


def star_network(counts: Sequence[int]) -> Network:
    """Root 0 joined to leaves ``1..len(counts)`` with the given edge counts."""
    k = len(counts)
    return Network(k + 1, np.zeros(k, dtype=np.int64), np.arange(1, k + 1), counts)


def tree_network(parent: Sequence[int]) -> Network:
    """Network of a rooted tree given by its parent array (``parent[0] = -1``)."""
    parent = np.asarray(parent, dtype=np.int64)
    child = np.arange(1, len(parent))
    return Network(len(parent), parent[1:], child)


def complete_tree_network(branching: int, depth: int, root_degree: int | None = None) -> Network:
    """Ball of radius ``depth`` in a tree where the root has ``root_degree`` children
    and every other vertex ``branching`` children."""
    parent = [-1]
    frontier = [0]
    for level in range(depth):
        nxt = []
        for v in frontier:
            k = root_degree if (level == 0 and root_degree is not None) else branching
            for _ in range(k):
                parent.append(v)
                nxt.append(len(parent) - 1)
        frontier = nxt
    return tree_network(parent)


def grid_ball_network(radius: int) -> Network:
    """Ball ``{|x| + |y| <= radius}`` of the square lattice, root at the origin."""
    pts = [(x, y) for x in range(-radius, radius + 1)
           for y in range(-radius + abs(x), radius - abs(x) + 1)]
    pts.sort(key=lambda p: (abs(p[0]) + abs(p[1]), p))
    index = {p: i for i, p in enumerate(pts)}
    eu, ev = [], []
    for (x, y), i in index.items():
        for q in ((x + 1, y), (x, y + 1)):
            j = index.get(q)
            if j is not None:
                eu.append(i)
                ev.append(j)
    dist = np.array([abs(x) + abs(y) for x, y in pts], dtype=np.int64)
    return Network(len(pts), eu, ev, root=0, distance=dist)
