"""Walks, spectral radius, segments, growth, cutpoints and ends of networks."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Protocol

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from . import kernels
from .groups import GroupSpec
from .network import Network

__all__ = [
    "GraphView",
    "CayleyView",
    "RadialTreeView",
    "NetworkView",
    "SpectralEstimate",
    "SpectralConvergenceError",
    "WalkStats",
    "WindowError",
    "estimate_spectral_radius",
    "restricted_spectral_radius",
    "srw_on_trace",
    "biased_walk_pn",
    "line_segments",
    "find_line_segments",
    "segment_spectral_bound",
    "volume_growth",
    "find_cutpoints",
    "estimate_ends",
]


# ---------------------------------------------------------------------------
# graph views for spectral estimates


class GraphView(Protocol):
    root: Hashable

    def transitions(self, x) -> list[tuple[Hashable, float]]:
        """Distinct ``(y, p(x, y))`` with ``p(x, y) > 0``."""


class CayleyView:
    """Simple random walk on the Cayley graph; vertices are normal-form words."""

    def __init__(self, spec: GroupSpec):
        self.spec = spec
        self.root = ()

    def transitions(self, x):
        out: dict[tuple, float] = {}
        p = 1.0 / self.spec.degree
        for g in range(self.spec.degree):
            y = self.spec.step(x, g)
            out[y] = out.get(y, 0.0) + p
        return list(out.items())


class RadialTreeView:
    """Distance-from-root chain of SRW on the ``q``-regular tree.

    Restricted to ``{0..R}`` it has the same Perron root as SRW killed
    outside the ball of radius ``R``, because the Perron vector of the ball
    is radial.
    """

    def __init__(self, q: int):
        if q < 2:
            raise ValueError("tree degree must be >= 2")
        self.q = q
        self.root = 0

    def transitions(self, x):
        if x == 0:
            return [(1, 1.0)]
        return [(x - 1, 1.0 / self.q), (x + 1, (self.q - 1) / self.q)]


class NetworkView:
    """SRW on a finite network, or the count-biased walk ``p_N`` when ``weighted``."""

    def __init__(self, net: Network, weighted: bool = False):
        self.net = net
        self.weighted = weighted
        self.root = net.root

    def transitions(self, x):
        lo, hi = self.net.indptr[x], self.net.indptr[x + 1]
        nb = self.net.indices[lo:hi]
        if self.weighted:
            w = self.net.slot_counts[lo:hi].astype(float)
        else:
            w = np.ones(hi - lo)
        w = w / w.sum()
        return [(int(y), float(p)) for y, p in zip(nb, w)]


class SpectralConvergenceError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"power iteration did not converge: residual {residual:.3e} "
                         f"after {iterations} iterations")


@dataclass
class SpectralEstimate:
    radius: int | None
    value: float
    iterations: int
    residual: float
    n_vertices: int

    def to_dict(self) -> dict:
        return {"radius": self.radius, "value": self.value, "residual": self.residual,
                "iterations": self.iterations, "n_vertices": self.n_vertices}


def _ball(view, radius: int, max_vertices: int) -> list:
    seen = {view.root: 0}
    order = [view.root]
    queue = deque([view.root])
    while queue:
        x = queue.popleft()
        if seen[x] == radius:
            continue
        for y, _ in view.transitions(x):
            if y not in seen:
                seen[y] = seen[x] + 1
                order.append(y)
                if len(order) > max_vertices:
                    raise MemoryError(f"ball of radius {radius} exceeds {max_vertices} vertices")
                queue.append(y)
    return order


def restricted_spectral_radius(view, vertices: Iterable, tol: float = 1e-8,
                               max_iter: int = 100_000, radius: int | None = None) -> SpectralEstimate:
    """Perron root of the kernel restricted to ``vertices`` (killed outside).

    Works with the symmetrised kernel ``sqrt(p(x,y) p(y,x))``, similar to the
    restriction for reversible walks, and iterates its lazy version
    ``(I + S)/2`` so that bipartite graphs do not oscillate.
    """
    verts = list(vertices)
    idx = {v: i for i, v in enumerate(verts)}
    n = len(verts)
    if n == 0:
        raise ValueError("empty vertex set")
    prob: dict[tuple[int, int], float] = {}
    for v in verts:
        i = idx[v]
        for y, p in view.transitions(v):
            j = idx.get(y)
            if j is not None:
                prob[(i, j)] = prob.get((i, j), 0.0) + p
    rows, cols, vals = [], [], []
    for (i, j), p in prob.items():
        back = prob.get((j, i))
        if back is None:
            raise ValueError("kernel is not reversible on the restricted set")
        rows.append(i)
        cols.append(j)
        vals.append(math.sqrt(p * back))
    S = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    x = np.full(n, 1.0 / math.sqrt(n))
    residual = math.inf
    lam = 0.0
    for it in range(1, max_iter + 1):
        sx = S @ x
        lam = float(x @ sx)
        residual = float(np.linalg.norm(sx - lam * x))
        if residual <= tol:
            return SpectralEstimate(radius, lam, it, residual, n)
        y = 0.5 * (x + sx)
        x = y / np.linalg.norm(y)
    raise SpectralConvergenceError(residual, max_iter)


def estimate_spectral_radius(view, radius: int, tol: float = 1e-8, max_iter: int = 100_000,
                             max_vertices: int = 2_000_000) -> SpectralEstimate:
    """Spectral radius of the walk killed outside the ball of the given radius.

    A lower bound on the spectral radius of the infinite walk that is
    non-decreasing in ``radius``.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    return restricted_spectral_radius(view, _ball(view, radius, max_vertices), tol, max_iter,
                                      radius=radius)


# ---------------------------------------------------------------------------
# walks on finite networks


@dataclass
class WalkStats:
    replicas: int
    steps: int
    return_counts: np.ndarray
    absorbed_at: np.ndarray = field(repr=False)

    @property
    def escape_fraction(self) -> float:
        """Fraction of replicas that never came back to the root."""
        return float(np.mean(self.return_counts == 0))

    @property
    def absorbed_fraction(self) -> float:
        return float(np.mean(self.absorbed_at >= 0))

    @property
    def mean_returns(self) -> float:
        return float(np.mean(self.return_counts))

    def to_rows(self) -> list[list]:
        return [[i, int(c), int(a)] for i, (c, a) in enumerate(zip(self.return_counts, self.absorbed_at))]


def _walk(net: Network, weights, steps: int, replicas: int, rng, sinks) -> WalkStats:
    if net.degree[net.root] == 0:
        raise ValueError("root is isolated")
    sink = np.zeros(net.n, dtype=np.uint8)
    if sinks is not None:
        s = np.asarray(sinks)
        if s.dtype == bool:
            sink[s] = 1
        else:
            sink[s.astype(np.int64)] = 1
        if sink[net.root]:
            raise ValueError("the root cannot be a sink")
    returns, absorbed = kernels.walk(net.indptr, net.indices, np.ascontiguousarray(weights, float),
                                     net.root, steps, replicas, sink, rng)
    return WalkStats(replicas, steps, returns, absorbed)


def srw_on_trace(net: Network, steps: int, replicas: int, rng: np.random.Generator,
                 sinks=None) -> WalkStats:
    """Simple random walks from the root; walks stepping onto ``sinks`` stop there."""
    return _walk(net, np.ones(len(net.indices)), steps, replicas, rng, sinks)


def biased_walk_pn(net: Network, steps: int, replicas: int, rng: np.random.Generator,
                   sinks=None) -> WalkStats:
    """Walks with ``p_N(x, y) = N(x, y) / sum_z N(x, z)`` from the root."""
    return _walk(net, net.slot_counts.astype(float), steps, replicas, rng, sinks)


# ---------------------------------------------------------------------------
# structure


def line_segments(net: Network) -> list[list[int]]:
    """Maximal paths whose interior vertices all have degree 2.

    Each segment is returned as its vertex sequence ``x_0..x_k``; a component
    that is a cycle is returned once, closed (first vertex repeated).
    """
    deg = net.degree
    ip, ix = net.indptr, net.indices
    used: set[tuple[int, int]] = set()
    out: list[list[int]] = []

    def key(a, b):
        return (a, b) if a < b else (b, a)

    def follow(a, b):
        seq = [a, b]
        used.add(key(a, b))
        prev, cur = a, b
        while deg[cur] == 2 and cur != a:
            n0, n1 = ix[ip[cur]], ix[ip[cur] + 1]
            nxt = int(n1 if n0 == prev else n0)
            if key(cur, nxt) in used:
                break
            used.add(key(cur, nxt))
            seq.append(nxt)
            prev, cur = cur, nxt
        return seq

    for a in range(net.n):
        if deg[a] == 2:
            continue
        for b in ix[ip[a]:ip[a + 1]]:
            if key(a, int(b)) not in used:
                out.append(follow(a, int(b)))
    for a in range(net.n):  # leftover pure cycles
        if deg[a] == 2:
            for b in ix[ip[a]:ip[a + 1]]:
                if key(a, int(b)) not in used:
                    out.append(follow(a, int(b)))
    return out


def find_line_segments(net: Network, k: int) -> int:
    """Number of maximal degree-2 segments with at least ``k`` edges."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return sum(1 for s in line_segments(net) if len(s) - 1 >= k)


def segment_spectral_bound(k: int) -> float:
    """Lower bound on the spectral radius forced by a segment with ``k`` edges.

    The ``k - 1`` interior vertices have degree 2, so SRW killed off them is
    the path chain with Perron root ``cos(pi / k)``.
    """
    if k < 2:
        return 0.0
    return math.cos(math.pi / k)


def volume_growth(net: Network, max_radius: int) -> np.ndarray:
    """``|Tr^(n)|`` for ``n = 0..max_radius``: vertices within distance ``n`` of ``o``."""
    d = net.distance[net.distance >= 0]
    counts = np.bincount(np.minimum(d, max_radius + 1), minlength=max_radius + 2)[:max_radius + 1]
    return np.cumsum(counts)


class WindowError(ValueError):
    pass


def find_cutpoints(net: Network, window: int) -> list[int]:
    """Vertices ``x != o`` with ``|x| < window`` whose removal disconnects the
    root from every vertex at distance ``>= window``.

    All far vertices are joined to an extra sink ``t``; the root-to-``t``
    separators are found with one depth-first articulation search.
    """
    dist = net.distance
    if window < 1:
        raise WindowError("window must be >= 1")
    if dist.max() < window:
        raise WindowError(f"window {window} exceeds trace extent {int(dist.max())}")
    n = net.n
    t = n
    far = np.flatnonzero(dist >= window)
    ip, ix = net.indptr, net.indices

    def nbrs(x):
        if x == t:
            return far
        if dist[x] >= window:
            return np.append(ix[ip[x]:ip[x + 1]], t)
        return ix[ip[x]:ip[x + 1]]

    disc = np.full(n + 1, -1, dtype=np.int64)
    low = np.zeros(n + 1, dtype=np.int64)
    tree_parent = np.full(n + 1, -1, dtype=np.int64)
    timer = 0
    root = net.root
    disc[root] = low[root] = timer
    stack = [(root, iter(nbrs(root)))]
    while stack:
        x, it = stack[-1]
        advanced = False
        for y in it:
            y = int(y)
            if disc[y] < 0:
                timer += 1
                disc[y] = low[y] = timer
                tree_parent[y] = x
                stack.append((y, iter(nbrs(y))))
                advanced = True
                break
            if y != tree_parent[x]:
                low[x] = min(low[x], disc[y])
        if not advanced:
            stack.pop()
            if stack:
                p = stack[-1][0]
                low[p] = min(low[p], low[x])
    if disc[t] < 0:
        return []
    cuts = []
    c = t
    x = int(tree_parent[t])
    while x != root and x >= 0:
        if low[c] >= disc[x] and dist[x] < window:
            cuts.append(x)
        c, x = x, int(tree_parent[x])
    return sorted(cuts)


def estimate_ends(net: Network, radius: int, probe: int) -> int:
    """Components of the network outside the open ball ``{|x| < radius}`` that
    reach distance ``>= probe``; a lower bound on the number of ends."""
    if probe <= radius:
        raise ValueError("probe must exceed radius")
    keep = net.distance >= radius
    if not keep.any():
        return 0
    sub, old = net.induced(keep)
    adj = sparse.csr_matrix((np.ones(len(sub.indices)), sub.indices, sub.indptr), shape=(sub.n, sub.n))
    _, labels = connected_components(adj, directed=False)
    deep = net.distance[old] >= probe
    return int(len(np.unique(labels[deep])))
