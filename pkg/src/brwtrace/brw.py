"""Tree-indexed random walks: labelled family trees, positions and traces."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .groups import GroupElement, GroupSpec, encode_element
from .network import Network
from .parallel import map_replicas
from .stats import RandomStreamSpec, derive_stream
from .trees import (DEFAULT_VERTEX_BUDGET, OffspringDist, RootedTree, TreeBudgetError, TreeKind,
                    root_offspring_law, sample_tree)
from .tracenet import CayleyView, RadialTreeView, estimate_spectral_radius

__all__ = [
    "LabelledTree",
    "PositionMap",
    "TraceNetwork",
    "RecurrenceReport",
    "label_tree",
    "compute_positions",
    "run_brw",
    "build_trace",
    "simulate_trace",
    "occupation_state_graph",
    "revisit_counts",
    "classify_recurrence",
    "brw_revisits_on_network",
    "exact_spectral_radius",
]

MAX_POPULATION = 2 ** 62


@dataclass
class LabelledTree:
    """Family tree whose edge ``(parent[v], v)`` carries generator ``labels[v]``.

    ``labels[0]`` is ``-1`` (the root has no incoming edge).
    """

    tree: RootedTree
    labels: np.ndarray


@dataclass
class PositionMap:
    """Positions ``S_v`` as indices into ``elements`` (``elements[0]`` is ``o``)."""

    spec: GroupSpec
    elements: list[GroupElement]
    pos: np.ndarray

    def __getitem__(self, v: int) -> GroupElement:
        return self.elements[int(self.pos[v])]

    def word_lengths(self) -> np.ndarray:
        lengths = np.array([len(e.word) for e in self.elements], dtype=np.int64)
        return lengths[self.pos]


class TraceNetwork(Network):
    """Visited vertices and traversed edges of a BRW with traversal counts ``N``.

    Vertex 0 is the starting point ``o``. ``distance`` holds Cayley word
    lengths and ``frontier`` the positions occupied at the truncation level.
    """

    def __init__(self, spec: GroupSpec, elements: list[GroupElement], edge_u, edge_v, counts,
                 frontier=None, depth: int | None = None):
        self.spec = spec
        self.elements = elements
        dist = np.array([len(e.word) for e in elements], dtype=np.int64)
        super().__init__(len(elements), edge_u, edge_v, counts, root=0, distance=dist)
        self.frontier = np.zeros(0, dtype=np.int64) if frontier is None else np.asarray(frontier, np.int64)
        self.depth = depth

    def names(self) -> list[str]:
        return [encode_element(self.spec, e) for e in self.elements]

    def to_csv(self) -> str:
        """CSV rows ``x,y,N``; a trace without edges is written as the row ``e,,0``."""
        names = self.names()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "N"])
        if self.n_edges == 0:
            w.writerow([names[0], "", 0])
        for a, b, c in zip(self.edge_u, self.edge_v, self.counts):
            w.writerow([names[a], names[b], int(c)])
        return buf.getvalue()


def label_tree(tree: RootedTree, spec: GroupSpec, rng: np.random.Generator) -> LabelledTree:
    labels = np.empty(len(tree), dtype=np.int64)
    labels[0] = -1
    labels[1:] = rng.integers(0, spec.degree, size=len(tree) - 1)
    return LabelledTree(tree, labels)


def compute_positions(spec: GroupSpec, labelled: LabelledTree) -> PositionMap:
    """``S_root = o`` and ``S_v = S_{parent(v)} * X_v``, level by level."""
    tree = labelled.tree
    words: list[tuple[int, ...]] = [()]
    index: dict[tuple[int, ...], int] = {(): 0}
    step_cache: dict[int, int] = {}
    G = spec.degree
    pos = np.zeros(len(tree), dtype=np.int64)
    parent = tree.parent
    labels = labelled.labels
    # vertices are in BFS order, so parents are resolved before children
    for lo, hi in _level_bounds(tree):
        keys = pos[parent[lo:hi]] * G + labels[lo:hi]
        uniq, inv = np.unique(keys, return_inverse=True)
        targets = np.empty(len(uniq), dtype=np.int64)
        for i, key in enumerate(uniq.tolist()):
            t = step_cache.get(key)
            if t is None:
                w = spec.step(words[key // G], key % G)
                t = index.get(w)
                if t is None:
                    t = len(words)
                    index[w] = t
                    words.append(w)
                step_cache[key] = t
            targets[i] = t
        pos[lo:hi] = targets[inv]
    return PositionMap(spec, [GroupElement(w) for w in words], pos)


def _level_bounds(tree: RootedTree):
    sizes = tree.level_sizes()
    start = 1
    for s in sizes[1:]:
        if s:
            yield start, start + int(s)
        start += int(s)


def run_brw(spec: GroupSpec, dist: OffspringDist, kind: TreeKind | str, depth: int,
            rng: np.random.Generator, budget: int = DEFAULT_VERTEX_BUDGET):
    """Sample a family tree, label its edges with uniform generators and place it.

    Returns ``(LabelledTree, PositionMap)``.
    """
    tree = sample_tree(dist, kind, depth, rng, budget)
    labelled = label_tree(tree, spec, rng)
    return labelled, compute_positions(spec, labelled)


def build_trace(spec: GroupSpec, labelled: LabelledTree, positions: PositionMap) -> TraceNetwork:
    """Trace network: every tree edge adds one undirected traversal to its image."""
    tree = labelled.tree
    pos = positions.pos
    child_pos = pos[1:]
    parent_pos = pos[tree.parent[1:]]
    frontier = np.unique(pos[tree.level == tree.depth])
    return TraceNetwork(spec, positions.elements, parent_pos, child_pos, None,
                        frontier=frontier, depth=tree.depth)


def simulate_trace(spec: GroupSpec, dist: OffspringDist, depth: int, stream: RandomStreamSpec,
                   kind: TreeKind | str = TreeKind.GW, budget: int = DEFAULT_VERTEX_BUDGET):
    """Run one seeded BRW; returns ``(TraceNetwork, LabelledTree, PositionMap)``."""
    rng = derive_stream(stream)
    labelled, positions = run_brw(spec, dist, kind, depth, rng, budget)
    return build_trace(spec, labelled, positions), labelled, positions


# ---------------------------------------------------------------------------
# aggregated BRW for recurrence experiments


@lru_cache(maxsize=16)
def occupation_state_graph(spec: GroupSpec, radius: int, budget: int = DEFAULT_VERTEX_BUDGET):
    """Finite state graph on which a BRW started at ``o`` runs ``radius`` steps.

    On homogeneous trees (free groups, products of order-2 factors) returns
    the distance chain: state ``d`` has one slot back and ``q-1`` slots
    forward, which carries the exact law of ``|S_v|`` and hence of returns
    to ``o``. Otherwise returns the Cayley ball of the given radius with one
    slot per generator.

    Returns ``(indptr, indices, weights)``; state 0 is ``o``.
    """
    q = spec.tree_degree
    if q is not None:
        indptr = [0]
        indices: list[int] = []
        weights: list[float] = []
        for d in range(radius + 1):
            if d == 0:
                indices.append(min(1, radius))
                weights.append(1.0)
            else:
                indices.append(d - 1)
                weights.append(1.0)
                if d < radius:
                    indices.append(d + 1)
                    weights.append(float(q - 1))
            indptr.append(len(indices))
        return (np.asarray(indptr, np.int64), np.asarray(indices, np.int64),
                np.asarray(weights, float))
    words = [()]
    index = {(): 0}
    rows: list[list[int]] = []
    frontier = [0]
    for r in range(radius + 1):
        nxt = []
        for i in frontier:
            row = []
            for g in range(spec.degree):
                w = spec.step(words[i], g)
                j = index.get(w)
                if j is None:
                    if r == radius:
                        continue  # outside the ball; never reached within `radius` steps
                    j = len(words)
                    index[w] = j
                    words.append(w)
                    nxt.append(j)
                    if len(words) > budget:
                        raise TreeBudgetError(len(words), budget)
                row.append(j)
            rows.append(row)
        frontier = nxt
    # rows were appended in BFS order, which is the index order
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(r) for r in rows])
    indices = np.asarray([j for r in rows for j in r], dtype=np.int64)
    return indptr, indices, np.ones(len(indices), dtype=float)


def revisit_counts(indptr, indices, weights, dist: OffspringDist, kind: TreeKind | str,
                   horizon: int, rng: np.random.Generator, root: int = 0) -> np.ndarray:
    """Number of particles at ``root`` in each generation ``0..horizon``."""
    root_law = root_offspring_law(dist, kind)
    counts, _ = kernels.brw_occupation(indptr, indices, np.ascontiguousarray(weights, dtype=float),
                                       root, list(root_law), list(dist.probs), horizon, rng,
                                       MAX_POPULATION)
    return counts


def exact_spectral_radius(spec: GroupSpec) -> float | None:
    """Closed forms: ``2 sqrt(q-1)/q`` on the tree ``T_q`` and 1 on ``Z^d``."""
    q = spec.tree_degree
    if q is not None:
        return 2 * math.sqrt(q - 1) / q
    if spec.family == "abelian":
        return 1.0
    return None


@dataclass
class RecurrenceReport:
    group: str
    offspring: str
    kind: str
    mean_offspring: float
    horizon: int
    replicas: int
    revisits: np.ndarray        # returns to o within generations 1..horizon
    revisits_half: np.ndarray   # within generations 1..horizon//2
    rho_estimate: float
    rho_radius: int
    rho_exact: float | None
    stream: dict = field(default_factory=dict)

    @property
    def growing(self) -> np.ndarray:
        return self.revisits > self.revisits_half

    @property
    def fraction_growing(self) -> float:
        return float(np.mean(self.growing))

    @property
    def threshold(self) -> float:
        """Estimated critical mean ``1/rho``."""
        return 1.0 / self.rho_estimate

    @property
    def theory(self) -> str:
        rho = self.rho_exact if self.rho_exact is not None else self.rho_estimate
        return "recurrent" if self.mean_offspring > 1.0 / rho else "transient"

    @property
    def verdict(self) -> str:
        return "recurrent-consistent" if self.fraction_growing >= 0.5 else "transient-consistent"

    def summary(self) -> dict:
        return {
            "group": self.group, "offspring": self.offspring, "kind": self.kind,
            "mean_offspring": self.mean_offspring, "horizon": self.horizon,
            "replicas": self.replicas, "fraction_growing": self.fraction_growing,
            "rho_estimate": self.rho_estimate, "rho_radius": self.rho_radius,
            "rho_exact": self.rho_exact, "threshold": self.threshold,
            "theory": self.theory, "verdict": self.verdict,
            "mean_revisits": float(np.mean(self.revisits)), "stream": self.stream,
        }


def _cumulative_revisits(counts: np.ndarray, horizon: int) -> tuple[int, int]:
    c = np.cumsum(counts[1:])
    return int(c[horizon - 1]), int(c[horizon // 2 - 1]) if horizon >= 2 else 0


def classify_recurrence(spec: GroupSpec, dist: OffspringDist, horizon: int, replicas: int,
                        stream: RandomStreamSpec, kind: TreeKind | str = TreeKind.GW,
                        rho_radius: int = 30, threads: int = 1) -> RecurrenceReport:
    """Replicated root-revisit counts of a BRW on the Cayley graph of ``spec``.

    A replica counts as growing when its revisits up to ``horizon`` strictly
    exceed those up to ``horizon // 2``. Replica ``i`` uses stream
    ``stream.child(i)``.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if horizon < 2:
        raise ValueError("horizon must be >= 2")
    indptr, indices, weights = occupation_state_graph(spec, horizon)

    def one(i: int) -> tuple[int, int]:
        counts = revisit_counts(indptr, indices, weights, dist, kind, horizon,
                                derive_stream(stream.child(i)))
        return _cumulative_revisits(counts, horizon)

    results = map_replicas(one, replicas, threads)
    view = RadialTreeView(spec.tree_degree) if spec.tree_degree else CayleyView(spec)
    est = estimate_spectral_radius(view, rho_radius)
    return RecurrenceReport(
        group=spec.name, offspring=dist.to_text(), kind=TreeKind(kind).value,
        mean_offspring=dist.mean, horizon=horizon, replicas=replicas,
        revisits=np.array([r[0] for r in results], dtype=np.int64),
        revisits_half=np.array([r[1] for r in results], dtype=np.int64),
        rho_estimate=est.value, rho_radius=rho_radius, rho_exact=exact_spectral_radius(spec),
        stream=stream.to_dict())


def brw_revisits_on_network(net: Network, dist: OffspringDist, horizon: int, replicas: int,
                            stream: RandomStreamSpec, kind: TreeKind | str = TreeKind.GW,
                            weighted: bool = False, threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Root revisits of a BRW whose particles move by SRW (or by the
    count-weighted walk when ``weighted``) on a finite network.

    Returns ``(revisits up to horizon, revisits up to horizon//2)``.
    """
    weights = (net.slot_counts if weighted else np.ones(len(net.indices))).astype(float)

    def one(i: int) -> tuple[int, int]:
        counts = revisit_counts(net.indptr, net.indices, weights, dist, kind, horizon,
                                derive_stream(stream.child(i)), root=net.root)
        return _cumulative_revisits(counts, horizon)

    results = map_replicas(one, replicas, threads)
    return (np.array([r[0] for r in results], dtype=np.int64),
            np.array([r[1] for r in results], dtype=np.int64))
