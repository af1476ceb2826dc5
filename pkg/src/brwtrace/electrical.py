"""Unit flows, energies, induced flows, effective resistance and cutset sums."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg

from .brw import LabelledTree, PositionMap
from .network import Network
from .trees import RootedTree

__all__ = [
    "SubtreeTN",
    "FlowAssignment",
    "EnergyReport",
    "FlowValidationError",
    "NoSurvivingRayError",
    "DisconnectedError",
    "SolverConvergenceError",
    "build_t_n",
    "unit_flow_on_tree",
    "flow_energy",
    "induce_flow",
    "effective_resistance",
    "cutset_infimum",
]


class FlowValidationError(ValueError):
    pass


class NoSurvivingRayError(ValueError):
    def __init__(self):
        super().__init__("no surviving ray: no path from the root reaches the truncation depth")


class DisconnectedError(ValueError):
    pass


class SolverConvergenceError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"Dirichlet solve did not converge: residual {residual:.3e} "
                         f"after {iterations} iterations")


def _levels_desc(tree: RootedTree):
    """``(lo, hi)`` vertex ranges of each level, deepest first."""
    sizes = np.bincount(tree.level, minlength=tree.depth + 1)
    ends = np.cumsum(sizes)
    starts = ends - sizes
    for lvl in range(len(sizes) - 1, 0, -1):
        if sizes[lvl]:
            yield lvl, int(starts[lvl]), int(ends[lvl])


# ---------------------------------------------------------------------------
# T_N


@dataclass
class SubtreeTN:
    """Tree edges whose image edge has at most ``N`` tree preimages.

    Edge ``v`` is the tree edge ``(parent[v], v)``. ``preimages[v]`` is the
    number of tree edges with the same undirected image as edge ``v``.
    """

    tree: RootedTree
    N: int
    preimages: np.ndarray
    retained: np.ndarray      # per edge v (index 0 unused, False)
    in_component: np.ndarray  # vertices joined to the root by retained edges

    @property
    def retained_fraction(self) -> float:
        n_edges = len(self.tree) - 1
        return float(self.retained[1:].mean()) if n_edges else 1.0

    @property
    def component_size(self) -> int:
        return int(self.in_component.sum())

    def component_tree(self) -> RootedTree:
        """The root component as a tree; ``origin`` maps to the parent tree."""
        old = np.flatnonzero(self.in_component)
        new_id = np.full(len(self.tree), -1, dtype=np.int64)
        new_id[old] = np.arange(len(old))
        parent = new_id[self.tree.parent[old]]
        parent[0] = -1
        return RootedTree(parent, self.tree.depth, self.tree.kind, origin=old)


def _image_keys(labelled: LabelledTree, positions: PositionMap) -> np.ndarray:
    tree = labelled.tree
    a = positions.pos[tree.parent[1:]]
    b = positions.pos[1:]
    n = len(positions.elements)
    return np.minimum(a, b) * n + np.maximum(a, b)


def build_t_n(labelled: LabelledTree, positions: PositionMap, N: int) -> SubtreeTN:
    if N < 1:
        raise ValueError("N must be >= 1")
    tree = labelled.tree
    pre = np.zeros(len(tree), dtype=np.int64)
    if len(tree) > 1:
        keys = _image_keys(labelled, positions)
        _, inv, cnt = np.unique(keys, return_inverse=True, return_counts=True)
        pre[1:] = cnt[inv]
    retained = np.zeros(len(tree), dtype=bool)
    retained[1:] = pre[1:] <= N
    comp = np.zeros(len(tree), dtype=bool)
    comp[0] = True
    # BFS order: a vertex is reached once its parent is
    for lo, hi in _levels_asc(tree):
        comp[lo:hi] = comp[tree.parent[lo:hi]] & retained[lo:hi]
    return SubtreeTN(tree, N, pre, retained, comp)


def _levels_asc(tree: RootedTree):
    sizes = np.bincount(tree.level, minlength=tree.depth + 1)
    start = 1
    for s in sizes[1:]:
        if s:
            yield start, start + int(s)
        start += int(s)


# ---------------------------------------------------------------------------
# flows


@dataclass
class FlowAssignment:
    """Antisymmetric edge function stored once per undirected edge.

    ``value[i]`` is the flow from ``tail[i]`` to ``head[i]``; the reverse
    orientation carries ``-value[i]``.
    """

    tail: np.ndarray
    head: np.ndarray
    value: np.ndarray
    source: int
    sinks: np.ndarray
    resistance: np.ndarray | None = None

    def __post_init__(self):
        if self.resistance is None:
            self.resistance = np.ones(len(self.value))
        if len(self.tail) != len(self.head) or len(self.tail) != len(self.value):
            raise FlowValidationError("edge arrays have different lengths")

    @classmethod
    def from_dict(cls, theta: dict, source: int, sinks=(), resistance: dict | None = None,
                  tol: float = 1e-12) -> "FlowAssignment":
        """Build from ``{(x, y): value}`` holding one or both orientations."""
        seen: dict[tuple, float] = {}
        for (x, y), f in theta.items():
            if x == y:
                raise FlowValidationError(f"self-loop edge ({x}, {y})")
            back = theta.get((y, x))
            if back is not None and abs(back + f) > tol:
                raise FlowValidationError(f"antisymmetry violated on edge ({x}, {y}): "
                                          f"{f!r} vs {back!r}")
            key = (x, y) if (y, x) not in seen else None
            if key is not None:
                seen[key] = f
        tail = np.array([k[0] for k in seen], dtype=np.int64)
        head = np.array([k[1] for k in seen], dtype=np.int64)
        value = np.array(list(seen.values()), dtype=float)
        res = None
        if resistance is not None:
            res = np.array([resistance.get(k, resistance.get(k[::-1], 1.0)) for k in seen])
        return cls(tail, head, value, source, np.asarray(sinks, dtype=np.int64), res)

    def to_dict(self) -> dict:
        out = {}
        for a, b, f in zip(self.tail.tolist(), self.head.tolist(), self.value.tolist()):
            out[(a, b)] = f
            out[(b, a)] = -f
        return out

    def divergence(self, n_vertices: int) -> np.ndarray:
        """Net outflow at each vertex."""
        div = np.zeros(n_vertices)
        np.add.at(div, self.tail, self.value)
        np.add.at(div, self.head, -self.value)
        return div

    def to_csv(self, names=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "theta"])
        for a, b, f in zip(self.tail.tolist(), self.head.tolist(), self.value.tolist()):
            w.writerow([names[a] if names else a, names[b] if names else b, repr(f)])
        return buf.getvalue()


@dataclass
class EnergyReport:
    energy: float
    n_edges: int
    max_flow: float

    def to_dict(self) -> dict:
        return {"energy": self.energy, "n_edges": self.n_edges, "max_flow": self.max_flow}


def _reaches_depth(tree: RootedTree, depth: int) -> np.ndarray:
    reach = tree.level == depth
    for lvl, lo, hi in _levels_desc(tree):
        if lvl > depth:
            continue
        np.logical_or.at(reach, tree.parent[lo:hi], reach[lo:hi])
    return reach


def unit_flow_on_tree(tree: RootedTree | SubtreeTN, depth: int | None = None) -> FlowAssignment:
    """Unit flow from the root to the truncation level, split equally at each
    vertex among the children whose subtree reaches that level.

    A :class:`SubtreeTN` is replaced by its root component; vertex ids of the
    flow then refer to the parent tree.
    """
    origin = None
    if isinstance(tree, SubtreeTN):
        t = tree.component_tree()
        origin = t.origin
        tree = t
    depth = tree.depth if depth is None else depth
    if depth < 1 or depth > tree.depth:
        raise ValueError(f"depth must be in 1..{tree.depth}")
    reach = _reaches_depth(tree, depth)
    if not reach[0]:
        raise NoSurvivingRayError()
    live = reach & (tree.level <= depth)
    live_kids = np.bincount(tree.parent[1:][live[1:]], minlength=len(tree))
    theta = np.zeros(len(tree))
    theta[0] = 1.0
    for lo, hi in _levels_asc(tree):
        if tree.level[lo] > depth:
            break
        par = tree.parent[lo:hi]
        m = live[lo:hi]
        theta[lo:hi] = np.where(m, theta[par] / np.maximum(live_kids[par], 1), 0.0)
    edges = np.flatnonzero(live[1:]) + 1
    tail, head = tree.parent[edges], edges
    sinks = np.flatnonzero(live & (tree.level == depth))
    if origin is not None:
        tail, head, sinks = origin[tail], origin[head], origin[sinks]
    return FlowAssignment(tail, head, theta[edges], 0, sinks)


def flow_energy(flow: FlowAssignment) -> EnergyReport:
    """``sum over undirected edges of r(e) theta(e)^2``."""
    v = flow.value
    return EnergyReport(energy=float(np.sum(flow.resistance * v * v)), n_edges=len(v),
                        max_flow=float(np.max(np.abs(v))) if len(v) else 0.0)


def induce_flow(flow: FlowAssignment, positions: PositionMap) -> FlowAssignment:
    """Push a tree flow forward: each graph edge gets the signed sum of the
    flows on the tree edges mapped onto it."""
    pos = positions.pos
    a, b = pos[flow.tail], pos[flow.head]
    if np.any(a == b):
        raise FlowValidationError("tree edge maps to a loop")
    n = len(positions.elements)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    sign = np.where(a == lo, 1.0, -1.0)
    keys, inv = np.unique(lo * n + hi, return_inverse=True)
    val = np.zeros(len(keys))
    np.add.at(val, inv, sign * flow.value)
    return FlowAssignment(keys // n, keys % n, val, int(pos[flow.source]),
                          np.unique(pos[flow.sinks]))


# ---------------------------------------------------------------------------
# effective resistance


def effective_resistance(net: Network, source: int, sinks, conductance=None,
                         tol: float = 1e-9, max_iter: int = 100_000) -> float:
    """``R_eff`` between ``source`` and the sink set (sinks shorted together).

    Solves the Dirichlet problem (potential 1 at the source, 0 on sinks,
    harmonic elsewhere) with Jacobi-preconditioned conjugate gradients to an
    absolute residual of ``tol``. Edge conductances default to 1.
    """
    sink = np.zeros(net.n, dtype=bool)
    sink[np.asarray(sinks, dtype=np.int64)] = True
    if sink[source]:
        raise ValueError("source is in the sink set")
    c_edge = np.ones(net.n_edges) if conductance is None else np.asarray(conductance, float)
    reach = net.bfs_distance(source, removed=sink) >= 0
    # sinks adjacent to the reachable region
    touched = np.zeros(net.n, dtype=bool)
    eu, ev = net.edge_u, net.edge_v
    touched[ev[reach[eu] & sink[ev]]] = True
    touched[eu[reach[ev] & sink[eu]]] = True
    if not touched.any():
        raise DisconnectedError("source is not connected to the sink set")
    interior = reach.copy()
    interior[source] = False
    idx = np.full(net.n, -1, dtype=np.int64)
    idx[interior] = np.arange(int(interior.sum()))
    k = int(interior.sum())
    # conductance out of each reachable vertex
    deg = np.zeros(net.n)
    np.add.at(deg, eu, c_edge)
    np.add.at(deg, ev, c_edge)
    src_c = np.zeros(net.n)
    m = eu == source
    np.add.at(src_c, ev[m], c_edge[m])
    m = ev == source
    np.add.at(src_c, eu[m], c_edge[m])
    if k:
        both = interior[eu] & interior[ev]
        r, c, w = idx[eu[both]], idx[ev[both]], c_edge[both]
        A = sparse.csr_matrix((np.concatenate([-w, -w, deg[interior]]),
                               (np.concatenate([r, c, np.arange(k)]),
                                np.concatenate([c, r, np.arange(k)]))), shape=(k, k))
        b = src_c[interior]
        M = sparse.diags(1.0 / deg[interior])
        x, info = cg(A, b, rtol=0.0, atol=tol, maxiter=max_iter, M=M)
        resid = float(np.linalg.norm(A @ x - b))
        if info != 0 or resid > tol:
            raise SolverConvergenceError(resid, max_iter if info > 0 else 0)
        volt = np.zeros(net.n)
        volt[interior] = x
    else:
        volt = np.zeros(net.n)
    volt[source] = 1.0
    nb = np.concatenate([ev[eu == source], eu[ev == source]])
    cw = np.concatenate([c_edge[eu == source], c_edge[ev == source]])
    current = float(np.sum(cw * (1.0 - volt[nb])))
    return 1.0 / current


# ---------------------------------------------------------------------------
# cutsets


def cutset_infimum(tree: RootedTree | SubtreeTN, lam: float, depth: int | None = None) -> float:
    """``inf over cutsets Pi of sum_{v in Pi} lam^{-|v|}`` within the truncation.

    Uses ``value(v) = min(lam^{-|v|}, sum_children value(c))`` with leaves at
    the truncation level valued ``lam^{-depth}``. Vertices that end above the
    truncation level lead nowhere and are valued 0. Returns the sum of the
    values of the root's children.
    """
    if lam <= 1:
        raise ValueError("lambda must be > 1")
    if isinstance(tree, SubtreeTN):
        tree = tree.component_tree()
    depth = tree.depth if depth is None else depth
    if depth < 1 or depth > tree.depth:
        raise ValueError(f"depth must be in 1..{tree.depth}")
    lvl = tree.level
    val = np.zeros(len(tree))
    val[lvl == depth] = lam ** (-float(depth))
    for level, lo, hi in _levels_desc(tree):
        if level > depth:
            continue
        if level < depth:
            val[lo:hi] = np.minimum(lam ** (-float(level)), val[lo:hi])
        np.add.at(val, tree.parent[lo:hi], np.where(level <= depth, val[lo:hi], 0.0))
    # val[v] for internal v holds the children sum before its own min; the
    # loop applies the min when v's level is processed, so val[0] is the sum
    return float(val[0])
