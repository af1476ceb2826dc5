"""Truncated Galton-Watson family trees under GW, AGW and UGW rootings."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "TreeKind",
    "OffspringDist",
    "RootedTree",
    "TreeBudgetError",
    "DEFAULT_VERTEX_BUDGET",
    "parse_offspring",
    "mean_offspring",
    "root_offspring_law",
    "sample_tree",
    "tree_from_parents",
    "complete_tree",
    "extract_stretched_binary",
]

DEFAULT_VERTEX_BUDGET = 10_000_000


class TreeKind(str, Enum):
    GW = "GW"
    AGW = "AGW"
    UGW = "UGW"


class TreeBudgetError(RuntimeError):
    """Raised when a sample would exceed the vertex budget."""

    def __init__(self, needed: int, budget: int):
        self.needed = needed
        self.budget = budget
        super().__init__(f"tree needs at least {needed} vertices, over vertex budget {budget}")


@dataclass(frozen=True)
class OffspringDist:
    """Finite-support offspring law ``k -> p_k`` with ``p_0 = 0`` and ``p_1 < 1``."""

    probs: tuple[float, ...]

    def __post_init__(self):
        p = self.probs
        if len(p) < 2:
            raise ValueError("offspring law needs support above 0")
        if any(x < 0 for x in p):
            raise ValueError("offspring probabilities must be non-negative")
        if abs(sum(p) - 1.0) > 1e-12:
            raise ValueError(f"offspring probabilities sum to {sum(p)!r}, not 1")
        if p[0] != 0:
            raise ValueError("p_0 must be 0 (no extinction)")
        if p[1] >= 1:
            raise ValueError("p_1 must be < 1 (non-trivial branching)")

    @classmethod
    def from_mapping(cls, probs: dict[int, float]) -> "OffspringDist":
        if any(k < 0 for k in probs):
            raise ValueError("offspring counts must be non-negative")
        kmax = max(probs)
        arr = [0.0] * (kmax + 1)
        for k, v in probs.items():
            arr[k] += float(v)
        return cls(tuple(arr))

    @property
    def mean(self) -> float:
        return mean_offspring(self)

    @property
    def support(self) -> list[int]:
        return [k for k, p in enumerate(self.probs) if p > 0]

    @property
    def min_offspring(self) -> int:
        return self.support[0]

    def to_text(self) -> str:
        return ",".join(f"{k}:{p!r}" for k, p in enumerate(self.probs) if p > 0)


def parse_offspring(text: str) -> OffspringDist:
    """Parse ``p=1:0.95,2:0.05`` (the ``p=`` prefix is optional)."""
    s = text.strip()
    if s.startswith("p="):
        s = s[2:]
    probs: dict[int, float] = {}
    for item in s.split(","):
        k, sep, v = item.partition(":")
        if not sep:
            raise ValueError(f"offspring entry {item!r} is not of the form k:p")
        try:
            kk, pv = int(k), float(v)
        except ValueError:
            raise ValueError(f"offspring entry {item!r} is not of the form k:p") from None
        if kk in probs:
            raise ValueError(f"offspring count {kk} given twice")
        probs[kk] = pv
    return OffspringDist.from_mapping(probs)


def mean_offspring(dist: OffspringDist) -> float:
    return math.fsum(k * p for k, p in enumerate(dist.probs))


def root_offspring_law(dist: OffspringDist, kind: TreeKind | str) -> np.ndarray:
    """Law of the root's number of children under the given rooting."""
    kind = TreeKind(kind)
    p = np.asarray(dist.probs, dtype=float)
    if kind is TreeKind.GW:
        return p
    shifted = np.concatenate([[0.0], p])
    if kind is TreeKind.AGW:
        return shifted
    k = np.arange(len(p))
    c = np.sum(p / (k + 1))
    return np.concatenate([[0.0], p / ((k + 1) * c)])


@dataclass
class RootedTree:
    """Rooted tree in breadth-first order; vertex 0 is the root.

    ``parent[v] < v`` for every non-root vertex, so children of a vertex are
    contiguous: ``child_start[v] : child_start[v] + n_children[v]``.
    """

    parent: np.ndarray
    depth: int
    kind: TreeKind = TreeKind.GW
    origin: np.ndarray | None = None  # ids in a source tree, for extracted subtrees
    level: np.ndarray = field(init=False)
    n_children: np.ndarray = field(init=False)
    child_start: np.ndarray = field(init=False)

    def __post_init__(self):
        parent = np.asarray(self.parent, dtype=np.int64)
        self.parent = parent
        n = len(parent)
        if n == 0 or parent[0] != -1 or np.any(parent[1:] < 0):
            raise ValueError("parent array must have a single root at index 0")
        if np.any(parent[1:] >= np.arange(1, n)) or np.any(np.diff(parent[1:]) < 0):
            raise ValueError("vertices must be in breadth-first order")
        level = np.zeros(n, dtype=np.int64)
        while n > 1:
            nxt = level[parent[1:]] + 1
            if np.array_equal(nxt, level[1:]):
                break
            level[1:] = nxt
        self.level = level
        self.n_children = np.bincount(parent[1:], minlength=n).astype(np.int64)
        start = np.zeros(n, dtype=np.int64)
        start[1:] = np.cumsum(self.n_children)[:-1]
        self.child_start = start + 1

    def __len__(self) -> int:
        return len(self.parent)

    @property
    def n_vertices(self) -> int:
        return len(self.parent)

    def children(self, v: int) -> range:
        s = int(self.child_start[v])
        return range(s, s + int(self.n_children[v]))

    def level_sizes(self) -> np.ndarray:
        return np.bincount(self.level, minlength=self.depth + 1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["vertex", "parent", "level"])
        for v in range(len(self)):
            w.writerow([v, int(self.parent[v]), int(self.level[v])])
        return buf.getvalue()


def tree_from_parents(parent, depth: int | None = None, kind=TreeKind.GW) -> RootedTree:
    parent = np.asarray(parent, dtype=np.int64)
    t = RootedTree(parent, 0, TreeKind(kind))
    t.depth = int(t.level.max()) if depth is None else int(depth)
    return t


def complete_tree(branching: int, depth: int) -> RootedTree:
    parent = [-1]
    lo, hi = 0, 1
    for _ in range(depth):
        for v in range(lo, hi):
            parent.extend([v] * branching)
        lo, hi = hi, len(parent)
    return RootedTree(np.asarray(parent, dtype=np.int64), depth)


def sample_tree(dist: OffspringDist, kind: TreeKind | str, depth: int,
                rng: np.random.Generator, budget: int = DEFAULT_VERTEX_BUDGET) -> RootedTree:
    """Sample a family tree truncated at ``depth`` levels below the root.

    The root's number of children follows :func:`root_offspring_law`; every
    other vertex draws independently from ``dist``.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    kind = TreeKind(kind)
    ks = np.arange(len(dist.probs))
    p = np.asarray(dist.probs)
    parents = [np.array([-1], dtype=np.int64)]
    total = 1
    level_lo = 0
    width = 1
    for lvl in range(depth):
        if lvl == 0:
            law = root_offspring_law(dist, kind)
            counts = rng.choice(np.arange(len(law)), size=1, p=law)
        else:
            counts = rng.choice(ks, size=width, p=p)
        n_new = int(counts.sum())
        if total + n_new > budget:
            raise TreeBudgetError(total + n_new, budget)
        parents.append(np.repeat(np.arange(level_lo, level_lo + width, dtype=np.int64), counts))
        level_lo += width
        width = n_new
        total += n_new
    return RootedTree(np.concatenate(parents), depth, kind)


def extract_stretched_binary(tree: RootedTree, K: int) -> RootedTree | None:
    """Find a full binary tree with edges stretched to paths of length ``<= K``.

    The skeleton hangs from the root by a stem of length ``<= K`` (shortest
    stem first). Every skeleton branch vertex keeps exactly two children of
    the tree, each continued by a path of length ``<= K`` down to the next
    branch vertex or to the truncation level. Candidates are tried depth
    first, deepest endpoint first, with backtracking, so ``None`` means no
    such skeleton exists in the truncated tree.

    Returns the retained subtree (``origin`` maps back to ``tree``) or ``None``.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    depth = tree.depth
    level = tree.level
    memo: dict[int, list[int] | None] = {}

    def branch(v: int) -> list[int] | None:
        # endpoints of the two stretched edges leaving v ([] for a leaf)
        if v in memo:
            return memo[v]
        if level[v] == depth:
            memo[v] = []
            return memo[v]
        memo[v] = None
        ends: list[int] = []
        for c in tree.children(v):
            w = deepest_within(c, K - 1)
            if w is not None:
                ends.append(w)
                if len(ends) == 2:
                    memo[v] = ends
                    break
        return memo[v]

    def deepest_within(c: int, budget: int) -> int | None:
        # post-order DFS below c, at most `budget` further levels
        stack = [(c, budget, iter(tree.children(c)) if budget > 0 else iter(()))]
        while stack:
            v, b, it = stack[-1]
            child = next(it, None)
            if child is not None:
                nb = b - 1
                stack.append((child, nb, iter(tree.children(child)) if nb > 0 else iter(())))
                continue
            stack.pop()
            if branch(v) is not None:
                return v
        return None

    # stem: breadth-first from the root, nearest branch vertex first
    start = None
    frontier = [0]
    for _ in range(K + 1):
        for v in frontier:
            if branch(v) is not None:
                start = v
                break
        if start is not None:
            break
        frontier = [c for v in frontier for c in tree.children(v)]
    if start is None:
        return None

    keep = np.zeros(len(tree), dtype=bool)
    parent = tree.parent

    def mark_path(top: int, bottom: int):
        v = bottom
        while v != top:
            keep[v] = True
            v = int(parent[v])
        keep[top] = True

    mark_path(0, start)
    todo = [start]
    while todo:
        v = todo.pop()
        for w in memo[v]:
            mark_path(v, w)
            todo.append(w)
    old = np.flatnonzero(keep)
    new_id = np.full(len(tree), -1, dtype=np.int64)
    new_id[old] = np.arange(len(old))
    new_parent = np.where(old == 0, -1, new_id[parent[old]])
    new_parent[0] = -1
    return RootedTree(new_parent, depth, tree.kind, origin=old)
