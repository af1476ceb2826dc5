"""Bernoulli bond percolation on finite networks with a monotone coupling."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from . import kernels
from .network import Network
from .stats import wilson_interval

__all__ = [
    "PercolationSample",
    "CrossingEstimate",
    "PcEstimate",
    "percolate",
    "crossing_thresholds",
    "crossing_probability",
    "estimate_pc",
    "sweep_csv",
]

# rows of uniforms generated per kernel call
_CHUNK_FLOATS = 4_000_000


@dataclass
class PercolationSample:
    p: float
    kept: np.ndarray
    labels: np.ndarray
    root_cluster_size: int
    crossing: bool | None

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0


def _check_window(net: Network, window: int):
    if window < 1:
        raise ValueError("window must be >= 1")
    if net.distance.max() < window:
        raise ValueError(f"window {window} exceeds trace extent {int(net.distance.max())}")


def percolate(net: Network, p: float, rng: np.random.Generator, window: int | None = None,
              uniforms: np.ndarray | None = None) -> PercolationSample:
    """Keep each edge iff its uniform variate is ``<= p``.

    Passing the same ``uniforms`` for several ``p`` gives the monotone
    coupling. ``crossing`` is whether the root cluster reaches distance
    ``>= window`` (``None`` without a window).
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    u = rng.random(net.n_edges) if uniforms is None else np.asarray(uniforms, dtype=float)
    kept = u <= p
    adj = sparse.csr_matrix((np.ones(int(kept.sum())), (net.edge_u[kept], net.edge_v[kept])),
                            shape=(net.n, net.n))
    _, labels = connected_components(adj, directed=False)
    root_mask = labels == labels[net.root]
    crossing = None
    if window is not None:
        _check_window(net, window)
        crossing = bool(np.any(net.distance[root_mask] >= window))
    return PercolationSample(p, kept, labels, int(root_mask.sum()), crossing)


def crossing_thresholds(net: Network, window: int, replicas: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Per replica, the smallest ``p`` at which the root cluster reaches
    distance ``>= window`` under the monotone coupling (``inf`` if never)."""
    _check_window(net, window)
    far = (net.distance >= window).astype(np.uint8)
    E = net.n_edges
    out = np.empty(replicas)
    step = max(1, _CHUNK_FLOATS // max(E, 1))
    for lo in range(0, replicas, step):
        hi = min(replicas, lo + step)
        u = rng.random((hi - lo, E))
        out[lo:hi] = kernels.crossing_thresholds(net.n, net.edge_u, net.edge_v, u, far, net.root)
    return out


@dataclass
class CrossingEstimate:
    p: float
    window: int
    replicas: int
    successes: int
    fraction: float
    ci_low: float
    ci_high: float

    def row(self) -> list:
        return [self.p, self.window, self.replicas, self.fraction, self.ci_low, self.ci_high]


def _estimate(thresholds: np.ndarray, p: float, window: int, level: float) -> CrossingEstimate:
    k = int(np.sum(thresholds <= p))
    n = len(thresholds)
    lo, hi = wilson_interval(k, n, level)
    return CrossingEstimate(p, window, n, k, k / n, lo, hi)


def crossing_probability(net: Network, p: float, window: int, replicas: int,
                         rng: np.random.Generator, level: float = 0.95) -> CrossingEstimate:
    """Fraction of replicas whose root cluster reaches the window shell,
    with a Wilson score interval."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    return _estimate(crossing_thresholds(net, window, replicas, rng), p, window, level)


@dataclass
class PcEstimate:
    """Bracket for the crossing threshold at one or more windows.

    ``lower`` is the largest grid ``p`` with crossing fraction below
    ``low_threshold`` and ``upper`` the smallest above ``high_threshold``;
    either is ``None`` when the grid has no such point.
    """

    windows: list[int]
    lower: list[float | None]
    upper: list[float | None]
    sweep: list[CrossingEstimate] = field(repr=False)
    low_threshold: float = 0.05
    high_threshold: float = 0.5

    @property
    def verdict(self) -> str:
        if any(u is None for u in self.upper):
            return "inconclusive"
        if len(self.windows) >= 2 and all(u < 1 for u in self.upper):
            return "pc-below-one"
        if all(u < 1 for u in self.upper):
            return "pc-below-one-single-window"
        return "inconclusive"

    def to_dict(self) -> dict:
        return {"windows": self.windows, "lower": self.lower, "upper": self.upper,
                "low_threshold": self.low_threshold, "high_threshold": self.high_threshold,
                "verdict": self.verdict}


def estimate_pc(net: Network, window: int | Sequence[int], replicas: int,
                grid: Sequence[float], rng: np.random.Generator,
                low_threshold: float = 0.05, high_threshold: float = 0.5,
                level: float = 0.95) -> PcEstimate:
    """Bracket the percolation threshold from a crossing sweep over ``grid``.

    All grid points of one window share the same edge variates, so the
    crossing fractions are monotone in ``p``. A "pc-below-one" verdict needs
    an upper bracket below 1 at two or more windows.
    """
    g = [float(p) for p in grid]
    if not g or any(not 0 < p <= 1 for p in g) or any(b <= a for a, b in zip(g, g[1:])):
        raise ValueError("grid must be strictly increasing in (0, 1]")
    windows = [window] if isinstance(window, (int, np.integer)) else [int(w) for w in window]
    lowers, uppers, sweep = [], [], []
    for w in windows:
        thr = crossing_thresholds(net, w, replicas, rng)
        ests = [_estimate(thr, p, w, level) for p in g]
        sweep.extend(ests)
        below = [e.p for e in ests if e.fraction < low_threshold]
        above = [e.p for e in ests if e.fraction > high_threshold]
        lowers.append(max(below) if below else None)
        uppers.append(min(above) if above else None)
    return PcEstimate(windows, lowers, uppers, sweep, low_threshold, high_threshold)


def sweep_csv(estimates: Sequence[CrossingEstimate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "window", "replicas", "crossing_fraction", "ci_low", "ci_high"])
    for e in estimates:
        w.writerow([repr(x) if isinstance(x, float) else x for x in e.row()])
    return buf.getvalue()
