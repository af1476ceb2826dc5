"""Estimators, goodness-of-fit tests and reproducible random streams."""
from __future__ import annotations

import itertools
import math
import zlib
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats as sps

from .trees import OffspringDist, RootedTree, TreeKind, root_offspring_law

__all__ = [
    "RandomStreamSpec",
    "TestReport",
    "GrowthFit",
    "derive_stream",
    "chi_square",
    "growth_rate_fit",
    "mtp_statistic",
    "mtp_check",
    "mtp_expectation_exact",
    "mean_confidence_interval",
    "wilson_interval",
]


def _path_key(item: int | str) -> int:
    if isinstance(item, str):
        return zlib.crc32(item.encode("utf-8"))
    if item < 0:
        raise ValueError("stream path indices must be non-negative")
    return int(item)


@dataclass(frozen=True)
class RandomStreamSpec:
    """Master seed plus a derivation path such as ``("recurrence", 17)``.

    String path entries are mapped to integers by CRC-32, so names are stable
    across processes and Python versions.
    """

    master_seed: int
    path: tuple[int | str, ...] = ()

    def child(self, *items: int | str) -> "RandomStreamSpec":
        return RandomStreamSpec(self.master_seed, self.path + tuple(items))

    def to_dict(self) -> dict:
        return {"master_seed": self.master_seed, "path": list(self.path)}


def derive_stream(spec: RandomStreamSpec | int) -> np.random.Generator:
    """Deterministic generator for a stream spec.

    The seed and path go through ``numpy.random.SeedSequence`` (entropy =
    master seed, spawn key = path), whose hash mixing makes distinct paths
    statistically independent. The bit generator is PCG64.
    """
    if isinstance(spec, (int, np.integer)):
        spec = RandomStreamSpec(int(spec))
    ss = np.random.SeedSequence(entropy=spec.master_seed,
                                spawn_key=tuple(_path_key(p) for p in spec.path))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class TestReport:
    """Outcome of a statistical test; ``passed`` is the test's accept flag."""

    __test__ = False  # not a pytest class

    name: str
    statistic: float
    p_value: float | None
    df: int | None
    n: int
    level: float
    passed: bool
    details: dict = field(default_factory=dict)
    stream: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def chi_square(observed: Sequence[float], expected: Sequence[float], level: float = 0.01,
               name: str = "chi_square") -> TestReport:
    """Pearson goodness-of-fit test of counts against category probabilities.

    ``expected`` is normalised to the observed total. ``passed`` is True when
    the p-value is at least ``level``.
    """
    obs = np.asarray(observed, dtype=float)
    prob = np.asarray(expected, dtype=float)
    if obs.shape != prob.shape or obs.ndim != 1:
        raise ValueError(f"support mismatch: {obs.shape} observed vs {prob.shape} expected")
    if np.any(prob <= 0):
        raise ValueError("expected probabilities must be strictly positive")
    n = obs.sum()
    if n <= 0:
        raise ValueError("observed counts sum to zero")
    exp = prob / prob.sum() * n
    stat = float(np.sum((obs - exp) ** 2 / exp))
    df = len(obs) - 1
    pval = float(sps.chi2.sf(stat, df)) if df > 0 else 1.0
    return TestReport(name, stat, pval, df, int(n), level, pval >= level)


@dataclass
class GrowthFit:
    c: float
    r: float
    slope: float
    intercept: float
    slope_se: float
    intercept_se: float
    residuals: np.ndarray
    curvature: float
    curvature_se: float

    @property
    def concave(self) -> bool:
        """Log-values bend downward (polynomial rather than exponential growth)."""
        return self.curvature < 0 and abs(self.curvature) > 3 * self.curvature_se


def growth_rate_fit(sequence: Sequence[float], n_range: tuple[int, int] | None = None) -> GrowthFit:
    """Least-squares fit of ``log y_n = log c + n log r`` over ``n_range``.

    ``sequence[n]`` is the value at ``n``; ``n_range`` is inclusive and
    defaults to the whole sequence. Also fits a quadratic in ``n`` to the
    log-values and reports its leading coefficient as ``curvature``.
    """
    y = np.asarray(sequence, dtype=float)
    lo, hi = (0, len(y) - 1) if n_range is None else n_range
    n = np.arange(lo, hi + 1)
    if len(n) < 3:
        raise ValueError("growth fit needs at least 3 points")
    if hi >= len(y) or lo < 0:
        raise ValueError(f"range {n_range} outside sequence of length {len(y)}")
    vals = y[n]
    if np.any(vals < 1):
        raise ValueError("growth fit needs values >= 1")
    ly = np.log(vals)
    X = np.column_stack([np.ones_like(n, dtype=float), n.astype(float)])
    coef, _, _, _ = np.linalg.lstsq(X, ly, rcond=None)
    resid = ly - X @ coef
    dof = len(n) - 2
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.inv(X.T @ X)
    Xq = np.column_stack([X, (n.astype(float) - n.mean()) ** 2])
    if len(n) > 3:
        qc, _, _, _ = np.linalg.lstsq(Xq, ly, rcond=None)
        qres = ly - Xq @ qc
        qs2 = float(qres @ qres) / (len(n) - 3)
        qcov = qs2 * np.linalg.inv(Xq.T @ Xq)
        curv, curv_se = float(qc[2]), float(math.sqrt(max(qcov[2, 2], 0.0)))
    else:
        curv, curv_se = 0.0, math.inf
    return GrowthFit(c=float(math.exp(coef[0])), r=float(math.exp(coef[1])),
                     slope=float(coef[1]), intercept=float(coef[0]),
                     slope_se=float(math.sqrt(cov[1, 1])), intercept_se=float(math.sqrt(cov[0, 0])),
                     residuals=resid, curvature=curv, curvature_se=curv_se)


def mean_confidence_interval(values: Sequence[float], level: float = 0.99) -> tuple[float, float, float]:
    x = np.asarray(values, dtype=float)
    m = float(x.mean())
    if len(x) < 2:
        return m, m, m
    se = float(x.std(ddof=1)) / math.sqrt(len(x))
    z = float(sps.norm.ppf(0.5 + level / 2))
    return m, m - z * se, m + z * se


def wilson_interval(successes: int, n: int, level: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    z = float(sps.norm.ppf(0.5 + level / 2))
    phat = successes / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return lo, hi


def mtp_statistic(tree: RootedTree) -> float:
    """``sum over root neighbours x of 1/deg(x)`` for a tree of depth >= 2."""
    if tree.depth < 2:
        raise ValueError(f"mtp statistic needs depth >= 2, got {tree.depth}")
    kids = np.asarray(tree.children(0))
    # a root child has its parent plus its own children as neighbours
    return float(np.sum(1.0 / (1.0 + tree.n_children[kids])))


def mtp_check(samples: Sequence[RootedTree], level: float = 0.99) -> TestReport:
    """Mass-transport check with ``f(G, o, x) = 1{x ~ o} / deg(o)``.

    Sending mass ``1/deg(o)`` from the root to each neighbour makes the
    expected mass received at the root, ``E[sum_{x~o} 1/deg(x)]``, equal to
    the mass sent out, which is exactly 1. The test passes iff 1 lies in the
    ``level`` confidence interval of the sample mean.
    """
    vals = np.array([mtp_statistic(t) for t in samples])
    if len(vals) == 0:
        raise ValueError("mtp_check needs at least one sample")
    m, lo, hi = mean_confidence_interval(vals, level)
    if lo == hi:
        passed = abs(m - 1.0) <= 1e-12
    else:
        passed = lo <= 1.0 <= hi
    return TestReport("mtp", m, None, None, len(vals), level, passed,
                      details={"ci_low": lo, "ci_high": hi})


def mtp_expectation_exact(dist: OffspringDist, kind: TreeKind | str) -> float:
    """Exact ``E[sum_{x~o} 1/deg(x)]`` by enumerating the root's child count
    and every joint assignment of offspring numbers to those children."""
    root_law = root_offspring_law(dist, kind)
    support = [(k, p) for k, p in enumerate(dist.probs) if p > 0]
    total = 0.0
    for j, pj in enumerate(root_law):
        if pj == 0:
            continue
        for combo in itertools.product(support, repeat=j):
            prob = pj * math.prod(p for _, p in combo)
            total += prob * sum(1.0 / (1 + k) for k, _ in combo)
    return float(total)
