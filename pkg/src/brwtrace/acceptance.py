"""Acceptance experiments shared by the test-suite and ``brwtrace all``."""
from __future__ import annotations

import math
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .brw import (LabelledTree, PositionMap, build_trace, brw_revisits_on_network,
                  classify_recurrence, run_brw, simulate_trace)
from .electrical import (NoSurvivingRayError, build_t_n, effective_resistance, flow_energy,
                         induce_flow, unit_flow_on_tree)
from .groups import parse_group_spec
from .network import complete_tree_network, cycle_network, path_network
from .percolation import estimate_pc
from .stats import (RandomStreamSpec, chi_square, derive_stream, growth_rate_fit, mtp_check,
                    mtp_expectation_exact)
from .tracenet import (CayleyView, NetworkView, RadialTreeView, WindowError,
                       estimate_spectral_radius, find_cutpoints, line_segments,
                       restricted_spectral_radius, segment_spectral_bound, volume_growth)
from .trees import RootedTree, TreeKind, complete_tree, parse_offspring, root_offspring_law, sample_tree

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_all", "DEFAULT_SEED"]

DEFAULT_SEED = 20240601

FREE2 = "free:2"
M105 = "1:0.95,2:0.05"
M135 = "1:0.65,2:0.35"
M150 = "1:0.5,2:0.5"
GRID = tuple(round(0.05 * k, 2) for k in range(1, 21))


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    checks: dict[str, bool] = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        failed = [k for k, ok in self.checks.items() if not ok]
        tail = "" if not failed else " (failed: " + ", ".join(failed) + ")"
        return f"{'PASS' if self.passed else 'FAIL'} criterion {self.number}: {self.title}{tail}"

    def to_dict(self) -> dict:
        return {"criterion": self.number, "title": self.title, "passed": self.passed,
                "checks": self.checks, "details": _plain(self.details)}


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def _result(number, title, checks, details) -> CriterionResult:
    return CriterionResult(number, title, all(checks.values()), checks, details)


def _stream(seed: int, *path) -> RandomStreamSpec:
    return RandomStreamSpec(seed, ("acceptance",) + path)


def truncate_run(labelled: LabelledTree, positions: PositionMap, depth: int):
    """The same run cut at a smaller depth (a breadth-first prefix)."""
    n = int(np.sum(labelled.tree.level <= depth))
    tree = RootedTree(labelled.tree.parent[:n], depth, labelled.tree.kind)
    return (LabelledTree(tree, labelled.labels[:n]),
            PositionMap(positions.spec, positions.elements, positions.pos[:n]))


# ---------------------------------------------------------------------------


def criterion_1(seed: int = DEFAULT_SEED) -> CriterionResult:
    t4 = estimate_spectral_radius(RadialTreeView(4), 30)
    path = path_network(10)
    l9 = restricted_spectral_radius(NetworkView(path), range(1, 10))
    z2 = CayleyView(parse_group_spec("abelian:2"))
    radii = (10, 20, 30, 40)
    zvals = [estimate_spectral_radius(z2, r).value for r in radii]
    checks = {
        "T4 radius 30 in [0.856, 0.8661]": 0.856 <= t4.value <= 0.8661,
        "L9 equals cos(pi/10) within 1e-6": abs(l9.value - math.cos(math.pi / 10)) <= 1e-6,
        "Z2 monotone in radius": all(b >= a for a, b in zip(zvals, zvals[1:])),
        "Z2 radius 40 >= 0.98": zvals[-1] >= 0.98,
    }
    return _result(1, "spectral oracle", checks, {
        "t4": t4.to_dict(), "t4_exact": 2 * math.sqrt(3) / 4, "l9": l9.value,
        "z2": dict(zip(radii, zvals))})


def criterion_2(seed: int = DEFAULT_SEED, threads: int = 1) -> CriterionResult:
    free2 = parse_group_spec(FREE2)
    z2 = parse_group_spec("abelian:2")
    hi = classify_recurrence(free2, parse_offspring(M135), 60, 200, _stream(seed, 2, "m135"),
                             threads=threads)
    lo = classify_recurrence(free2, parse_offspring(M105), 60, 200, _stream(seed, 2, "m105"),
                             threads=threads)
    # horizon 60 is far too short for m = 1.05 on Z^2 (see README)
    am = classify_recurrence(z2, parse_offspring(M105), 300, 200, _stream(seed, 2, "z2"),
                             threads=threads)
    checks = {
        "free:2 m=1.35 growing >= 0.99": hi.fraction_growing >= 0.99,
        "free:2 m=1.05 stable >= 0.95": 1 - lo.fraction_growing >= 0.95,
        "abelian:2 m=1.05 growing >= 0.99": am.fraction_growing >= 0.99,
    }
    return _result(2, "recurrence transition", checks, {
        "free2_m135": hi.summary(), "free2_m105": lo.summary(), "abelian2_m105": am.summary()})


def criterion_3(seed: int = DEFAULT_SEED, runs: int = 50) -> CriterionResult:
    spec = parse_group_spec(FREE2)
    dist = parse_offspring(M105)
    energy_ok = {5: 0, 10: 0}
    res_ok = 0
    bound_ok = True
    rows = []
    for i in range(runs):
        # one depth-60 run; flows use its truncations at 20 and 40
        labelled, positions = run_brw(spec, dist, TreeKind.GW, 60, derive_stream(_stream(seed, 3, i)))
        row = {"run": i}
        for N in (5, 10):
            energies = []
            for depth in (20, 40):
                lab, pos = truncate_run(labelled, positions, depth)
                try:
                    flow = unit_flow_on_tree(build_t_n(lab, pos, N))
                except NoSurvivingRayError:
                    energies.append(math.nan)
                    continue
                e_tree = flow_energy(flow).energy
                e_graph = flow_energy(induce_flow(flow, pos)).energy
                bound_ok &= e_graph <= N * e_tree * (1 + 1e-12)
                energies.append(e_graph)
            change = abs(energies[1] - energies[0]) / energies[0]
            energy_ok[N] += bool(change < 0.05)
            row[f"energy_N{N}"] = energies
        trace = build_trace(spec, labelled, positions)
        if trace.distance.max() >= 20:
            r10, r20 = (effective_resistance(trace, 0, np.flatnonzero(trace.distance >= r))
                        for r in (10, 20))
            res_ok += bool(abs(r20 - r10) / r10 < 0.10)
            row["reff"] = [r10, r20]
        rows.append(row)
    checks = {
        "energy stable N=5 in >= 90%": energy_ok[5] >= 0.9 * runs,
        "energy stable N=10 in >= 90%": energy_ok[10] >= 0.9 * runs,
        "R_eff(10) vs R_eff(20) within 10% in >= 90%": res_ok >= 0.9 * runs,
        "Cauchy-Schwarz bound on every run": bool(bound_ok),
    }
    return _result(3, "trace transience certificate", checks, {
        "energy_stable": energy_ok, "reff_stable": res_ok, "runs": runs, "per_run": rows})


def binary_tree_crossing_exact(p: float, depth: int) -> float:
    """Probability that the open cluster of the root of the complete binary
    tree reaches level ``depth``: ``1 - q_depth`` with ``q_0 = 0`` and
    ``q_{n+1} = (1 - p + p q_n)^2``."""
    q = 0.0
    for _ in range(depth):
        q = (1 - p + p * q) ** 2
    return 1 - q


def criterion_4(seed: int = DEFAULT_SEED, runs: int = 50) -> CriterionResult:
    spec = parse_group_spec(FREE2)
    dist = parse_offspring(M105)
    windows = (10, 20)
    good = 0
    uppers = []
    for i in range(runs):
        trace, _, _ = simulate_trace(spec, dist, 60, _stream(seed, 4, "trace", i))
        try:
            est = estimate_pc(trace, windows, 200, GRID, derive_stream(_stream(seed, 4, "pc", i)))
        except ValueError:  # trace too short for the outer window
            uppers.append(None)
            continue
        uppers.append(est.upper)
        good += all(u is not None and u <= 0.95 for u in est.upper)
    tree = complete_tree_network(2, 20)
    cal = estimate_pc(tree, 20, 100, GRID, derive_stream(_stream(seed, 4, "binary")))
    lo, hi = cal.lower[0], cal.upper[0]
    bracket_ok = lo is not None and hi is not None and lo <= 0.5 <= hi and abs((lo + hi) / 2 - 0.5) <= 0.05
    checks = {
        "trace upper bracket <= 0.95 at both windows in >= 90%": good >= 0.9 * runs,
        "binary tree bracket contains 0.5, centre within 0.05": bool(bracket_ok),
    }
    exact = {p: binary_tree_crossing_exact(p, 20) for p in GRID}
    return _result(4, "percolation threshold below one", checks, {
        "windows": windows, "good": good, "runs": runs, "uppers": uppers,
        "binary_bracket": [lo, hi], "binary_sweep": [e.row() for e in cal.sweep],
        "binary_exact": exact})


def criterion_5(seed: int = DEFAULT_SEED, runs: int = 100) -> CriterionResult:
    free2 = parse_group_spec(FREE2)
    z2 = parse_group_spec("abelian:2")
    dist = parse_offspring(M105)
    r_free, r_z2, concave_z2, flagged = [], [], 0, 0
    for i in range(runs):
        trace, _, _ = simulate_trace(free2, dist, 60, _stream(seed, 5, "free", i))
        r_free.append(growth_rate_fit(volume_growth(trace, 20), (5, 20)).r)
        trace, _, _ = simulate_trace(z2, dist, 60, _stream(seed, 5, "z2", i))
        fit = growth_rate_fit(volume_growth(trace, 20), (5, 20))
        r_z2.append(fit.r)
        concave_z2 += fit.concave
        flagged += fit.r <= 1.1 and fit.concave
    r_free = np.array(r_free)
    checks = {
        "free:2 r > 1.02 in >= 95%": np.mean(r_free > 1.02) >= 0.95,
        "Z2 flagged non-exponential in >= 95%": flagged >= 0.95 * runs,
    }
    return _result(5, "exponential volume growth", checks, {
        "free_r_median": float(np.median(r_free)), "free_fraction": float(np.mean(r_free > 1.02)),
        "z2_r_median": float(np.median(r_z2)), "z2_concave": concave_z2, "z2_flagged": flagged,
        "runs": runs})


def criterion_6(seed: int = DEFAULT_SEED, runs: int = 100) -> CriterionResult:
    path = path_network(3)  # o - x - y - z
    cyc = cycle_network(8)
    spec = parse_group_spec(FREE2)
    dist = parse_offspring(M105)
    stable = 0
    counts = []
    for i in range(runs):
        trace, _, _ = simulate_trace(spec, dist, 120, _stream(seed, 6, i))
        try:
            c = [len(find_cutpoints(trace, w)) for w in (20, 30, 40)]
        except WindowError:
            counts.append(None)
            continue
        counts.append(c)
        stable += c[0] == c[1] == c[2]
    checks = {
        "path cutpoints are the interior vertices": find_cutpoints(path, 3) == [1, 2],
        "cycle has no cutpoints": all(find_cutpoints(cyc, w) == [] for w in (1, 2, 3, 4)),
        "counts stable over windows 20/30/40 in >= 90%": stable >= 0.9 * runs,
    }
    return _result(6, "finitely many cutpoints", checks, {
        "stable": stable, "runs": runs, "counts": counts})


def criterion_7(seed: int = DEFAULT_SEED, runs: int = 200) -> CriterionResult:
    spec = parse_group_spec(FREE2)
    dist = parse_offspring(M105)
    fractions = {}
    bounds_ok = True
    bounds = []
    for depth in (30, 60, 90):
        hits = 0
        for i in range(runs):
            trace, _, _ = simulate_trace(spec, dist, depth, _stream(seed, 7, depth, i))
            segs = line_segments(trace)
            longest = max(segs, key=len) if segs else []
            k = len(longest) - 1
            if k - 1 >= 5:  # at least 5 interior vertices of degree 2
                hits += 1
                if depth == 60:
                    bound = segment_spectral_bound(k)
                    est = restricted_spectral_radius(NetworkView(trace), longest[1:-1])
                    bounds_ok &= abs(est.value - bound) <= 1e-6 and bound >= math.cos(math.pi / 6) - 1e-12
                    bounds.append(bound)
        fractions[depth] = hits / runs
    checks = {
        "fraction with L5 at depth 60 >= 0.5": fractions[60] >= 0.5,
        "fraction non-decreasing over depths 30/60/90": fractions[30] <= fractions[60] <= fractions[90],
        "bound cos(pi/6) certified by power iteration": bool(bounds_ok),
    }
    return _result(7, "line segments and spectral radius of the trace", checks, {
        "fractions": fractions, "bound_min": min(bounds) if bounds else None,
        "bound_median": float(np.median(bounds)) if bounds else None})


def criterion_8(seed: int = DEFAULT_SEED, runs: int = 50, replicas: int = 10,
                threads: int = 1) -> CriterionResult:
    spec = parse_group_spec(FREE2)
    dist = parse_offspring(M105)
    second = parse_offspring(M150)
    growing = 0
    for i in range(runs):
        trace, _, _ = simulate_trace(spec, dist, 60, _stream(seed, 8, "trace", i))
        full, half = brw_revisits_on_network(trace, second, 40, replicas, _stream(seed, 8, "brw", i),
                                             threads=threads)
        growing += int(np.sum(full > half))
    frac = growing / (runs * replicas)
    checks = {"growing revisits in >= 98% of pairs": frac >= 0.98}
    return _result(8, "strong recurrence on the trace", checks, {"fraction": frac})


def criterion_9(seed: int = DEFAULT_SEED, samples: int = 100_000) -> CriterionResult:
    dist = parse_offspring(M150)
    rng = derive_stream(_stream(seed, 9, "root"))
    law = root_offspring_law(dist, TreeKind.UGW)
    degs = np.array([sample_tree(dist, TreeKind.UGW, 1, rng).n_children[0] for _ in range(samples)])
    support = np.flatnonzero(law > 0)
    observed = [int(np.sum(degs == k)) for k in support]
    chi = chi_square(observed, law[support], level=0.01, name="ugw_root_degree")
    rng = derive_stream(_stream(seed, 9, "mtp"))
    ugw = mtp_check([sample_tree(dist, TreeKind.UGW, 2, rng) for _ in range(samples)])
    gw = mtp_check([sample_tree(dist, TreeKind.GW, 2, rng) for _ in range(samples)])
    exact_ugw = mtp_expectation_exact(dist, TreeKind.UGW)
    exact_gw = mtp_expectation_exact(dist, TreeKind.GW)
    checks = {
        "UGW root degree chi-square passes at 1%": chi.passed,
        "UGW mtp CI contains 1": ugw.passed,
        "GW mtp rejected": not gw.passed,
        "exact UGW expectation is 1": abs(exact_ugw - 1) <= 1e-12,
        "GW CI contains its exact mean": gw.details["ci_low"] <= exact_gw <= gw.details["ci_high"],
    }
    return _result(9, "unimodularity statistics", checks, {
        "chi_square": chi.to_dict(), "ugw": ugw.to_dict(), "gw": gw.to_dict(),
        "exact_ugw": exact_ugw, "exact_gw": exact_gw})


def criterion_10(seed: int = DEFAULT_SEED, runs: int = 20) -> CriterionResult:
    bin_ok = all(abs(flow_energy(unit_flow_on_tree(complete_tree(2, d))).energy - (1 - 2.0 ** -d)) <= 1e-9
                 for d in range(1, 13))
    ter_ok = all(abs(flow_energy(unit_flow_on_tree(complete_tree(3, d))).energy
                     - sum(3.0 ** -n for n in range(1, d + 1))) <= 1e-9 for d in range(1, 9))
    path_ok = all(abs(effective_resistance(path_network(k), 0, [k]) - k) <= 1e-9 * k for k in range(1, 41))
    tree_ok = all(abs(effective_resistance(net, 0, np.flatnonzero(net.distance == d)) - (1 - 2.0 ** -d)) <= 1e-9
                  for d in range(1, 11) for net in [complete_tree_network(2, d)])
    spec = parse_group_spec(FREE2)
    dist = parse_offspring(M105)
    thomson_ok = True
    checked = 0
    for i in range(runs):
        labelled, positions = run_brw(spec, dist, TreeKind.GW, 40, derive_stream(_stream(seed, 10, i)))
        trace = build_trace(spec, labelled, positions)
        for N in (5, 10):
            try:
                flow = induce_flow(unit_flow_on_tree(build_t_n(labelled, positions, N)), positions)
            except NoSurvivingRayError:
                continue
            if flow.source in set(flow.sinks.tolist()):
                continue
            r = effective_resistance(trace, flow.source, flow.sinks)
            thomson_ok &= r <= flow_energy(flow).energy * (1 + 1e-9)
            checked += 1
    checks = {
        "binary tree energies 1 - 2^-d": bin_ok,
        "3-ary tree energies sum 3^-n": ter_ok,
        "path R_eff equals k": path_ok,
        "binary tree R_eff 1 - 2^-d": tree_ok,
        "Thomson inequality on every run": bool(thomson_ok) and checked > 0,
    }
    return _result(10, "electrical exactness", checks, {"thomson_runs": checked})


def criterion_11(seed: int = DEFAULT_SEED) -> CriterionResult:
    from .cli import main

    commands = [
        ["simulate", "--group", FREE2, "--p", M105, "--depth", "30"],
        ["recurrence", "--group", FREE2, "--p", M105, "--depth", "30", "--replicas", "20"],
        ["spectral", "--group", "zprod:2,2,2,2", "--radius", "30"],
        ["percolate", "--group", FREE2, "--p", M105, "--depth", "40", "--windows", "5,10",
         "--replicas", "50"],
        ["growth", "--group", FREE2, "--p", M105, "--depth", "40"],
        ["cutpoints", "--group", FREE2, "--p", M105, "--depth", "60", "--windows", "5,10"],
        ["segments", "--group", FREE2, "--p", M105, "--depth", "40"],
        ["trace-flow", "--group", FREE2, "--p", M105, "--depth", "30"],
        ["mtp-test", "--p", M150, "--samples", "2000"],
    ]
    same = {}
    with tempfile.TemporaryDirectory() as tmp:
        for cmd in commands:
            outs = []
            for rep in range(2):
                out = Path(tmp) / f"{cmd[0]}-{rep}"
                code = main(cmd + ["--seed", str(seed), "--out", str(out)])
                outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())} if code == 0 else None)
            same[cmd[0]] = outs[0] is not None and outs[0] == outs[1]
    return _result(11, "determinism", {f"{k} byte-identical": v for k, v in same.items()}, {})


CRITERIA: dict[int, Callable[..., CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11,
}


def run_criterion(number: int, seed: int = DEFAULT_SEED, threads: int = 1) -> CriterionResult:
    fn = CRITERIA[number]
    if number in (2, 8):
        return fn(seed, threads=threads)
    return fn(seed)


def run_all(seed: int = DEFAULT_SEED, only=None, threads: int = 1) -> list[CriterionResult]:
    return [run_criterion(k, seed, threads) for k in sorted(CRITERIA) if only is None or k in only]
