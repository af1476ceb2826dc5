"""Command-line experiment runner.

Every command resolves its configuration (flags over an optional
``key=value`` config file over defaults), writes ``manifest.json`` into the
output directory, runs, and finally records SHA-256 hashes of its artifacts
in the manifest. Exit status: 0 success, 2 validation error, 3 resource or
convergence error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__, kernels
from .brw import classify_recurrence, exact_spectral_radius, run_brw, build_trace
from .electrical import (NoSurvivingRayError, SolverConvergenceError, build_t_n,
                         effective_resistance, flow_energy, induce_flow, unit_flow_on_tree)
from .groups import GroupSpecError, parse_group_spec
from .percolation import estimate_pc, sweep_csv
from .stats import (RandomStreamSpec, chi_square, derive_stream, growth_rate_fit, mtp_check,
                    mtp_expectation_exact)
from .tracenet import (CayleyView, RadialTreeView, SpectralConvergenceError, WindowError,
                       estimate_spectral_radius, find_cutpoints, find_line_segments, line_segments,
                       segment_spectral_bound, volume_growth)
from .trees import (DEFAULT_VERTEX_BUDGET, TreeBudgetError, TreeKind, parse_offspring,
                    root_offspring_law, sample_tree)

OUT_ENV = "BRWTRACE_OUT"
EXIT_OK, EXIT_VALIDATION, EXIT_RESOURCE = 0, 2, 3


class ConfigError(ValueError):
    def __init__(self, field: str, msg: str):
        self.field = field
        super().__init__(f"{field}: {msg}")


# ---------------------------------------------------------------------------
# option table


def _int_list(text: str) -> list[int]:
    return [int(x) for x in str(text).split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    """``0.1,0.2`` or ``start:stop:step`` (inclusive stop)."""
    s = str(text)
    if ":" in s:
        a, b, c = (float(x) for x in s.split(":"))
        n = int(math.floor((b - a) / c + 1e-9)) + 1
        return [round(a + i * c, 10) for i in range(n)]
    return [float(x) for x in s.split(",") if x.strip()]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Opt:
    type: Callable[[str], Any]
    default: Any
    help: str


COMMON = {
    "seed": Opt(int, 1, "master seed"),
    "out": Opt(str, None, f"output directory (default ${OUT_ENV} or ./brwtrace-out)"),
    "threads": Opt(int, 1, "worker threads for replicas"),
}
TRACE = {
    "group": Opt(str, "free:2", "group: free:<d> | abelian:<d> | zprod:<n1>,<n2>,..."),
    "p": Opt(str, "1:0.95,2:0.05", "offspring law k:p_k,..."),
    "kind": Opt(str, "GW", "root law: GW | AGW | UGW"),
    "depth": Opt(int, 60, "tree depth"),
    "budget": Opt(int, DEFAULT_VERTEX_BUDGET, "vertex budget"),
}


def _pick(table: dict, *names) -> dict:
    return {n: table[n] for n in names}


COMMANDS: dict[str, tuple[str, dict[str, Opt]]] = {
    "simulate": ("Sample one BRW and write its trace.\n"
                 "trace.csv: x,y,N (elements like a.B.a, identity e); tree.csv: vertex,parent,level,position",
                 {**TRACE, "write_tree": Opt(_bool, False, "also write tree.csv")}),
    "recurrence": ("Replicated root-revisit counts and the recurrence verdict.\n"
                   "revisits.csv: replica,revisits_half,revisits,growing; verdict.json",
                   {**_pick(TRACE, "group", "p", "kind", "depth"),
                    "replicas": Opt(int, 200, "number of replicas"),
                    "rho_radius": Opt(int, 30, "ball radius for the spectral estimate")}),
    "trace-flow": ("Unit flows on T_N, induced flows and effective resistances.\n"
                   "energies.csv: N,depth,tree_energy,induced_energy,bound_holds; flow.csv: x,y,theta; "
                   "resistance.csv: radius,r_eff; report.json",
                   {**TRACE, "N": Opt(_int_list, [1, 2, 5, 10, 20], "thresholds N"),
                    "radii": Opt(_int_list, [5, 10, 20], "shell radii for R_eff"),
                    "stability": Opt(float, 0.05, "relative energy change counted as stable")}),
    "spectral": ("Spectral radius of SRW killed outside a ball.\nspectral.json: radius,value,residual,iterations",
                 {"group": TRACE["group"], "radius": Opt(int, 30, "ball radius"),
                  "tol": Opt(float, 1e-8, "residual tolerance"),
                  "max_iter": Opt(int, 100_000, "iteration cap")}),
    "percolate": ("Crossing sweep and percolation-threshold bracket on a trace.\n"
                  "sweep.csv: p,window,replicas,crossing_fraction,ci_low,ci_high; pc.json",
                  {**TRACE, "windows": Opt(_int_list, [10, 20], "window radii"),
                   "replicas": Opt(int, 200, "replicas per window"),
                   "grid": Opt(_float_list, [round(0.05 * k, 2) for k in range(1, 21)],
                               "p grid: comma list or start:stop:step"),
                   "low": Opt(float, 0.05, "lower bracket threshold"),
                   "high": Opt(float, 0.5, "upper bracket threshold")}),
    "growth": ("Volume growth of a trace and its exponential fit.\ngrowth.csv: n,size; fit.json",
               {**TRACE, "max_radius": Opt(int, 20, "largest n"),
                "range": Opt(_int_list, [5, 20], "fit range lo,hi")}),
    "cutpoints": ("Cutpoints of a trace for several windows.\ncutpoints.csv: window,count,vertices; cutpoints.json",
                  {**TRACE, "windows": Opt(_int_list, [20, 30, 40], "windows")}),
    "segments": ("Maximal degree-2 line segments of a trace.\n"
                 "segments.csv: length,start,end; segments.json",
                 {**TRACE, "k": Opt(int, 5, "segment length threshold (edges)")}),
    "mtp-test": ("Root-degree chi-square and mass-transport check on sampled trees.\nmtp.json",
                 {"p": Opt(str, "1:0.5,2:0.5", TRACE["p"].help), "kind": Opt(str, "UGW", TRACE["kind"].help),
                  "samples": Opt(int, 10_000, "number of trees"),
                  "level": Opt(float, 0.99, "confidence level")}),
    "all": ("Run the acceptance suite.\nacceptance.json plus one criterion_<k>.json per criterion",
            {"only": Opt(_int_list, None, "criteria to run, e.g. 1,2,9")}),
}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="brwtrace", description="Branching random walk trace laboratory")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (doc, opts) in COMMANDS.items():
        sp = sub.add_parser(name, help=doc.splitlines()[0], description=doc,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--config", default=None, help="key=value config file; flags override it")
        for key, opt in {**opts, **COMMON}.items():
            sp.add_argument("--" + key.replace("_", "-"), dest=key, default=None,
                            help=f"{opt.help} (default: {opt.default})")
    return ap


def read_config(path: str, allowed: dict[str, Opt]) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(f"config line {lineno}", f"expected key=value, got {raw!r}")
        if key not in allowed:
            raise ConfigError(key, "unknown config key")
        out[key] = value.strip()
    return out


def resolve_config(command: str, ns: argparse.Namespace) -> dict[str, Any]:
    opts = {**COMMANDS[command][1], **COMMON}
    file_vals = read_config(ns.config, opts) if ns.config else {}
    cfg: dict[str, Any] = {}
    for key, opt in opts.items():
        raw = getattr(ns, key)
        if raw is None:
            raw = file_vals.get(key)
        if raw is None:
            cfg[key] = opt.default
            continue
        try:
            cfg[key] = opt.type(raw)
        except ValueError as exc:
            raise ConfigError(key, str(exc)) from None
    if cfg["out"] is None:
        cfg["out"] = os.environ.get(OUT_ENV, "brwtrace-out")
    _validate(command, cfg)
    return cfg


def _validate(command: str, cfg: dict):
    def need(key, ok, msg):
        if key in cfg and cfg[key] is not None and not ok(cfg[key]):
            raise ConfigError(key, msg)

    need("threads", lambda v: v >= 1, "must be >= 1")
    need("seed", lambda v: v >= 0, "must be >= 0")
    need("depth", lambda v: v >= 0, "must be >= 0")
    need("replicas", lambda v: v >= 1, "must be >= 1")
    need("samples", lambda v: v >= 1, "must be >= 1")
    need("budget", lambda v: v >= 1, "must be >= 1")
    need("radius", lambda v: v >= 0, "must be >= 0")
    need("windows", lambda v: len(v) >= 1 and all(w >= 1 for w in v), "windows must be >= 1")
    need("N", lambda v: len(v) >= 1 and all(n >= 1 for n in v), "N values must be >= 1")
    need("range", lambda v: len(v) == 2 and 0 <= v[0] < v[1], "expected lo,hi with lo < hi")
    need("level", lambda v: 0 < v < 1, "must be in (0, 1)")
    need("tol", lambda v: v > 0, "must be > 0")
    if "group" in cfg:
        try:
            cfg["group_spec"] = parse_group_spec(cfg["group"])
        except GroupSpecError as exc:
            raise ConfigError("group", str(exc)) from None
    if "p" in cfg:
        try:
            cfg["dist"] = parse_offspring(cfg["p"])
        except ValueError as exc:
            raise ConfigError("p", str(exc)) from None
    if "kind" in cfg:
        try:
            cfg["kind"] = TreeKind(str(cfg["kind"]).upper()).value
        except ValueError:
            raise ConfigError("kind", "must be GW, AGW or UGW") from None
    if command == "recurrence":
        need("depth", lambda v: v >= 2, "horizon must be >= 2")


# ---------------------------------------------------------------------------
# artifacts


class Run:
    def __init__(self, command: str, cfg: dict):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg["out"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.streams: dict[str, dict] = {}
        self.artifacts: dict[str, str] = {}
        self.root = RandomStreamSpec(cfg["seed"], (command,))
        self._write_manifest()

    def stream(self, purpose: str, *more) -> RandomStreamSpec:
        spec = self.root.child(purpose, *more)
        self.streams[purpose] = spec.to_dict()
        return spec

    def manifest(self) -> dict:
        cfg = {k: v for k, v in self.cfg.items() if k not in ("group_spec", "dist", "out")}
        return {"command": self.command, "config": cfg, "backend": kernels.BACKEND,
                "version": __version__, "streams": self.streams, "artifacts": self.artifacts}

    def _write_manifest(self):
        text = json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n"
        (self.out / "manifest.json").write_text(text)

    def write(self, name: str, text: str):
        data = text.encode("utf-8")
        (self.out / name).write_bytes(data)
        self.artifacts[name] = hashlib.sha256(data).hexdigest()

    def write_json(self, name: str, obj):
        self.write(name, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")

    def finish(self):
        self._write_manifest()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _trace(run: Run):
    cfg = run.cfg
    spec = run.stream("trace")
    labelled, positions = run_brw(cfg["group_spec"], cfg["dist"], cfg["kind"], cfg["depth"],
                                  derive_stream(spec), cfg["budget"])
    return build_trace(cfg["group_spec"], labelled, positions), labelled, positions


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(run: Run):
    trace, labelled, positions = _trace(run)
    run.write("trace.csv", trace.to_csv())
    if run.cfg["write_tree"]:
        names = trace.names()
        t = labelled.tree
        run.write("tree.csv", _csv(["vertex", "parent", "level", "position"],
                                   ([v, int(t.parent[v]), int(t.level[v]), names[positions.pos[v]]]
                                    for v in range(len(t)))))
    run.write_json("summary.json", {"tree_vertices": len(labelled.tree), "trace_vertices": trace.n,
                                    "trace_edges": trace.n_edges, "total_traversals": int(trace.counts.sum()),
                                    "extent": int(trace.distance.max())})


def cmd_recurrence(run: Run):
    cfg = run.cfg
    rep = classify_recurrence(cfg["group_spec"], cfg["dist"], cfg["depth"], cfg["replicas"],
                              run.stream("replicas"), cfg["kind"], cfg["rho_radius"], cfg["threads"])
    run.write("revisits.csv", _csv(["replica", "revisits_half", "revisits", "growing"],
                                   ([i, int(h), int(f), int(g)] for i, (h, f, g) in
                                    enumerate(zip(rep.revisits_half, rep.revisits, rep.growing)))))
    run.write_json("verdict.json", rep.summary())


def cmd_trace_flow(run: Run):
    from .acceptance import truncate_run

    cfg = run.cfg
    trace, labelled, positions = _trace(run)
    depth = cfg["depth"]
    if depth < 2:
        raise ConfigError("depth", "trace-flow needs depth >= 2")
    rows, per_n = [], {}
    chosen = None
    for N in cfg["N"]:
        energies = []
        for d in (depth // 2, depth):
            lab, pos = truncate_run(labelled, positions, d)
            try:
                flow = unit_flow_on_tree(build_t_n(lab, pos, N))
            except NoSurvivingRayError:
                rows.append([N, d, "", "", ""])
                energies.append(None)
                continue
            induced = induce_flow(flow, pos)
            e_tree, e_graph = flow_energy(flow).energy, flow_energy(induced).energy
            rows.append([N, d, e_tree, e_graph, int(e_graph <= N * e_tree * (1 + 1e-12))])
            energies.append(e_graph)
            if d == depth:
                per_n[N] = induced
        if None not in energies:
            change = abs(energies[1] - energies[0]) / energies[0]
            if chosen is None and change < cfg["stability"]:
                chosen = N
    run.write("energies.csv", _csv(["N", "depth", "tree_energy", "induced_energy", "bound_holds"], rows))
    flow_n = chosen if chosen is not None else (max(per_n) if per_n else None)
    if flow_n is not None:
        run.write("flow.csv", per_n[flow_n].to_csv(trace.names()))
    res = []
    for r in cfg["radii"]:
        sinks = np.flatnonzero(trace.distance >= r)
        if len(sinks):
            res.append([r, effective_resistance(trace, 0, sinks)])
    run.write("resistance.csv", _csv(["radius", "r_eff"], res))
    run.write_json("report.json", {"smallest_stable_N": chosen, "flow_N": flow_n,
                                   "depths": [depth // 2, depth]})


def cmd_spectral(run: Run):
    cfg = run.cfg
    spec = cfg["group_spec"]
    view = RadialTreeView(spec.tree_degree) if spec.tree_degree else CayleyView(spec)
    est = estimate_spectral_radius(view, cfg["radius"], cfg["tol"], cfg["max_iter"])
    out = est.to_dict()
    out.update({"group": spec.name, "exact": exact_spectral_radius(spec),
                "view": type(view).__name__})
    run.write_json("spectral.json", out)


def cmd_percolate(run: Run):
    cfg = run.cfg
    trace, _, _ = _trace(run)
    extent = int(trace.distance.max())
    bad = [w for w in cfg["windows"] if w > extent]
    if bad:
        raise ConfigError("windows", f"window {bad[0]} exceeds trace extent {extent}")
    est = estimate_pc(trace, cfg["windows"], cfg["replicas"], cfg["grid"],
                      derive_stream(run.stream("percolation")), cfg["low"], cfg["high"])
    run.write("sweep.csv", sweep_csv(est.sweep))
    run.write_json("pc.json", est.to_dict())


def cmd_growth(run: Run):
    cfg = run.cfg
    trace, _, _ = _trace(run)
    seq = volume_growth(trace, cfg["max_radius"])
    run.write("growth.csv", _csv(["n", "size"], ([n, int(s)] for n, s in enumerate(seq))))
    lo, hi = cfg["range"]
    if hi > cfg["max_radius"]:
        raise ConfigError("range", "upper end exceeds max_radius")
    fit = growth_rate_fit(seq, (lo, hi))
    run.write_json("fit.json", {"c": fit.c, "r": fit.r, "slope_se": fit.slope_se,
                                "intercept_se": fit.intercept_se, "curvature": fit.curvature,
                                "curvature_se": fit.curvature_se, "concave": fit.concave,
                                "range": [lo, hi]})


def cmd_cutpoints(run: Run):
    cfg = run.cfg
    trace, _, _ = _trace(run)
    names = trace.names()
    rows, out = [], {}
    for w in cfg["windows"]:
        try:
            cuts = find_cutpoints(trace, w)
        except WindowError as exc:
            raise ConfigError("windows", str(exc)) from None
        rows.append([w, len(cuts), " ".join(names[c] for c in cuts)])
        out[w] = len(cuts)
    counts = list(out.values())
    run.write("cutpoints.csv", _csv(["window", "count", "vertices"], rows))
    run.write_json("cutpoints.json", {"counts": out, "stable": len(set(counts)) == 1})


def cmd_segments(run: Run):
    cfg = run.cfg
    trace, _, _ = _trace(run)
    names = trace.names()
    segs = sorted(line_segments(trace), key=lambda s: (-len(s), s))
    run.write("segments.csv", _csv(["length", "start", "end"],
                                   ([len(s) - 1, names[s[0]], names[s[-1]]] for s in segs)))
    longest = len(segs[0]) - 1 if segs else 0
    run.write_json("segments.json", {"count_at_least_k": find_line_segments(trace, cfg["k"]),
                                     "k": cfg["k"], "longest": longest,
                                     "rho_lower_bound": segment_spectral_bound(longest)})


def cmd_mtp_test(run: Run):
    cfg = run.cfg
    dist, kind = cfg["dist"], cfg["kind"]
    rng = derive_stream(run.stream("trees"))
    trees = [sample_tree(dist, kind, 2, rng) for _ in range(cfg["samples"])]
    law = root_offspring_law(dist, kind)
    support = np.flatnonzero(law > 0)
    degs = np.array([t.n_children[0] for t in trees])
    chi = chi_square([int(np.sum(degs == k)) for k in support], law[support], name="root_offspring")
    mtp = mtp_check(trees, cfg["level"])
    run.write_json("mtp.json", {"root_law": chi.to_dict(), "mtp": mtp.to_dict(),
                                "exact_expectation": mtp_expectation_exact(dist, kind)})


def cmd_all(run: Run):
    from .acceptance import run_all

    results = run_all(run.cfg["seed"], run.cfg["only"], run.cfg["threads"])
    for r in results:
        run.write_json(f"criterion_{r.number}.json", r.to_dict())
        print(r.line())
    run.write_json("acceptance.json", {"passed": all(r.passed for r in results),
                                       "criteria": {r.number: r.passed for r in results}})


HANDLERS = {
    "simulate": cmd_simulate, "recurrence": cmd_recurrence, "trace-flow": cmd_trace_flow,
    "spectral": cmd_spectral, "percolate": cmd_percolate, "growth": cmd_growth,
    "cutpoints": cmd_cutpoints, "segments": cmd_segments, "mtp-test": cmd_mtp_test, "all": cmd_all,
}

RESOURCE_ERRORS = (TreeBudgetError, MemoryError, SpectralConvergenceError, SolverConvergenceError,
                   kernels.PopulationOverflow)


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(ns.command, ns)
        run = Run(ns.command, cfg)
        HANDLERS[ns.command](run)
        run.finish()
    except RESOURCE_ERRORS as exc:
        print(f"brwtrace: resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ValueError, OSError) as exc:
        print(f"brwtrace: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
