"""Command-line entry point: ``cascadia <subcommand> ...``.

Every subcommand resolves its settings from built-in defaults, then an
optional ``--config`` JSON file (a previous run's manifest.json also works),
then explicit flags. Exit codes: 0 ok, 1 usage, 2 validation, 3 numerical,
4 reproduction diff.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .errors import CascadiaError, MalformedGraph, UsageError

EXIT_DIFF = 4

COMMON_DEFAULTS = {"alpha": 1.5, "lam": 0.5, "lam_star": None, "rule": "break_all", "seed": 0, "threads": None}

DEFAULTS = {
    "opf-solve": {"graph": None, "demand": None, "lam": 0.5},
    "cascade": {"graph": None, "demand": None, "lam": 0.5, "lam_star": None, "rule": "break_all",
                "first_edge": None, "out": None},
    "tie-analyze": {"graph": None, "gamma": None, "lam": 0.5, "lam_star": None, "failed": [],
                    "pair": None, "epsilon": 1e-4},
    "tail": {**COMMON_DEFAULTS, "graph": None, "replicas": 100_000, "hill_k": None,
             "partition_replicas": None, "out": None},
    "conjecture": {**COMMON_DEFAULTS, "min_nodes": 2, "max_nodes": 6, "gammas": 20,
                   "rules": ["break_all", "smallest_label", "largest_label"], "out": None},
    "repro-example": {"lam": 0.5, "lam_star": None, "regime": "normal", "dump_ptdf": False, "golden": None},
}


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def parse_config(command, flags, path=None):
    """Merge defaults, an optional JSON file and explicit (non-None) flags."""
    if command not in DEFAULTS:
        raise UsageError(f"unknown command {command!r}")
    conf = dict(DEFAULTS[command])
    if path:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if isinstance(raw, dict) and "config_echo" in raw:
            raw = raw["config_echo"]
        if not isinstance(raw, dict):
            raise UsageError("config file must hold a JSON object")
        raw = {k.replace("-", "_"): v for k, v in raw.items() if k != "command"}
        unknown = sorted(set(raw) - set(conf))
        if unknown:
            raise UsageError(f"unknown config key {unknown[0]!r}")
        conf.update(raw)
    for k, v in flags.items():
        if v is not None and k in conf:
            conf[k] = v
    if command == "repro-example" and conf["lam_star"] is None and conf["regime"] == "normal":
        # the example's emergency margin sits 10% above the planning one
        conf["lam_star"] = round(1.1 * conf["lam"], 12)
    return _check(conf)


def _check(conf):
    if "lam" in conf:
        lam = conf["lam"]
        if not (isinstance(lam, (int, float)) and 0 < lam < 1):
            raise UsageError(f"--lambda must lie in (0, 1), got {lam}")
        if conf.get("lam_star") is None and "lam_star" in conf:
            conf["lam_star"] = lam
        if "lam_star" in conf and conf["lam_star"] < lam:
            raise UsageError(f"--lambda-star must be at least --lambda ({conf['lam_star']} < {lam})")
    if "alpha" in conf and not conf["alpha"] > 0:
        raise UsageError("--alpha must be positive")
    if "rule" in conf:
        from .cascade_engine import TieBreakRule
        try:
            conf["rule"] = TieBreakRule.parse(conf["rule"]).value
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if "replicas" in conf and int(conf["replicas"]) < 1:
        raise UsageError("--replicas must be positive")
    if "threads" in conf:
        t = conf["threads"] if conf["threads"] is not None else os.environ.get("CASCADIA_THREADS", 1)
        try:
            conf["threads"] = max(1, int(t))
        except ValueError:
            raise UsageError(f"bad thread count {t!r}") from None
    return conf


def _vector(spec, what):
    """A vector from a JSON file, or an inline comma-separated list."""
    if spec is None:
        raise UsageError(f"--{what} is required")
    if isinstance(spec, (list, tuple)):
        return np.asarray(spec, dtype=float)
    p = Path(spec)
    text = p.read_text() if p.exists() else spec
    try:
        vals = json.loads(text) if text.strip().startswith("[") else [float(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse --{what} {spec!r}") from None
    return np.asarray(vals, dtype=float)


def _ids(spec):
    if spec in (None, "", []):
        return []
    if isinstance(spec, (list, tuple)):
        return [int(x) for x in spec]
    try:
        return [int(x) for x in str(spec).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"cannot parse edge list {spec!r}") from None


def _graph(path):
    from .graph_core import is_connected, load_graph
    if path is None:
        raise UsageError("--graph is required")
    g = load_graph(path)
    if not is_connected(g):
        raise MalformedGraph(f"{path}: graph is not connected")
    return g


class RunManifest:
    def __init__(self, command, conf):
        self.command = command
        self.conf = conf
        self.timings = {}
        self._t = time.perf_counter()

    def lap(self, phase):
        now = time.perf_counter()
        self.timings[phase] = round(now - self._t, 6)
        self._t = now

    def write(self, out_dir):
        body = {
            "command": self.command,
            "config_echo": self.conf,
            "seed": self.conf.get("seed"),
            "artifact_version": __version__,
            "backend": kernels.BACKEND,
            "timings": self.timings,
        }
        Path(out_dir, "manifest.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")


def _emit(obj, out=None):
    text = json.dumps(obj, indent=2, default=_jsonable)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, (set, frozenset, tuple)):
        return sorted(x) if isinstance(x, (set, frozenset)) else list(x)
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _outdir(conf):
    if not conf.get("out"):
        raise UsageError("--out is required")
    d = Path(conf["out"])
    d.mkdir(parents=True, exist_ok=True)
    return d


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_opf_solve(conf):
    from .dcopf_solver import make_problem, solve
    from .graph_core import flip_edges, orientation_flips
    from .power_flow import compute_ptdf
    g = _graph(conf["graph"])
    d = _vector(conf["demand"], "demand")
    base = compute_ptdf(g)
    flips = orientation_flips(base.v @ d)
    go = flip_edges(g, flips) if flips else g
    p = compute_ptdf(go)
    sol = solve(make_problem(p, d, conf["lam"]))
    _emit({
        "generation": sol.generation, "active_set": list(sol.active_set),
        "mu": sol.mu, "nu": sol.nu, "delta": sol.delta,
        "kkt_residual": sol.kkt_residual, "pivots": sol.pivots, "flipped_edges": list(flips),
        "backend": kernels.BACKEND,
    })
    return 0


def cmd_cascade(conf):
    from .cascade_engine import run_cascade
    from .dcopf_solver import make_problem, solve
    from .graph_core import flip_edges, orientation_flips
    from .power_flow import compute_ptdf, planning_stage
    g = _graph(conf["graph"])
    d = _vector(conf["demand"], "demand")
    base = compute_ptdf(g)
    flips = orientation_flips(base.v @ d)
    go = flip_edges(g, flips) if flips else g
    p = compute_ptdf(go)
    limits = planning_stage(p, d, conf["lam"], conf["lam_star"])
    sol = solve(make_problem(p, d, conf["lam"]))
    firsts = _ids(conf["first_edge"]) or list(g.edge_ids())
    sink = open(conf["out"], "w") if conf["out"] else sys.stdout
    try:
        for l in firsts:
            trace = run_cascade(go, d, sol.generation, limits, l, conf["rule"])
            rec = {"first_edge": l, "rule": conf["rule"], **trace.to_json()}
            sink.write(json.dumps(rec, default=_jsonable) + "\n")
    finally:
        if sink is not sys.stdout:
            sink.close()
    return 0


def cmd_tie_analyze(conf):
    from .nonuniqueness import analyze, prefix_state
    g = _graph(conf["graph"])
    gamma = _vector(conf["gamma"], "gamma")
    failed = _ids(conf["failed"])
    pair = _ids(conf["pair"])
    if pair and len(pair) != 2:
        raise UsageError("--pair takes exactly two edge ids")
    if not pair:
        state = prefix_state(g, gamma, conf["lam"], failed, conf["epsilon"], conf["lam_star"])
        live = [e for e in state.surviving if np.isfinite(state.psi[e - 1])]
        pair = sorted(sorted(live, key=lambda e: (-state.psi[e - 1], e))[:2])
        if len(pair) < 2:
            raise UsageError("fewer than two edges survive the failure prefix")
    res = analyze(g, gamma, conf["lam"], failed, pair[0], pair[1], conf["epsilon"], conf["lam_star"])
    res["failed"] = failed
    _emit(res)
    return 0


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_tail(conf):
    from .scenarios import monte_carlo_tail
    out = _outdir(conf)
    man = RunManifest("tail", conf)
    g = _graph(conf["graph"])
    man.lap("load")
    est = monte_carlo_tail(g, conf["alpha"], conf["lam"], conf["lam_star"], conf["rule"], int(conf["replicas"]),
                           int(conf["seed"]), conf["hill_k"], conf["threads"], conf["partition_replicas"])
    man.lap("simulate")
    _write_csv(out / "survival.csv", ["x", "p_hat"], [(repr(x), repr(p)) for x, p in est.survival_points])
    rows = est.partition.rows() if est.partition else []
    _write_csv(out / "scenarios.csv", ["i", "l", "z", "I_star", "probability"],
               [(i, l, z, ";".join(map(str, s)), repr(p)) for i, l, z, s, p in rows])
    summary = {
        "hill_alpha": est.hill_alpha, "hill_k": est.hill_k,
        "c_hat_empirical": est.c_hat_empirical, "c_theoretical": est.c_theoretical,
        "sample_count": est.sample_count, "failed_replicas": est.failed_replicas,
        "no_stabilization": est.partition.no_stabilization if est.partition else 0,
        "partition_table": [{"i": i, "l": l, "z": z, "I_star": list(s), "probability": p} for i, l, z, s, p in rows],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    man.lap("write")
    man.write(out)
    return 0


def cmd_conjecture(conf):
    from .scenarios import connected_graphs, tie_break_invariance_experiment
    out = _outdir(conf)
    man = RunManifest("conjecture", conf)
    graphs = connected_graphs(int(conf["max_nodes"]), int(conf["min_nodes"]))
    man.lap("enumerate")
    rep = tie_break_invariance_experiment(graphs, conf["alpha"], conf["lam"], conf["lam_star"], conf["rules"],
                                          int(conf["gammas"]), int(conf["seed"]))
    man.lap("sweep")
    body = {"graphs": len(graphs), **rep.to_json()}
    (out / "report.json").write_text(json.dumps(body, indent=2, sort_keys=True, default=_jsonable) + "\n")
    man.write(out)
    print(f"{rep.stabilized} stabilized instances, {len(rep.counterexamples)} counterexamples, "
          f"{rep.no_stabilization} without stabilization")
    return 0


def repro_report(lam, lam_star, regime, golden):
    """Diff the six-node example against golden data; returns (ok, lines)."""
    from . import reference as R
    from .cascade_engine import run_cascade
    from .nonuniqueness import analyze
    from .power_flow import compute_ptdf
    from .scenarios import operating_point
    lines, ok = [], True

    def check(name, passed, detail=""):
        nonlocal ok
        ok &= bool(passed)
        lines.append(f"{'PASS' if passed else 'FAIL'} {name}{': ' + detail if detail else ''}")

    g = R.graph()
    for failed, want in golden["ptdf"].items():
        got = compute_ptdf(g, [e for e in g.edge_ids() if e not in failed]).v
        err = float(np.abs(got - want).max())
        check(f"ptdf after {list(failed) or 'none'}", err <= 1e-12, f"max diff {err:.2e}")

    op = operating_point(g, np.array(R.GAMMA), R.EPSILON, lam, lam_star)
    trace = run_cascade(op.graph, op.demand, op.solution.generation, op.limits, R.FIRST_EDGE, "break_all")
    order = tuple(tuple(s) for s in trace.failure_order)
    want = golden["order_normal"] if regime == "normal" else golden["order_high_emergency"]
    check("failure order", order[:len(want)] == tuple(map(tuple, want)) and
          (regime == "normal" or len(order) == len(want)), f"got {order}, expected prefix {want}")

    limits = R.limiting_exceedances(lam, lam_star)
    for step, vals in limits.items():
        if step > len(trace.steps):
            check(f"exceedances after step {step}", False, "cascade stopped early")
            continue
        psi = trace.steps[step - 1].psi
        err = max(abs(psi[e - 1] - v) for e, v in vals.items())
        check(f"exceedances after step {step}", err <= 1e-3, f"max diff {err:.2e} (eps = {R.EPSILON})")

    tie = R.tied_exceedance(lam, lam_star)
    if regime == "normal":
        check("tied exceedance above 1", tie > 1, f"{tie:.6f}")
    else:
        check("tied exceedance at most 1", tie <= 1, f"{tie:.6f}")

    tied = golden["tied_edges"]
    prefix = [e for s in R.ORDER_HIGH_EMERGENCY for e in s]
    verdicts = []
    for a in range(len(tied)):
        for b in range(a + 1, len(tied)):
            verdicts.append(analyze(g, np.array(R.GAMMA), lam, prefix, tied[a], tied[b], R.EPSILON, lam_star))
    skew = all(v["skew_symmetric"] for v in verdicts)
    check("skew-symmetry of tied pairs", skew == golden["skew_symmetric"], f"{skew}")
    return ok, lines


def cmd_repro_example(conf):
    from . import reference as R
    lam = conf["lam"]
    lam_star = conf["lam_star"]
    regime = conf["regime"]
    if regime not in ("normal", "high-emergency"):
        raise UsageError("--regime must be normal or high-emergency")
    if regime == "normal" and not lam_star < 1.25 * lam:
        raise UsageError("the normal regime needs lambda* < 5 lambda / 4; use --regime high-emergency")
    if regime == "high-emergency" and lam_star < 1.25 * lam:
        raise UsageError("the high-emergency regime needs lambda* >= 5 lambda / 4")
    golden = R.golden_bundle()
    if conf["golden"]:
        raw = json.loads(Path(conf["golden"]).read_text())
        for key, mats in raw.get("ptdf", {}).items():
            failed = tuple(int(x) for x in key.split(",") if x)
            golden["ptdf"][failed] = np.asarray(mats, dtype=float)
        for key in ("order_normal", "order_high_emergency", "tied_edges", "skew_symmetric"):
            if key in raw:
                golden[key] = raw[key]
    if conf["dump_ptdf"]:
        from .power_flow import compute_ptdf
        g = R.graph()
        for failed in golden["ptdf"]:
            v = compute_ptdf(g, [e for e in g.edge_ids() if e not in failed]).v
            print(f"# V after failing {list(failed)}")
            print(np.array2string(v, precision=6, suppress_small=True, max_line_width=120))
    ok, lines = repro_report(lam, lam_star, regime, golden)
    print("\n".join(lines))
    if regime == "high-emergency":
        print(f"tied edges stay at {R.tied_exceedance(lam, lam_star):.4f} of capacity, so the cascade ends after edge 10")
    return 0 if ok else EXIT_DIFF


COMMANDS = {
    "opf-solve": cmd_opf_solve, "cascade": cmd_cascade, "tie-analyze": cmd_tie_analyze,
    "tail": cmd_tail, "conjecture": cmd_conjecture, "repro-example": cmd_repro_example,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="cascadia", description="Cascading failures in DC power networks with heavy-tailed demand.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="JSON file with settings (flags override it)")
        return s

    def lam_flags(s, star=True):
        s.add_argument("--lambda", dest="lam", type=float, help="planning margin in (0, 1), default 0.5")
        if star:
            s.add_argument("--lambda-star", dest="lam_star", type=float, help="emergency margin, default lambda")

    s = add("opf-solve", "solve the dispatch problem for one demand vector")
    s.add_argument("--graph")
    s.add_argument("--demand", help="JSON file or comma-separated values")
    lam_flags(s, star=False)

    s = add("cascade", "simulate cascades (JSONL, one trace per first edge)")
    s.add_argument("--graph")
    s.add_argument("--demand")
    lam_flags(s)
    s.add_argument("--rule")
    s.add_argument("--first-edge", dest="first_edge", help="edge id(s); default all edges")
    s.add_argument("--out", help="JSONL file (default stdout)")

    s = add("tie-analyze", "tie conditions for a pair of edges after a failure prefix")
    s.add_argument("--graph")
    s.add_argument("--gamma", help="demand profile on nodes 2..n with gamma_1 = 0")
    lam_flags(s)
    s.add_argument("--failed", help="comma-separated failed edges")
    s.add_argument("--pair", help="two edge ids; default the two largest exceedances")
    s.add_argument("--epsilon", type=float)

    for name, help_ in (("tail", "Monte Carlo tail of the failure size"),
                        ("conjecture", "compare end states across tie-break rules on small graphs")):
        s = add(name, help_)
        if name == "tail":
            s.add_argument("--graph")
            s.add_argument("--replicas", type=int)
            s.add_argument("--hill-k", dest="hill_k", type=int)
            s.add_argument("--partition-replicas", dest="partition_replicas", type=int)
        else:
            s.add_argument("--min-nodes", dest="min_nodes", type=int)
            s.add_argument("--max-nodes", dest="max_nodes", type=int)
            s.add_argument("--gammas", type=int, help="demand profiles per graph")
            s.add_argument("--rules", type=lambda x: x.split(","))
        s.add_argument("--alpha", type=float)
        lam_flags(s)
        s.add_argument("--rule")
        s.add_argument("--seed", type=int)
        s.add_argument("--threads", type=int, help="worker threads (fallback: CASCADIA_THREADS)")
        s.add_argument("--out")

    s = add("repro-example", "rerun the six-node example and diff it against golden data")
    lam_flags(s)
    s.add_argument("--regime", choices=("normal", "high-emergency"))
    s.add_argument("--dump-ptdf", dest="dump_ptdf", action="store_true", default=None)
    s.add_argument("--golden", help="JSON overriding embedded golden data")
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required (see --help)")
        flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
        conf = parse_config(args.command, flags, args.config)
        return COMMANDS[args.command](conf)
    except CascadiaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
