"""Command-line entry point.

Exit codes: 0 success, 1 check failure, 2 parse error, 3 validation error.
Machine-readable summaries go to stdout; logs go to stderr at the level named
by ``LAYNET_LOG`` (error, info or debug).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import build_scenario, config_hash, load_raw, override
from .engine import (TRACE_FIELDS, check_invariants, shares_to_csv, simulate, topk_count,
                     trace_to_csv)
from .equilibrium import amortized_ln_fee, cost_curves, crossover_demand, curves_to_csv
from .errors import ConfigError, ConfigParseError, NotEstimable, OracleLimitExceeded
from .metrics import degree_tail_slope
from .oracle_suite import (ORACLE_NODE_CAP, InstanceDump, oracle_best_path, oracle_monopoly_fee,
                      oracle_success_analytic, oracle_success_mc, rebalance_instance,
                      routing_instance)
from .overlay import graph_to_csv

EXIT_OK, EXIT_CHECK, EXIT_PARSE, EXIT_INVALID = 0, 1, 2, 3
SCHEMA_VERSION = 1
SWEEP_HEADER = ["value", "seeds", "demand", "cost_btc", "cost_ln", "ln_mean_fee", "failure_rate",
                "topk_liquidity_share"]
REBALANCE_NODE_CAP = 6

log = logging.getLogger("laynet")


def write_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _load(path):
    """(config text, raw sections) or an exit code."""
    try:
        return load_raw(path)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


def _build(raw):
    try:
        return build_scenario(raw)
    except ConfigParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        print(f"error: invalid config{key}: {exc}", file=sys.stderr)
        return EXIT_INVALID


def _tail_summary(graph) -> dict:
    degrees = [graph.degree(n) for n in graph.nodes if graph.degree(n) > 0]
    try:
        fit = degree_tail_slope(degrees)
    except NotEstimable as exc:
        return {"estimable": False, "reason": str(exc)}
    return {"estimable": True, "slope": fit.slope, "residual": fit.residual, "points": fit.points}


def _manifest(cmd, config_path, out_dir, seeds, text, files, **extra) -> dict:
    m = {"command": cmd, "config_path": str(config_path), "output_dir": str(out_dir),
         "seeds": list(seeds), "tool_version": __version__, "schema_version": SCHEMA_VERSION,
         "config_sha256": config_hash(text), "rng": "philox", "files": files}
    m.update(extra)
    return m


def cmd_run(config_path, out_dir) -> int:
    loaded = _load(config_path)
    if isinstance(loaded, int):
        return loaded
    text, raw = loaded
    sc = _build(raw)
    if isinstance(sc, int):
        return sc
    res = simulate(sc.sim)
    problems = check_invariants(res)
    out = Path(out_dir)
    write_atomic(out / "trace.csv", trace_to_csv(res.frames))
    write_atomic(out / "shares.csv", shares_to_csv(res.shares))
    write_atomic(out / "final_graph.csv", graph_to_csv(res.graph))
    files = ["trace.csv", "shares.csv", "final_graph.csv"]
    write_atomic(out / "manifest.json", _json(_manifest(
        "run", config_path, out_dir, [sc.sim.seed], text, files,
        degree_tail=_tail_summary(res.graph), invariant_violations=problems)))
    for p in problems:
        log.error("invariant violated: %s", p)
    print(json.dumps({"status": "ok" if not problems else "invariant_violation",
                      "epochs": len(res.frames), "out": str(out_dir)}))
    return EXIT_CHECK if problems else EXIT_OK


def _sweep_job(args):
    raw, param, value, seed = args
    sub = override(override(raw, param, value), "run.seed", str(seed))
    sc = build_scenario(sub)
    res = simulate(sc.sim)
    return trace_to_csv(res.frames), res.frames, check_invariants(res)


def _nanmean(vals) -> float:
    vals = [v for v in vals if not math.isnan(v)]
    return math.fsum(vals) / len(vals) if vals else math.nan


def cmd_sweep(config_path, param, values, seeds, out_dir, jobs=1) -> int:
    loaded = _load(config_path)
    if isinstance(loaded, int):
        return loaded
    text, raw = loaded
    sc = _build(raw)
    if isinstance(sc, int):
        return sc
    vals = [v.strip() for v in (values or "").split(",") if v.strip()]
    if not vals:
        print("error: empty value list", file=sys.stderr)
        return EXIT_INVALID
    if seeds < 1:
        print("error: need at least one seed", file=sys.stderr)
        return EXIT_INVALID
    seed_list = [sc.sim.seed + i for i in range(seeds)]
    try:
        for v in vals:
            build_scenario(override(raw, param, v))
    except ConfigParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigError as exc:
        print(f"error: invalid sweep{' [' + exc.key + ']' if exc.key else ''}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    tasks = [(raw, param, v, s) for v in vals for s in seed_list]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_job, tasks))
    else:
        results = [_sweep_job(t) for t in tasks]
    out = Path(out_dir)
    files, problems = [], []
    rows = []
    for i, v in enumerate(vals):
        chunk = results[i * len(seed_list):(i + 1) * len(seed_list)]
        frames = []
        for s, (trace, fr, probs) in zip(seed_list, chunk):
            rel = f"{param}={v}/seed_{s}/trace.csv"
            write_atomic(out / rel, trace)
            files.append(rel)
            frames.extend(fr)
            problems.extend(f"{rel}: {p}" for p in probs)
        sub = build_scenario(override(raw, param, v)).sim
        attempts = sum(f.ln_attempts for f in frames)
        failures = sum(f.ln_route_failures for f in frames)
        finals = [c[1][-1].topk_liquidity_share for c in chunk]
        rows.append([v, len(seed_list), _nanmean([f.demand for f in frames]),
                     _nanmean([f.onchain_fee for f in frames]), amortized_ln_fee(sub.ln_fee),
                     _nanmean([f.ln_mean_fee for f in frames]),
                     failures / attempts if attempts else math.nan, _nanmean(finals)])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        w.writerow([r[0], r[1]] + [repr(float(x)) for x in r[2:]])
    write_atomic(out / "curves.csv", buf.getvalue())
    files.append("curves.csv")
    write_atomic(out / "manifest.json", _json(_manifest(
        "sweep", config_path, out_dir, seed_list, text, files, param=param, values=vals,
        invariant_violations=problems)))
    print(json.dumps({"status": "ok" if not problems else "invariant_violation",
                      "runs": len(tasks), "out": str(out_dir)}))
    return EXIT_CHECK if problems else EXIT_OK


def _routing_mismatch(dump: InstanceDump):
    from .routing import best_path, path_cost

    g = dump.graph()
    p = dump.params
    src, dst = int(p["src"]), int(p["dst"])
    amount, margin = float(p["amount"]), float(p["margin"])
    ref = oracle_best_path(g, src, dst, amount, margin)
    got = best_path(g, src, dst, amount, margin)
    if ref is None and got is None:
        return None
    if ref is None or got is None:
        return f"oracle={ref} best_path={None if got is None else got.nodes}"
    if got.nodes != ref[2] or path_cost(g, got, amount) != ref[0]:
        return f"oracle={ref} best_path=({path_cost(g, got, amount)}, {len(got)}, {got.nodes})"
    return None


def _rebalance_mismatch(dump: InstanceDump):
    from .rebalance import RebalanceProblem, balanced_target, exact_rebalance, greedy_rebalance

    g = dump.graph()
    prob = RebalanceProblem(g, balanced_target(g), float(dump.params["quantum"]))
    exact, greedy = exact_rebalance(prob), greedy_rebalance(prob)
    if exact.deviation > greedy.deviation + 1e-9:
        return f"exact deviation {exact.deviation} > greedy deviation {greedy.deviation}"
    return None


def cmd_oracle_check(instances=200, max_nodes=8) -> int:
    if max_nodes > ORACLE_NODE_CAP or max_nodes < 2:
        print(f"error: max_nodes must lie in [2, {ORACLE_NODE_CAP}]", file=sys.stderr)
        return EXIT_INVALID
    if instances < 1:
        print("error: need at least one instance", file=sys.stderr)
        return EXIT_INVALID
    reb_nodes = min(max_nodes, REBALANCE_NODE_CAP)
    for seed in range(instances):
        for dump, check in ((routing_instance(seed, max_nodes), _routing_mismatch),
                            (rebalance_instance(seed, reb_nodes), _rebalance_mismatch)):
            try:
                problem = check(dump)
            except OracleLimitExceeded as exc:
                problem = f"solver refused the instance: {exc}"
            if problem:
                print(json.dumps({"status": "mismatch", "seed": seed,
                                  "kind": dump.params["kind"], "detail": problem}))
                print(dump.to_text(), end="")
                return EXIT_CHECK
    print(json.dumps({"status": "ok", "instances": instances, "max_nodes": max_nodes}))
    return EXIT_OK


def cmd_curves(config_path, out_dir) -> int:
    loaded = _load(config_path)
    if isinstance(loaded, int):
        return loaded
    text, raw = loaded
    sc = _build(raw)
    if isinstance(sc, int):
        return sc
    c = sc.curves
    grid = np.linspace(c.d_min, c.d_max, c.points)
    rows = cost_curves(sc.sim.base, sc.sim.ln_fee, grid)
    d_star = crossover_demand(sc.sim.base, amortized_ln_fee(sc.sim.ln_fee), c.d_max)
    out = Path(out_dir)
    write_atomic(out / "curves.csv", curves_to_csv(rows))
    write_atomic(out / "manifest.json", _json(_manifest(
        "curves", config_path, out_dir, [sc.sim.seed], text, ["curves.csv"],
        crossover_demand=d_star)))
    print(json.dumps({"status": "ok", "rows": len(rows), "crossover_demand": d_star}))
    return EXIT_OK


def derived_values() -> dict:
    """Oracle-generated numbers that the tests freeze."""
    from .agents import HubPolicy, PricingMode

    def mono(c1, eta, lo, hi, points):
        pol = HubPolicy(PricingMode.MONOPOLY, reserve_marginal=c1, demand_elasticity=eta,
                        fee_floor=lo, fee_cap=hi)
        return oracle_monopoly_fee(pol, np.linspace(lo, hi, points))

    mc = oracle_success_mc([1.0, 1.0], 1.0, 100_000, seed=0)
    return {
        "monopoly_fee_c1_1_eta_2": mono(1.0, 2.0, 1.01, 10.0, 100_001),
        "monopoly_fee_c1_0.5_eta_3": mono(0.5, 3.0, 0.51, 10.0, 100_001),
        "monopoly_fee_c1_0.5_eta_2": mono(0.5, 2.0, 0.51, 10.0, 100_001),
        "success_two_unit_hops": oracle_success_analytic([1.0, 1.0], 1.0),
        "mc_two_unit_hops_seed0": [mc.rate, mc.low, mc.high],
    }


def _gap_fixture(limit: int = 1000):
    from .rebalance import RebalanceProblem, balanced_target, exact_rebalance, greedy_rebalance

    for seed in range(limit):
        dump = rebalance_instance(seed, nodes=6)
        g = dump.graph()
        prob = RebalanceProblem(g, balanced_target(g), 1.0)
        e, gr = exact_rebalance(prob), greedy_rebalance(prob)
        if gr.deviation > e.deviation + 1e-9:
            dump.params.update({"exact_deviation": repr(e.deviation),
                                "greedy_deviation": repr(gr.deviation)})
            return dump
    return None


def cmd_regen_fixtures(out_dir) -> int:
    out = Path(out_dir)
    dump = _gap_fixture()
    if dump is None:
        print("error: no greedy gap found", file=sys.stderr)
        return EXIT_CHECK
    write_atomic(out / "rebalance_gap.csv", dump.to_text())
    write_atomic(out / "derived.json", _json(derived_values()))
    print(json.dumps({"status": "ok", "gap_seed": int(dump.params["seed"])}))
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="laynet", description="Dual-layer payment network simulator")
    ap.add_argument("--version", action="version", version=f"laynet {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("config")
    p.add_argument("out")
    p = sub.add_parser("sweep", help="simulate a parameter sweep over several seeds")
    p.add_argument("config")
    p.add_argument("--param", required=True, help="section.key to vary")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("out")
    p = sub.add_parser("oracle-check", help="compare solvers against brute-force oracles")
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--max-nodes", type=int, default=8)
    p = sub.add_parser("curves", help="write analytic cost curves")
    p.add_argument("config")
    p.add_argument("out")
    p = sub.add_parser("regen-fixtures", help="regenerate oracle-derived test fixtures")
    p.add_argument("out", nargs="?", default="tests/fixtures")
    return ap


def main(argv=None) -> int:
    level = os.environ.get("LAYNET_LOG", "error").upper()
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    if args.cmd == "run":
        return cmd_run(args.config, args.out)
    if args.cmd == "sweep":
        return cmd_sweep(args.config, args.param, args.values, args.seeds, args.out, args.jobs)
    if args.cmd == "oracle-check":
        return cmd_oracle_check(args.instances, args.max_nodes)
    if args.cmd == "curves":
        return cmd_curves(args.config, args.out)
    return cmd_regen_fixtures(args.out)


if __name__ == "__main__":
    sys.exit(main())
