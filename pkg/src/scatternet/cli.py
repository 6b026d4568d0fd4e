"""Command-line entry point.

Exit codes: 0 success, 2 infeasible, 3 timeout with an incumbent, 4 bad
configuration or input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import exact
from .heuristic import build_hierarchy
from .interference import FerCurve, FerRangeError
from .metrics import effective_throughput, efficiency, energy_direct, metrics_csv, throughput, total_energy
from .model import (
    Hierarchy,
    ParameterError,
    StructuralError,
    dump_topology,
    load_topology,
    validate_hierarchy,
)
from .scenario import ConfigError, ScenarioConfig, emit_report, load_config, parse_overrides, run_scenario
from .schedule import total_delay_bilevel

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_TIMEOUT = 3
EXIT_CONFIG = 4


def _config(args) -> ScenarioConfig:
    sets = list(args.set or [])
    if args.seed is not None:
        sets.append(f"seed={args.seed}")
    if args.out is not None:
        sets.append(f"out={args.out}")
    if args.format is not None:
        sets.append(f"format={args.format}")
    if args.config:
        return load_config(args.config, sets)
    return parse_overrides(sets)


def _emit(args, cfg: ScenarioConfig, name: str, payload: dict, csv_text: str | None = None) -> None:
    """Write to ``--out`` when given, else print to stdout."""
    if cfg.format == "json" or csv_text is None:
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
        name = f"{name}.json"
    else:
        text = csv_text
        name = f"{name}.csv"
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {out / name}: {exc}") from exc
    print(out / name)


def _topology(args, cfg: ScenarioConfig):
    if getattr(args, "topo", None):
        try:
            return load_topology(args.topo, (cfg.area_width, cfg.area_height), cfg.seed)
        except (OSError, KeyError) as exc:
            raise ConfigError(f"cannot read topology {args.topo}: {exc}") from exc
    return cfg.topology(args.n, cfg.seed)


def _hierarchy_csv(h: Hierarchy, orphans=()) -> str:
    lines = ["node,role,l1_master,l2_master"]
    for i in h.nodes:
        m = h.l1_master_of[i]
        lines.append(f"{i},{h.role(i).value},{m},{h.l2_master_of.get(m, '')}")
    for i in sorted(orphans):
        lines.append(f"{i},orphan,,")
    return "\n".join(lines) + "\n"


# ---- verbs ------------------------------------------------------------------

def cmd_topo_gen(args, cfg) -> int:
    topo = cfg.topology(args.n, cfg.seed)
    text = dump_topology(topo)
    payload = {"area": list(topo.area), "seed": cfg.seed, "nodes": [_node_dict(n) for n in topo.nodes]}
    _emit(args, cfg, "topology", payload, text)
    return EXIT_OK


def _node_dict(node) -> dict:
    return {"id": node.id, "x": node.x, "y": node.y, "battery": node.battery, "has_wifi": node.has_wifi}


def cmd_cluster_heur(args, cfg) -> int:
    topo = _topology(args, cfg)
    p = cfg.model_params()
    h, orphans, trace = build_hierarchy(topo, p, args.force_promote or cfg.force_promote)
    if args.trace:
        json.dump([r.to_dict() for r in trace], sys.stderr, indent=1)
        sys.stderr.write("\n")
    report = validate_hierarchy(topo, h, p, skip=orphans)
    payload = {**h.to_dict(), "orphans": sorted(orphans), "feasible": report.feasible, "m1": h.m1, "m2": h.m2}
    _emit(args, cfg, "hierarchy", payload, _hierarchy_csv(h, orphans))
    return EXIT_OK


def cmd_cluster_exact(args, cfg) -> int:
    topo = _topology(args, cfg)
    p = cfg.model_params()
    budget = cfg.exact_budget_s if args.budget is None else args.budget
    backend = args.backend or cfg.exact_backend
    if backend not in exact.BACKENDS:
        raise ConfigError(f"unknown backend {backend!r}")
    solve = exact.solve_single_level if args.level == "single" else exact.solve_bilevel
    sol = solve(topo, p, budget, backend)
    if args.trace:
        print(f"status={sol.status} explored={sol.nodes_explored} gap={sol.gap:.4f}", file=sys.stderr)
    payload = sol.to_dict()
    payload.pop("elapsed")
    csv_text = _hierarchy_csv(sol.hierarchy) if sol.hierarchy is not None else "node,role,l1_master,l2_master\n"
    _emit(args, cfg, "hierarchy", payload, csv_text)
    if sol.status == exact.INFEASIBLE:
        return EXIT_INFEASIBLE
    if sol.status == exact.TIMEOUT:
        return EXIT_TIMEOUT if sol.hierarchy is not None else EXIT_INFEASIBLE
    return EXIT_OK


def _load_hierarchy(path: str) -> Hierarchy:
    try:
        return Hierarchy.from_dict(json.loads(Path(path).read_text()))
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read hierarchy {path}: {exc}") from exc


def cmd_delay(args, cfg) -> int:
    if args.hierarchy:
        h = _load_hierarchy(args.hierarchy)
    else:
        h, _, _ = build_hierarchy(_topology(args, cfg), cfg.model_params(), cfg.force_promote)
    rep = total_delay_bilevel(h, args.cycle_us)
    d = rep.to_dict()
    rows = ["level,head,tts_us"]
    rows += [f"1,{k},{v}" for k, v in sorted(rep.per_l1_tts.items())]
    rows += [f"2,{k},{v}" for k, v in sorted(rep.per_l2_tts.items())]
    rows += [f"1,max,{rep.d1_max}", f"2,max,{rep.td2}"]
    _emit(args, cfg, "delay", d, "\n".join(rows) + "\n")
    return EXIT_OK


def cmd_fer(args, cfg) -> int:
    mode = args.mode or cfg.fer_mode
    if mode == "reference":
        curve = FerCurve.reference()
    elif mode == "analytic":
        curve = FerCurve.analytic(cfg.p_values, cfg.fer_duty, cfg.fer_channels, cfg.fer_members)
    else:
        curve = FerCurve.monte_carlo(cfg.p_values, cfg.fer_config())
    payload = {
        "mode": curve.mode,
        "points": {
            str(P): {"fer_master": e.fer_master, "fer_slave": e.fer_slave, "ci95": e.ci95_halfwidth}
            for P, e in sorted(curve.points.items())
        },
    }
    _emit(args, cfg, "fer", payload, curve.to_csv())
    return EXIT_OK


def cmd_metrics(args, cfg) -> int:
    if cfg.fer_mode == "reference":
        fer_of = FerCurve.reference()
    else:
        fer_of = FerCurve.analytic(range(1, max(cfg.n_values) + 2), cfg.fer_duty, cfg.fer_channels, cfg.fer_members)
    ep, tp = cfg.energy_params(), cfg.traffic_params()
    rows = []
    for n in cfg.n_values:
        topo = cfg.topology(n, cfg.seed)
        h, orphans, _ = build_hierarchy(topo, cfg.model_params(), cfg.force_promote)
        te_d = energy_direct(n, ep)
        g_d = throughput(n, tp)
        rows.append({"n": n, "approach": "direct", "te_joules": te_d, "g_bits": g_d, "ef": _ef(g_d, te_d)})
        for approach, hh, mode in (
            ("one_level", Hierarchy.single_level(h.l1_master_of), "single_level"),
            ("two_level", h, "bilevel"),
        ):
            te = total_energy(hh, ep, orphans)
            g = effective_throughput(hh, tp, fer_of, mode)
            rows.append({"n": n, "approach": approach, "te_joules": te, "g_bits": g, "ef": _ef(g, te)})
    _emit(args, cfg, "metrics", {"rows": rows}, metrics_csv(rows))
    return EXIT_OK


def _ef(g, te) -> float:
    return efficiency(g, te) if te > 0 else float("nan")


def cmd_scenario_run(args, cfg) -> int:
    report = run_scenario(cfg)
    for path in emit_report(report, cfg.out, cfg.format):
        print(path)
    timeouts = [r for r in report.records if r.status == exact.TIMEOUT]
    if args.trace and timeouts:
        print(f"{len(timeouts)} exact run(s) hit the time budget", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args, cfg) -> int:
    from dataclasses import replace

    return cmd_scenario_run(args, replace(cfg, scenario="runtime_bench", timings=True))


# ---- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="base seed")
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--out", help="output directory (default: stdout for single-shot verbs)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--trace", action="store_true", help="diagnostics on stderr")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")

    ap = argparse.ArgumentParser(prog="scatternet", parents=[common], description=__doc__.splitlines()[0])
    ap.add_argument("--print-config", action="store_true", help="print the effective config and exit")
    sub = ap.add_subparsers(dest="verb")

    def source(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--topo", help="topology CSV")
        g.add_argument("--n", type=int, default=20, help="generate a topology with this many nodes")

    topo = sub.add_parser("topo", help="topology tools").add_subparsers(dest="action", required=True)
    p = topo.add_parser("gen", parents=[common], help="generate a seeded topology")
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_topo_gen)

    cl = sub.add_parser("cluster", help="build a hierarchy").add_subparsers(dest="action", required=True)
    p = cl.add_parser("heur", parents=[common], help="greedy battery-first clustering")
    source(p)
    p.add_argument("--force-promote", action="store_true", help="let stranded Wi-Fi nodes become masters")
    p.set_defaults(func=cmd_cluster_heur)
    p = cl.add_parser("exact", parents=[common], help="optimal clustering")
    source(p)
    p.add_argument("--level", choices=("single", "bilevel"), default="bilevel")
    p.add_argument("--budget", type=float, help="time budget in seconds")
    p.add_argument("--backend", choices=sorted(exact.BACKENDS))
    p.set_defaults(func=cmd_cluster_exact)

    p = sub.add_parser("delay", parents=[common], help="collection delay of a hierarchy")
    source(p)
    p.add_argument("--hierarchy", help="hierarchy JSON from `cluster ... --format json`")
    p.add_argument("--cycle-us", type=int, default=1250)
    p.set_defaults(func=cmd_delay)

    p = sub.add_parser("fer", parents=[common], help="frame error rate versus piconet count")
    p.add_argument("--mode", choices=("analytic", "reference", "monte_carlo"))
    p.set_defaults(func=cmd_fer)

    p = sub.add_parser("metrics", parents=[common], help="energy, throughput and efficiency per approach")
    p.set_defaults(func=cmd_metrics)

    sc = sub.add_parser("scenario", help="experiment runner").add_subparsers(dest="action", required=True)
    p = sc.add_parser("run", parents=[common], help="run the configured scenario")
    p.set_defaults(func=cmd_scenario_run)

    p = sub.add_parser("bench", parents=[common], help="heuristic vs exact runtime")
    p.set_defaults(func=cmd_bench)
    return ap


def _merge_globals(args, argv) -> None:
    # Flags given before the verb land in the same namespace but may be
    # clobbered by the subparser's defaults; reparse them from argv.
    pre = build_parser()
    known, _ = argparse.ArgumentParser(add_help=False, parents=[_globals_only()]).parse_known_args(
        argv[: _verb_index(argv, pre)]
    )
    for k in ("seed", "config", "out", "format"):
        if getattr(args, k, None) is None and getattr(known, k) is not None:
            setattr(args, k, getattr(known, k))
    args.trace = bool(getattr(args, "trace", False) or known.trace)
    args.set = (known.set or []) + (getattr(args, "set", None) or [])


def _globals_only() -> argparse.ArgumentParser:
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int)
    g.add_argument("--config")
    g.add_argument("--out")
    g.add_argument("--format", choices=("csv", "json"))
    g.add_argument("--trace", action="store_true")
    g.add_argument("--set", action="append")
    return g


VERBS = ("topo", "cluster", "delay", "fer", "metrics", "scenario", "bench")


def _verb_index(argv, _parser) -> int:
    for i, tok in enumerate(argv):
        if tok in VERBS:
            return i
    return len(argv)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    _merge_globals(args, argv)
    try:
        cfg = _config(args)
        if args.print_config:
            sys.stdout.write(cfg.to_text())
            return EXIT_OK
        if not hasattr(args, "func"):
            parser.print_help()
            return EXIT_CONFIG
        return args.func(args, cfg)
    except (ConfigError, ParameterError, StructuralError, FerRangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
