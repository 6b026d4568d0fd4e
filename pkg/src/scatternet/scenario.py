"""Scenario runner: paired experiments over seeded topologies, CSV/JSON output.

Every (n, seed) cell generates one topology that all compared methods share.
Wall-clock times are written only when ``timings`` is on (``timings.csv`` and
the ``seconds`` column of the runtime table); all other output is a pure
function of the configuration.
"""

from __future__ import annotations

import ast
import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np
from scipy import stats

from . import exact
from .heuristic import build_hierarchy
from .interference import DEFAULT_DUTY, FerConfig, FerCurve, FerRangeError, WifiInterferer
from .metrics import (
    EnergyParams,
    TrafficParams,
    effective_throughput,
    efficiency,
    energy_direct,
    throughput,
    total_energy,
)
from .model import Hierarchy, ModelParams, Topology, generate_topology, price_hierarchy
from .schedule import total_delay_bilevel

SCENARIOS = ("s1_single_level", "s2_bilevel", "s3_size_sweep", "compare_methods", "fer_curve", "runtime_bench")


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    scenario: str = "compare_methods"
    n_values: list = field(default_factory=lambda: list(range(100, 801, 100)))
    repeats: int = 10
    seed: int = 0
    seeds: list = field(default_factory=list)
    # topology
    area_width: float = 10.0
    area_height: float = 10.0
    wifi_prob: float = 1.0
    battery_law: str = "uniform:0:1"
    # clustering model
    max_cluster_size_l1: int = 8
    max_cluster_size_l2: int = 8
    bt_range_m: float = 10.0
    fixed_cost: float = 100.0
    battery_threshold: float = 0.5
    sweep_sizes: list = field(default_factory=lambda: list(range(1, 9)))
    force_promote: bool = False
    exact_budget_s: float = exact.DEFAULT_BUDGET_S
    exact_backend: str = "search"
    # energy and traffic
    e_wifi_report: float = EnergyParams.e_wifi_report
    e_bt_member: float = EnergyParams.e_bt_member
    e_bt_head_per_member: float = EnergyParams.e_bt_head_per_member
    e_idle: float = EnergyParams.e_idle
    frame_len: int = 20
    frame_rate: float = 1.0
    data_rate_kbps: float = 1000.0
    # interference
    fer_mode: str = "analytic"
    p_values: list = field(default_factory=lambda: list(range(1, 9)))
    fer_channels: int = 79
    fer_duty: float = DEFAULT_DUTY
    fer_members: int = 7
    fer_runs: int = 20
    fer_slots: int = 20000
    fer_radius: float = 10.0
    wifi_interferer: bool = False
    wifi_center: int = 39
    wifi_duty: float = 0.5
    # output
    out: str = "out"
    format: str = "csv"
    timings: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if not self.n_values:
            raise ConfigError("n_values must be non-empty")
        if self.fer_mode not in ("analytic", "reference", "monte_carlo"):
            raise ConfigError(f"unknown fer_mode {self.fer_mode!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.exact_backend not in exact.BACKENDS:
            raise ConfigError(f"unknown exact_backend {self.exact_backend!r}")

    @property
    def seed_list(self) -> list[int]:
        return list(self.seeds) if self.seeds else [self.seed + r for r in range(self.repeats)]

    def model_params(self, **over) -> ModelParams:
        kw = dict(
            max_cluster_size_l1=self.max_cluster_size_l1,
            max_cluster_size_l2=self.max_cluster_size_l2,
            bt_range_m=self.bt_range_m,
            fixed_cost=self.fixed_cost,
            battery_threshold=self.battery_threshold,
        )
        kw.update(over)
        return ModelParams(**kw)

    def energy_params(self) -> EnergyParams:
        return EnergyParams(self.e_wifi_report, self.e_bt_member, self.e_bt_head_per_member, self.e_idle)

    def traffic_params(self) -> TrafficParams:
        return TrafficParams(self.frame_len, self.frame_rate, self.data_rate_kbps)

    def fer_config(self, piconets: int = 1) -> FerConfig:
        wifi = WifiInterferer(self.wifi_center, duty=self.wifi_duty) if self.wifi_interferer else None
        return FerConfig(
            piconets=piconets,
            channels=self.fer_channels,
            slots_per_run=self.fer_slots,
            runs=self.fer_runs,
            duty=self.fer_duty,
            members=self.fer_members,
            wifi=wifi,
            radius=self.fer_radius,
            seed=self.seed,
        )

    def topology(self, n: int, seed: int) -> Topology:
        return generate_topology(n, (self.area_width, self.area_height), self.wifi_prob, self.battery_law, seed)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def _coerce(name: str, raw: str, default: Any) -> Any:
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, list):
            if not raw:
                return []
            out = []
            for part in raw.split(","):
                part = part.strip()
                if ":" in part:  # start:stop:step, stop inclusive
                    a, b, *c = (int(x) for x in part.split(":"))
                    out.extend(range(a, b + 1, c[0] if c else 1))
                else:
                    out.append(ast.literal_eval(part))
            return out
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except (ValueError, SyntaxError) as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def parse_overrides(pairs: list[str], base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Apply ``key = value`` strings on top of ``base`` (or the defaults)."""
    base = base or ScenarioConfig()
    defaults = {f.name: getattr(base, f.name) for f in fields(ScenarioConfig)}
    changes = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"expected key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        key = key.strip().replace("-", "_")
        if key not in defaults:
            raise ConfigError(f"unknown config key {key!r}")
        changes[key] = _coerce(key, raw, defaults[key])
    return replace(base, **changes)


def load_config(path: str | Path, overrides: list[str] = ()) -> ScenarioConfig:
    lines = []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for ln in text.splitlines():
        ln = ln.split("#", 1)[0].strip()
        if ln:
            lines.append(ln)
    return parse_overrides([*lines, *overrides])


@dataclass
class Record:
    scenario: str
    n: int
    seed: int
    method: str
    cap_l2: int = 8
    status: str = "ok"
    m1: int | None = None
    m2: int | None = None
    orphans: int = 0
    objective: float | None = None
    td2_us: int | None = None
    te: float | None = None
    g: float | None = None
    ef: float | None = None
    seconds: float | None = field(default=None, compare=False)

    @property
    def key(self) -> tuple:
        return (self.scenario, self.n, self.seed, self.method, self.cap_l2)


NUMERIC = ("m1", "m2", "orphans", "objective", "td2_us", "te", "g", "ef")


@dataclass
class ScenarioReport:
    config: dict
    records: list[Record] = field(default_factory=list)
    curve: dict = field(default_factory=dict)

    def aggregates(self) -> list[dict]:
        groups: dict[tuple, list[Record]] = {}
        for r in self.records:
            groups.setdefault((r.scenario, r.n, r.method, r.cap_l2), []).append(r)
        out = []
        for (sc, n, method, cap), recs in sorted(groups.items()):
            row = {"scenario": sc, "n": n, "method": method, "cap_l2": cap, "runs": len(recs)}
            for name in NUMERIC:
                vals = [getattr(r, name) for r in recs if getattr(r, name) is not None]
                row[f"{name}_mean"], row[f"{name}_ci95"] = _mean_ci(vals)
            out.append(row)
        return out

    def mean(self, n: int, method: str, name: str, cap_l2: int | None = None) -> float | None:
        vals = [
            getattr(r, name)
            for r in self.records
            if r.n == n and r.method == method and (cap_l2 is None or r.cap_l2 == cap_l2) and getattr(r, name) is not None
        ]
        return float(np.mean(vals)) if vals else None


def _mean_ci(vals: list[float]) -> tuple[float | None, float | None]:
    if not vals:
        return None, None
    mean = float(np.mean(vals))
    if len(vals) < 2:
        return mean, None
    half = float(stats.t.ppf(0.975, len(vals) - 1) * np.std(vals, ddof=1) / math.sqrt(len(vals)))
    return mean, half


def _fer_curve(cfg: ScenarioConfig) -> FerCurve:
    if cfg.fer_mode == "reference":
        return FerCurve.reference()
    if cfg.fer_mode == "monte_carlo":
        return FerCurve.monte_carlo(cfg.p_values, cfg.fer_config())
    return _LazyAnalytic(cfg)


class _LazyAnalytic(FerCurve):
    """Analytic curve evaluated at whatever cluster count is asked for."""

    def __init__(self, cfg: ScenarioConfig):
        super().__init__({}, "analytic")
        self._cfg = cfg

    def __call__(self, P: int) -> float:
        if P not in self.points:
            c = self._cfg
            self.points.update(FerCurve.analytic([P], c.fer_duty, c.fer_channels, c.fer_members).points)
        return super().__call__(P)


def _evaluate(rec: Record, topo: Topology, h: Hierarchy | None, orphans, cfg, fer_of, single: bool) -> Record:
    if h is None:
        return rec
    p = cfg.model_params(max_cluster_size_l2=rec.cap_l2)
    rec.m1, rec.m2 = h.m1, h.m2
    rec.orphans = len(orphans)
    if rec.objective is None:
        l1, l2 = price_hierarchy(topo, h, p)
        rec.objective = l1 if single else l1 + l2
    rec.td2_us = total_delay_bilevel(h).td2
    rec.te = total_energy(h, cfg.energy_params(), orphans)
    try:
        rec.g = effective_throughput(h, cfg.traffic_params(), fer_of, "single_level" if single else "bilevel")
    except FerRangeError:
        rec.g = None
    if rec.g is not None and rec.te > 0:
        rec.ef = efficiency(rec.g, rec.te)
    return rec


def _heuristic(cfg, topo, n, seed, fer_of, scenario, single=False) -> Record:
    t0 = time.perf_counter()
    h, orphans, _ = build_hierarchy(topo, cfg.model_params(), cfg.force_promote)
    secs = time.perf_counter() - t0
    if single:
        h = Hierarchy.single_level(h.l1_master_of)
    rec = Record(scenario, n, seed, "heuristic_single" if single else "heuristic", cfg.max_cluster_size_l2, "ok", seconds=secs)
    return _evaluate(rec, topo, h, orphans, cfg, fer_of, single)


def _exact(cfg, topo, n, seed, fer_of, scenario, single=False, cap_l2=None) -> Record:
    cap = cfg.max_cluster_size_l2 if cap_l2 is None else cap_l2
    p = cfg.model_params(max_cluster_size_l2=cap)
    solve = exact.solve_single_level if single else exact.solve_bilevel
    sol = solve(topo, p, cfg.exact_budget_s, cfg.exact_backend)
    rec = Record(scenario, n, seed, "exact_single" if single else "exact", cap, sol.status, seconds=sol.elapsed)
    if sol.hierarchy is not None:
        rec.objective = sol.objective
    return _evaluate(rec, topo, sol.hierarchy, (), cfg, fer_of, single)


def _direct(cfg, n, seed, scenario) -> Record:
    te = energy_direct(n, cfg.energy_params())
    g = throughput(n, cfg.traffic_params(), 0.0)
    return Record(
        scenario, n, seed, "direct", cfg.max_cluster_size_l2, "ok",
        m1=n, m2=n, te=te, g=g, ef=efficiency(g, te) if te > 0 else None, seconds=0.0,
    )


def run_scenario(cfg: ScenarioConfig) -> ScenarioReport:
    cfg.validate()
    # where the files go is not part of the experiment
    report = ScenarioReport(config={k: v for k, v in asdict(cfg).items() if k != "out"})
    sc = cfg.scenario
    if sc == "fer_curve":
        curve = FerCurve.monte_carlo(cfg.p_values, cfg.fer_config())
        report.curve = {
            str(P): {"fer_master": e.fer_master, "fer_slave": e.fer_slave, "ci95": None if math.isnan(e.ci95_halfwidth) else e.ci95_halfwidth, "runs": e.runs}
            for P, e in sorted(curve.points.items())
        }
        return report

    fer_of = _fer_curve(cfg)
    for n in cfg.n_values:
        for seed in cfg.seed_list:
            topo = cfg.topology(n, seed)
            if n == 0:
                report.records.append(Record(sc, 0, seed, "empty", cfg.max_cluster_size_l2, "ok", 0, 0, 0, 0.0, 0, 0.0, 0.0, None, 0.0))
                continue
            if sc == "s1_single_level":
                report.records.append(_exact(cfg, topo, n, seed, fer_of, sc, single=True))
            elif sc == "s2_bilevel":
                report.records.append(_exact(cfg, topo, n, seed, fer_of, sc))
            elif sc == "s3_size_sweep":
                for cap in cfg.sweep_sizes:
                    report.records.append(_exact(cfg, topo, n, seed, fer_of, sc, cap_l2=cap))
            elif sc == "compare_methods":
                report.records.append(_heuristic(cfg, topo, n, seed, fer_of, sc))
                report.records.append(_heuristic(cfg, topo, n, seed, fer_of, sc, single=True))
                report.records.append(_exact(cfg, topo, n, seed, fer_of, sc))
                report.records.append(_direct(cfg, n, seed, sc))
            elif sc == "runtime_bench":
                report.records.append(_heuristic(cfg, topo, n, seed, fer_of, sc))
                report.records.append(_exact(cfg, topo, n, seed, fer_of, sc))
    return report


# ---- output -----------------------------------------------------------------

RECORD_COLUMNS = [f.name for f in fields(Record) if f.name != "seconds"]
ENERGY_COLUMNS = ["n", "heuristic_te", "direct_te", "exact_te", "gap_pct", "direct_pct"]
EFFICIENCY_COLUMNS = ["n", "g_direct", "g_one", "g_two", "te_direct", "te_one", "te_two", "ef_direct", "ef_one", "ef_two"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.4f}"
    return str(v)


def _csv(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _pct(a, b):
    return None if a is None or b is None or b == 0 else 100.0 * (a - b) / b


def energy_rows(report: ScenarioReport) -> list[dict]:
    rows = []
    for n in sorted({r.n for r in report.records if r.n > 0}):
        heur = report.mean(n, "heuristic", "te")
        direct = report.mean(n, "direct", "te")
        ex = report.mean(n, "exact", "te")
        rows.append({
            "n": n, "heuristic_te": heur, "direct_te": direct, "exact_te": ex,
            "gap_pct": _pct(heur, ex), "direct_pct": _pct(direct, ex),
        })
    return rows


def efficiency_rows(report: ScenarioReport) -> list[dict]:
    rows = []
    for n in sorted({r.n for r in report.records if r.n > 0}):
        row = {"n": n}
        for tag, method in (("direct", "direct"), ("one", "heuristic_single"), ("two", "heuristic")):
            for name in ("g", "te", "ef"):
                row[f"{name}_{tag}"] = report.mean(n, method, name)
        rows.append(row)
    return rows


def report_files(report: ScenarioReport, fmt: str = "csv") -> dict[str, str]:
    """File name -> content, excluding the timing sidecar."""
    sc = report.config["scenario"]
    bundle = {
        "config": report.config,
        "records": [{k: v for k, v in asdict(r).items() if k != "seconds"} for r in report.records],
        "aggregates": report.aggregates(),
        "curve": report.curve,
    }
    files = {"report.json": json.dumps(bundle, indent=2, sort_keys=True) + "\n"}
    if fmt == "json":
        return files
    files["records.csv"] = _csv(RECORD_COLUMNS, [asdict(r) for r in report.records])
    agg = report.aggregates()
    files["aggregates.csv"] = _csv(list(agg[0]) if agg else ["scenario", "n", "method", "cap_l2", "runs"], agg)
    if sc == "compare_methods":
        files["energy_comparison.csv"] = _csv(ENERGY_COLUMNS, energy_rows(report))
        files["efficiency_comparison.csv"] = _csv(EFFICIENCY_COLUMNS, efficiency_rows(report))
    elif sc in ("s1_single_level", "s2_bilevel"):
        rows = [{"n": a["n"], "m1_mean": a["m1_mean"], "m2_mean": a["m2_mean"], "te_mean": a["te_mean"]} for a in agg]
        files["cluster_counts.csv"] = _csv(["n", "m1_mean", "m2_mean", "te_mean"], rows)
    elif sc == "s3_size_sweep":
        rows = [{"n": a["n"], "cap_l2": a["cap_l2"], "m2_mean": a["m2_mean"]} for a in agg]
        files["size_sweep.csv"] = _csv(["n", "cap_l2", "m2_mean"], rows)
    elif sc == "fer_curve":
        rows = [{"P": int(P), "fer_master": v["fer_master"], "fer_slave": v["fer_slave"], "ci95": v["ci95"]} for P, v in sorted(report.curve.items(), key=lambda kv: int(kv[0]))]
        files["fer_curve.csv"] = _csv(["P", "fer_master", "fer_slave", "ci95"], rows)
    elif sc == "runtime_bench":
        timed = report.config.get("timings", False)
        rows = [
            {"n": r.n, "seed": r.seed, "method": r.method, "status": r.status, "orphans": r.orphans,
             "objective": r.objective, "seconds": repr(r.seconds) if timed and r.seconds is not None else None}
            for r in report.records
        ]
        files["runtime.csv"] = _csv(["n", "seed", "method", "status", "orphans", "objective", "seconds"], rows)
    return files


def emit_report(report: ScenarioReport, out_dir: str | Path, fmt: str = "csv") -> list[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    for name, text in report_files(report, fmt).items():
        path = out / name
        path.write_text(text)
        written.append(path)
    if report.config.get("timings", False):
        (out / "timings.csv").write_text(_timing_full(report))
        written.append(out / "timings.csv")
    return written


def _timing_full(report: ScenarioReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "n", "seed", "method", "cap_l2", "seconds"])
    for r in report.records:
        w.writerow([r.scenario, r.n, r.seed, r.method, r.cap_l2, "" if r.seconds is None else repr(r.seconds)])
    return buf.getvalue()


def load_report(out_dir: str | Path) -> ScenarioReport:
    out = Path(out_dir)
    bundle = json.loads((out / "report.json").read_text())
    records = [Record(**r) for r in bundle["records"]]
    timing_path = out / "timings.csv"
    if timing_path.exists():
        secs = {}
        for row in csv.DictReader(io.StringIO(timing_path.read_text())):
            key = (row["scenario"], int(row["n"]), int(row["seed"]), row["method"], int(row["cap_l2"]))
            secs[key] = float(row["seconds"]) if row["seconds"] else None
        for r in records:
            r.seconds = secs.get(r.key)
    return ScenarioReport(bundle["config"], records, bundle["curve"])
