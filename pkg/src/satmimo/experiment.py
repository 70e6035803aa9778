"""Config-driven Monte Carlo experiment harness.

A run sweeps one axis (transmit power, Rician factor, phase-error variance,
satellite count or user count); for every sweep value it replays the same
seeded drops — each drop samples a service region, selects the cooperating
satellites, builds the link-budget CSI and runs the requested precoding
methods — and aggregates the three rate metrics into CSV files plus
per-method convergence traces.  Everything is deterministic under the master
seed, independent of the worker count: drop seeds derive from (seed, drop
index) alone and results aggregate in fixed drop order.
"""
from __future__ import annotations

import csv
import functools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .channel import ArrayGeometry, LinkBudgetConfig, link_budget_scsi
from .geometry import (ConstellationConfig, build_constellation, latlon_to_ecef,
                       link_geometry, sample_region, select_satellites)
from .mapping import MappingInputs, MappingLabels, cfp
from .rates import rate_ap1, rate_ap2, rate_mc
from .solvers import (SolverConfig, _ScenarioArrays, solve_baselines,
                      solve_ms_jocdwm, solve_ms_jowm)

METHOD_ORDER = ["SS-M", "SS-WM", "MS-SepWM", "MS-JoWM", "MS-JoCDWM",
                "CFP-from-dataset"]
SWEEP_AXES = ["P_TX", "kappa", "zeta2", "S", "K"]
AXIS_LABELS = {"P_TX": "P_TX_dBm", "kappa": "kappa_dB", "zeta2": "zeta2",
               "S": "S", "K": "K"}


class ConfigError(Exception):
    """Invalid experiment configuration; message carries the JSON path."""


@dataclass(frozen=True)
class ExperimentConfig:
    constellation: ConstellationConfig = ConstellationConfig()
    radius_km: float = 800.0
    num_users: int = 48
    num_satellites: int = 5
    array: ArrayGeometry = ArrayGeometry(10, 10)
    link: LinkBudgetConfig = LinkBudgetConfig()
    p_tx_dbm: float = 35.0
    sweep_axis: str = "P_TX"
    sweep_values: tuple = (20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0)
    methods: tuple = ("SS-M", "SS-WM", "MS-SepWM", "MS-JoWM", "MS-JoCDWM")
    n_drops: int = 50
    n_rate_trials: int = 200
    solver: SolverConfig = SolverConfig()
    seed: int = 1

    def __post_init__(self):
        if self.sweep_axis not in SWEEP_AXES:
            raise ConfigError(f"sweep.axis: unknown axis {self.sweep_axis!r}")
        if len(self.sweep_values) == 0:
            raise ConfigError("sweep.values: must be non-empty")
        if self.n_drops < 1:
            raise ConfigError("monte_carlo.n_drops: must be >= 1")
        for m in self.methods:
            if m not in METHOD_ORDER:
                raise ConfigError(f"methods: unknown method {m!r}")


CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "satmimo experiment configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "constellation": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "num_planes": {"type": "integer", "minimum": 1},
                "sats_per_plane": {"type": "integer", "minimum": 1},
                "inclination_deg": {"type": "number", "minimum": 0, "maximum": 180},
                "altitude_km": {"type": "number", "exclusiveMinimum": 0},
                "phasing_factor": {"type": "integer", "minimum": 0},
                "earth_radius_km": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "region": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "radius_km": {"type": "number", "exclusiveMinimum": 0},
                "num_users": {"type": "integer", "minimum": 1},
            },
        },
        "cooperation": {
            "type": "object", "additionalProperties": False,
            "properties": {"num_satellites": {"type": "integer", "minimum": 1}},
        },
        "array": {
            "type": "object", "additionalProperties": False,
            "required": ["n_v", "n_h"],
            "properties": {
                "n_v": {"type": "integer", "minimum": 1},
                "n_h": {"type": "integer", "minimum": 1},
            },
        },
        "link": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "f0_hz": {"type": "number", "exclusiveMinimum": 0},
                "subcarrier_spacing_hz": {"type": "number", "exclusiveMinimum": 0},
                "antenna_temp_k": {"type": "number", "exclusiveMinimum": 0},
                "noise_figure_db": {"type": "number"},
                "tx_gain_dbi": {"type": "number"},
                "rx_gain_dbi": {"type": "number"},
            },
        },
        "channel": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "kappa_mode": {"enum": ["constant", "lognormal"]},
                "kappa_db": {"type": "number"},
                "kappa_db_mean": {"type": "number"},
                "kappa_db_std": {"type": "number", "minimum": 0},
                "phase_error_var": {"type": "number", "minimum": 0},
            },
        },
        "power": {
            "type": "object", "additionalProperties": False,
            "properties": {"p_tx_dbm": {"type": "number"}},
        },
        "sweep": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "axis": {"enum": SWEEP_AXES},
                "values": {"type": "array", "minItems": 1,
                           "items": {"type": "number"}},
            },
        },
        "methods": {"type": "array", "items": {"enum": METHOD_ORDER}},
        "monte_carlo": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "n_drops": {"type": "integer", "minimum": 1},
                "n_rate_trials": {"type": "integer", "minimum": 1},
            },
        },
        "solver": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "i_max": {"type": "integer", "minimum": 1},
                "chi": {"type": "number", "exclusiveMinimum": 0},
                "i_max1": {"type": "integer", "minimum": 1},
                "ridge_floor": {"type": "number", "minimum": 0},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a raw config tree against the schema and build the config."""
    import jsonschema

    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"$.{'.'.join(str(p) for p in e.absolute_path)}: {e.message}"
                 for e in errors]
        raise ConfigError("; ".join(lines))

    def sub(name):
        return raw.get(name, {}) or {}

    try:
        cfg = ExperimentConfig(
            constellation=ConstellationConfig(**sub("constellation")),
            radius_km=sub("region").get("radius_km", 800.0),
            num_users=sub("region").get("num_users", 48),
            num_satellites=sub("cooperation").get("num_satellites", 5),
            array=ArrayGeometry(**(sub("array") or {"n_v": 10, "n_h": 10})),
            link=LinkBudgetConfig(**sub("link"), **sub("channel")),
            p_tx_dbm=sub("power").get("p_tx_dbm", 35.0),
            sweep_axis=sub("sweep").get("axis", "P_TX"),
            sweep_values=tuple(sub("sweep").get(
                "values", (20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0))),
            methods=tuple(raw.get(
                "methods", ("SS-M", "SS-WM", "MS-SepWM", "MS-JoWM", "MS-JoCDWM"))),
            n_drops=sub("monte_carlo").get("n_drops", 50),
            n_rate_trials=sub("monte_carlo").get("n_rate_trials", 200),
            solver=SolverConfig(**sub("solver")),
            seed=raw.get("seed", 1),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("$: config root must be an object")
    return config_from_dict(raw)


@functools.lru_cache(maxsize=4)
def _cached_constellation(config: ConstellationConfig):
    return build_constellation(config)


def _sweep_overrides(cfg: ExperimentConfig, value: float):
    """Apply one sweep value, returning (num_users, num_satellites, link_cfg)
    with the transmit power folded into the link config."""
    k, s = cfg.num_users, cfg.num_satellites
    link = cfg.link
    p_dbm = cfg.p_tx_dbm
    axis = cfg.sweep_axis
    if axis == "P_TX":
        p_dbm = value
    elif axis == "kappa":
        link = replace(link, kappa_mode="constant", kappa_db=value)
    elif axis == "zeta2":
        link = replace(link, phase_error_var=value)
    elif axis == "S":
        s = int(value)
    elif axis == "K":
        k = int(value)
    p_w = 10.0 ** ((p_dbm - 30.0) / 10.0)
    link = replace(link, tx_power_w=p_w)
    return k, s, link


def build_drop_scenario(cfg: ExperimentConfig, value: float, drop_index: int):
    """Construct the seeded scenario of one drop at one sweep value.

    The region, users and Rician draws depend only on (master seed, drop
    index), so sweep values replay identical geometry.
    """
    k, s, link = _sweep_overrides(cfg, value)
    ss = np.random.SeedSequence([cfg.seed, drop_index])
    region_seed, kappa_seed, rate_seed = ss.spawn(3)

    states = _cached_constellation(cfg.constellation)
    region = sample_region(region_seed, cfg.constellation, cfg.radius_km, k)
    center = latlon_to_ecef(*region.center_lat_lon,
                            radius_km=cfg.constellation.earth_radius_km)
    selected = select_satellites(states, center, s)
    geoms = []
    for lat, lon, alt in region.user_positions:
        user = latlon_to_ecef(lat, lon, alt,
                              radius_km=cfg.constellation.earth_radius_km)
        geoms.append([link_geometry(states[i], user, link.f0_hz) for i in selected])
    scsi = link_budget_scsi(geoms, link, cfg.array,
                            rng=np.random.default_rng(kappa_seed))
    return scsi, rate_seed


def _run_method(method: str, scsi, cfg: ExperimentConfig, rate_seed) -> dict:
    if method == "SS-M" or method == "SS-WM" or method == "MS-SepWM":
        sol, trace = solve_baselines(scsi, cfg.solver, which=method)
    elif method == "MS-JoWM":
        sol, trace = solve_ms_jowm(scsi, cfg.solver)
    elif method == "MS-JoCDWM":
        sol, trace = solve_ms_jocdwm(scsi, cfg.solver)
    elif method == "CFP-from-dataset":
        # Labels come from a converged solver run, then one solve per user.
        _, label_trace = solve_ms_jocdwm(scsi, cfg.solver)
        labels = MappingLabels.from_aux(label_trace.final_aux)
        sol, trace = cfp(labels, MappingInputs.from_scenario(scsi), scsi.array,
                         cfg.solver)
        if label_trace.breakdown:
            trace.breakdown = True
    else:
        raise ValueError(f"unknown method {method!r}")
    if trace.breakdown:
        return {"error": "; ".join(trace.messages) or "solver breakdown"}
    arr = _ScenarioArrays(scsi)
    ap1 = rate_ap1(sol.w, scsi, arr)
    ap2 = rate_ap2(sol.w, scsi, arr)
    mc = rate_mc(sol.w, scsi, cfg.n_rate_trials, rate_seed, arr)
    return {
        "r_ap1": ap1.sum_rate,
        "r_ap2": ap2.sum_rate,
        "r_e": mc.sum_rate,
        "r_e_stderr": mc.mc_stderr,
        "iterations": trace.iterations,
        "n_solves": trace.n_linear_solves,
        "trace_r_ap1": list(trace.r_ap1),
        "trace_r_ap2": list(trace.r_ap2),
        "trace_obj": list(trace.objective),
        "wall_s": trace.wall_time_s,
    }


def _drop_worker(args) -> dict:
    cfg, value, drop_index = args
    scsi, rate_seed = build_drop_scenario(cfg, value, drop_index)
    out = {}
    for method in cfg.methods:
        try:
            out[method] = _run_method(method, scsi, cfg, rate_seed)
        except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            out[method] = {"error": f"{type(exc).__name__}: {exc}"}
    return out


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{x:.12g}"


def run_experiment(cfg: ExperimentConfig, out_dir: str,
                   threads: int = 1) -> dict:
    """Run the sweep and write results.csv, traces.csv and complexity.txt.

    Returns a summary dict with per-(value, method) aggregates, exclusion
    counts and the output paths.  Determinism: drop seeds depend only on the
    config seed and drop index, aggregation is in fixed order, and CSV floats
    use a fixed format, so identical configs reproduce identical bytes for
    any worker count.
    """
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    jobs = [(cfg, value, d) for value in cfg.sweep_values
            for d in range(cfg.n_drops)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_drop_worker, jobs, chunksize=1))
    else:
        results = [_drop_worker(j) for j in jobs]

    by_value = {}
    for (cfg_, value, d), res in zip(jobs, results):
        by_value.setdefault(value, []).append(res)

    rows = []
    trace_rows = []
    complexity = {}
    excluded_total = 0
    empty_points = []
    for value in cfg.sweep_values:
        drops = by_value[value]
        for method in cfg.methods:
            oks = [d[method] for d in drops if "error" not in d[method]]
            n_exc = len(drops) - len(oks)
            excluded_total += n_exc
            if not oks:
                empty_points.append((value, method))
                rows.append({"sweep_axis": cfg.sweep_axis, "sweep_value": value,
                             "method": method, "n_drops_valid": 0,
                             "n_drops_excluded": n_exc})
                continue
            row = {"sweep_axis": cfg.sweep_axis, "sweep_value": value,
                   "method": method, "n_drops_valid": len(oks),
                   "n_drops_excluded": n_exc}
            for key in ("r_ap1", "r_ap2", "r_e"):
                vals = np.array([o[key] for o in oks])
                row[f"{key}_mean"] = float(vals.mean())
                row[f"{key}_stderr"] = (float(vals.std(ddof=1) / math.sqrt(len(vals)))
                                        if len(vals) > 1 else float("nan"))
            row["mean_iterations"] = float(np.mean([o["iterations"] for o in oks]))
            row["total_linear_solves"] = int(sum(o["n_solves"] for o in oks))
            rows.append(row)

            comp = complexity.setdefault(method, {"iterations": [], "solves": 0,
                                                  "wall_s": 0.0})
            comp["iterations"].extend(o["iterations"] for o in oks)
            comp["solves"] += sum(o["n_solves"] for o in oks)
            comp["wall_s"] += sum(o["wall_s"] for o in oks)

            max_len = max(len(o["trace_r_ap1"]) for o in oks)
            for it in range(max_len):
                r1 = [o["trace_r_ap1"][it] for o in oks if len(o["trace_r_ap1"]) > it]
                r2 = [o["trace_r_ap2"][it] for o in oks if len(o["trace_r_ap2"]) > it]
                ob = [o["trace_obj"][it] for o in oks if len(o["trace_obj"]) > it]
                trace_rows.append({
                    "method": method, "sweep_value": value, "iteration": it + 1,
                    "r_ap1_mean": float(np.mean(r1)) if r1 else float("nan"),
                    "r_ap2_mean": float(np.mean(r2)) if r2 else float("nan"),
                    "objective_mean": float(np.mean(ob)) if ob else float("nan"),
                    "n_drops": len(r1),
                })

    results_path = os.path.join(out_dir, "results.csv")
    fields = ["sweep_axis", "sweep_value", "method", "n_drops_valid",
              "n_drops_excluded", "r_ap1_mean", "r_ap1_stderr", "r_ap2_mean",
              "r_ap2_stderr", "r_e_mean", "r_e_stderr", "mean_iterations",
              "total_linear_solves"]
    with open(results_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([row["sweep_axis"], _fmt(row["sweep_value"]),
                             row["method"], row["n_drops_valid"],
                             row["n_drops_excluded"]]
                            + [_fmt(row.get(f)) for f in fields[5:11]]
                            + [_fmt(row.get("mean_iterations")),
                               row.get("total_linear_solves", 0)])

    traces_path = os.path.join(out_dir, "traces.csv")
    with open(traces_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "sweep_value", "iteration", "r_ap1_mean",
                         "r_ap2_mean", "objective_mean", "n_drops"])
        for row in trace_rows:
            writer.writerow([row["method"], _fmt(row["sweep_value"]),
                             row["iteration"], _fmt(row["r_ap1_mean"]),
                             _fmt(row["r_ap2_mean"]), _fmt(row["objective_mean"]),
                             row["n_drops"]])

    summary = report_complexity(complexity)
    with open(os.path.join(out_dir, "complexity.txt"), "w") as fh:
        fh.write("method mean_iterations max_iterations total_linear_solves\n")
        for method in cfg.methods:
            if method in summary:
                s = summary[method]
                fh.write(f"{method} {_fmt(s['mean_iterations'])} "
                         f"{s['max_iterations']} {s['total_linear_solves']}\n")

    return {
        "results_csv": results_path,
        "traces_csv": traces_path,
        "rows": rows,
        "excluded_total": excluded_total,
        "empty_points": empty_points,
        "complexity": summary,
        "wall_time_s": time.perf_counter() - t0,
    }


def report_complexity(per_method: dict) -> dict:
    """Aggregate iteration and linear-solve counters per method."""
    out = {}
    for method, comp in per_method.items():
        iters = comp["iterations"] or [0]
        out[method] = {
            "mean_iterations": float(np.mean(iters)),
            "max_iterations": int(np.max(iters)),
            "total_linear_solves": int(comp["solves"]),
            "wall_time_s": float(comp["wall_s"]),
        }
    return out


def emit_plot_data(results_csv: str, out_dir: str) -> list[str]:
    """Pivot a results CSV into whitespace-delimited per-figure data files.

    One file per rate metric: first column is the sweep value, then one
    column per method in canonical order.  Values are copied verbatim, so a
    parse-back reproduces the CSV numbers exactly.
    """
    os.makedirs(out_dir, exist_ok=True)
    with open(results_csv, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "sweep_value" not in reader.fieldnames:
            raise ValueError("malformed results CSV")
        rows = list(reader)
    if not rows:
        raise ValueError("results CSV has no data rows")
    axis = rows[0]["sweep_axis"]
    label = AXIS_LABELS.get(axis, axis)
    methods = [m for m in METHOD_ORDER if any(r["method"] == m for r in rows)]
    values = []
    for r in rows:
        if r["sweep_value"] not in values:
            values.append(r["sweep_value"])

    paths = []
    for metric in ("r_e_mean", "r_ap1_mean", "r_ap2_mean"):
        path = os.path.join(out_dir, f"fig_{metric}_vs_{axis}.dat")
        with open(path, "w") as fh:
            fh.write(" ".join([label] + methods) + "\n")
            for value in values:
                cells = [value]
                for m in methods:
                    cell = next((r.get(metric, "nan") for r in rows
                                 if r["sweep_value"] == value and r["method"] == m),
                                "nan")
                    cells.append(cell if cell else "nan")
                fh.write(" ".join(cells) + "\n")
        paths.append(path)
    return paths


def default_config_dict() -> dict:
    """The default experiment tree (power sweep at the reference scale)."""
    return {
        "constellation": {"num_planes": 28, "sats_per_plane": 60,
                          "inclination_deg": 53.0, "altitude_km": 600.0,
                          "phasing_factor": 1},
        "region": {"radius_km": 800.0, "num_users": 48},
        "cooperation": {"num_satellites": 5},
        "array": {"n_v": 10, "n_h": 10},
        "link": {"f0_hz": 2.0e9, "subcarrier_spacing_hz": 30.0e3,
                 "antenna_temp_k": 290.0, "noise_figure_db": 7.0,
                 "tx_gain_dbi": 6.0, "rx_gain_dbi": 0.0},
        "channel": {"kappa_mode": "lognormal", "kappa_db_mean": 9.0,
                    "kappa_db_std": 3.5, "phase_error_var": 0.5},
        "power": {"p_tx_dbm": 35.0},
        "sweep": {"axis": "P_TX",
                  "values": [20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0]},
        "methods": ["SS-M", "SS-WM", "MS-SepWM", "MS-JoWM", "MS-JoCDWM"],
        "monte_carlo": {"n_drops": 50, "n_rate_trials": 200},
        "solver": {"i_max": 10, "chi": 0.001, "i_max1": 300,
                   "ridge_floor": 1e-12},
        "seed": 1,
    }


def make_scenario_factory(cfg: ExperimentConfig):
    """Scenario generator for the dataset exporter: maps (seed, p_tx_w) to a
    fresh drop-style scenario at that power."""
    def factory(seed: int, p_tx_w: float):
        link = replace(cfg.link, tx_power_w=p_tx_w)
        sub = replace(cfg, link=link,
                      sweep_axis="P_TX",
                      sweep_values=(10.0 * math.log10(p_tx_w) + 30.0,))
        scsi, _ = build_drop_scenario(sub, sub.sweep_values[0], seed)
        return scsi
    return factory
