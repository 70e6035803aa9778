"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical breakdown (a sweep
point lost every drop, or dataset export failed numerically).
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .experiment import (CONFIG_SCHEMA, ConfigError, ExperimentConfig,
                         default_config_dict, emit_plot_data, load_config,
                         make_scenario_factory, run_experiment)
from .mapping import export_dataset

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _parse_sweep(text: str) -> tuple[str, tuple[float, ...]]:
    axis, _, rest = text.partition("=")
    if not rest:
        raise ConfigError("--sweep expects axis=v1,v2,...")
    try:
        values = tuple(float(v) for v in rest.split(","))
    except ValueError as exc:
        raise ConfigError(f"--sweep values: {exc}") from exc
    return axis, values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="satmimo",
        description="Multi-satellite distributed precoding simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a sweep experiment")
    run.add_argument("--config", help="JSON config file (defaults used if omitted)")
    run.add_argument("--out", default="out", help="output directory")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--threads", type=int, default=1,
                     help="parallel drop workers")
    run.add_argument("--methods", help="comma-separated method subset")
    run.add_argument("--sweep", help="axis=v1,v2,... override")
    run.add_argument("--print-schema", action="store_true",
                     help="print the config JSON schema and exit")

    plots = sub.add_parser("plots", help="emit per-figure plot data from a results CSV")
    plots.add_argument("--in", dest="input", required=True, help="results.csv path")
    plots.add_argument("--out", required=True, help="output directory")

    export = sub.add_parser("export-dataset",
                            help="export solver-labelled samples for training")
    export.add_argument("--config", help="JSON config file")
    export.add_argument("--n", type=int, required=True, help="sample count")
    export.add_argument("--out", required=True, help="output dataset file")
    export.add_argument("--seed", type=int, default=1)
    return parser


def _load(args) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        from .experiment import config_from_dict
        cfg = config_from_dict(default_config_dict())
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _cmd_run(args) -> int:
    if args.print_schema:
        print(json.dumps(CONFIG_SCHEMA, indent=2, sort_keys=True))
        return EXIT_OK
    cfg = _load(args)
    if args.methods:
        methods = tuple(m.strip() for m in args.methods.split(","))
        cfg = replace(cfg, methods=methods)
    if args.sweep:
        axis, values = _parse_sweep(args.sweep)
        cfg = replace(cfg, sweep_axis=axis, sweep_values=values)
    summary = run_experiment(cfg, args.out, threads=max(1, args.threads))
    print(f"results: {summary['results_csv']}")
    print(f"traces:  {summary['traces_csv']}")
    print(f"wall time: {summary['wall_time_s']:.1f} s")
    if summary["excluded_total"]:
        print(f"excluded drops: {summary['excluded_total']}", file=sys.stderr)
    for method, comp in summary["complexity"].items():
        print(f"{method}: mean_iters={comp['mean_iterations']:.2f} "
              f"solves={comp['total_linear_solves']} "
              f"wall={comp['wall_time_s']:.2f}s")
    if summary["empty_points"]:
        print(f"numerical breakdown at sweep points: {summary['empty_points']}",
              file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_plots(args) -> int:
    try:
        paths = emit_plot_data(args.input, args.out)
    except (OSError, ValueError) as exc:
        print(f"plot data error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for p in paths:
        print(p)
    return EXIT_OK


def _cmd_export(args) -> int:
    cfg = _load(args)
    factory = make_scenario_factory(cfg)
    try:
        manifest = export_dataset(
            factory, args.n, args.seed, args.out,
            solver_cfg=cfg.solver,
            config_info={"config": default_config_dict() if not args.config
                         else args.config, "seed": args.seed})
    except RuntimeError as exc:
        print(f"export failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps(manifest, indent=2, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "plots":
            return _cmd_plots(args)
        if args.command == "export-dataset":
            return _cmd_export(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
