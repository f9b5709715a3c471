"""Command-line entry point: ``python -m pmsm_gp <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .aggregation import STRATEGIES
from .config import ConfigError, ScenarioConfig, load_config
from .datagen import generate_datasets
from .sim import SimulationDiverged, bound_check, compare, compute_metrics, run_closed_loop

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


def _config(args) -> ScenarioConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def cmd_run(args) -> int:
    cfg = _config(args)
    strategy = args.strategy or cfg.strategy
    log = run_closed_loop(cfg, strategy)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    log.to_csv(out)
    m = compute_metrics(log)
    print(f"{strategy}: rmse_e={m.rmse_e:.6g} max_e={m.max_e:.6g} steady_e={m.steady_e:.6g} -> {out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config(args)
    rows = compare(cfg, out_dir=args.out_dir)
    print(f"{'strategy':<12} {'rmse_e':>12} {'max_e':>12} {'steady_e':>12} {'violations':>10}")
    failed = False
    for r in rows:
        if r.metrics is None:
            failed = True
            print(f"{r.strategy:<12} failed: {r.error}")
            continue
        m = r.metrics
        print(f"{r.strategy:<12} {m.rmse_e:12.6g} {m.max_e:12.6g} {m.steady_e:12.6g} "
              f"{m.bound_violations:10d}")
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_datagen(args) -> int:
    cfg = _config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, ds in enumerate(generate_datasets(cfg.experts, cfg.seed), start=1):
        path = out_dir / f"expert_{i}.csv"
        ds.to_csv(path)
        print(f"wrote {path} ({len(ds)} samples, sigma_T={ds.noise_std})")
    return EXIT_OK


def cmd_bound_check(args) -> int:
    cfg = _config(args)
    report = bound_check(cfg, simulate=not args.no_sim)
    print(json.dumps(report, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmsm_gp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", required=True, help="scenario TOML file (or a bundled name, e.g. paper.toml)")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.set_defaults(func=func)
        return p

    p = add("run", cmd_run, "simulate one strategy and write its trajectory CSV")
    p.add_argument("--strategy", choices=STRATEGIES, default=None)
    p.add_argument("--out", required=True)

    p = add("compare", cmd_compare, "run every strategy on identical experts and seeds")
    p.add_argument("--out-dir", required=True)

    p = add("datagen", cmd_datagen, "write the per-expert training datasets")
    p.add_argument("--out-dir", required=True)

    p = add("bound-check", cmd_bound_check, "report error-bound coverage and the ultimate bound")
    p.add_argument("--no-sim", action="store_true", help="skip the closed-loop check")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationDiverged as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
