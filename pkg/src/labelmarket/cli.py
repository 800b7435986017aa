"""Command-line entry point.

Subcommands::

    run          one market per (strategy, pricing) on a single split
    montecarlo   resampled replications, optionally over a parameter sweep
    sweep        montecarlo with a required sweep parameter
    compare      paired Wilcoxon comparisons against RSC
    properties   re-check market properties on a stored run directory

Exit codes: 0 success, 2 configuration error, 3 data error, 4 market error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import data as _data
from . import experiments as ex
from .config import OUTPUT_ENV, build_config, dump_config
from .errors import ConfigError, DataError, LabelMarketError, PropertyViolation, ReplicationError
from .market import (
    Pricing,
    Strategy,
    check_ledger,
    improvement_trajectory,
    make_offers,
    read_ledger,
    run_market,
    write_ledger,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_MARKET = 0, 2, 3, 4


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _overrides(args) -> dict:
    out = {}
    for item in args.set or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v
    for key in ("seed", "output_dir", "jobs", "replications", "strategy", "pricing",
                "sweep_parameter", "sweep_values", "data_path"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = str(v)
    return out


def _load(args):
    cfg = build_config(args.config, _overrides(args), args.preset)
    out = cfg.output_path()
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def _cells(cfg, market, param_value=0.0):
    return [ex.Cell(Strategy(s), Pricing(p), param_value, market) for s in cfg.strategy for p in cfg.pricing]


# ---------------------------------------------------------------- commands


def cmd_run(args) -> int:
    cfg, out = _load(args)
    scenario = cfg.scenario()
    staged = scenario.stage(_data.seed_sequence(cfg.seed, "split"))
    loss = scenario.loss_for(staged)
    offers = make_offers(staged.y_pool, scenario.wts_for(staged))
    base = cfg.market()
    cells = [(Strategy(s), Pricing(p)) for s in cfg.strategy for p in cfg.pricing]
    rows = []
    for strategy, pricing in cells:
        target = out if len(cells) == 1 else out / f"{strategy.value}_{pricing.value}"
        target.mkdir(parents=True, exist_ok=True)
        mcfg = base.with_(strategy=strategy, pricing=pricing)
        outcome = run_market(staged, offers, mcfg, loss)
        summary = {**outcome.summary(), "wtp": mcfg.wtp, "budget": mcfg.budget,
                   "seed": cfg.seed, "split_fingerprint": staged.fingerprint()}
        rows.append(summary)
        if "ledger" in cfg.emit:
            write_ledger(target / "ledger.csv", outcome.ledger)
            _data.write_csv(target / "offers.csv", ("seller_id", "wts"), ((o.seller_id, o.wts) for o in offers))
        if "trajectory" in cfg.emit:
            _data.write_csv(target / "trajectory.csv", ("step", "cumulative_cost", "improvement_pct"),
                            improvement_trajectory(outcome))
        if "summary" in cfg.emit:
            _write_json(target / "summary.json", summary)
        print(f"{strategy.value:5s} {pricing.value}  bought={outcome.n_incorporated:3d} "
              f"acquired={outcome.n_acquired:3d} spent={outcome.total_spent:.4g} "
              f"improvement={outcome.improvement_pct:.2f}% budget_exhausted={outcome.budget_exhausted} "
              f"threshold_met={outcome.threshold_met}")
    if len(cells) > 1 and "summary" in cfg.emit:
        _write_json(out / "summary.json", rows)
    (out / "config.ini").write_text(dump_config(cfg), encoding="utf-8")
    return EXIT_OK


def _montecarlo_rows(cfg):
    scenario = cfg.scenario()
    market = cfg.market()
    if cfg.sweep_parameter:
        if not cfg.sweep_values:
            raise ConfigError("sweep_values is empty")
        spec = ex.SweepSpec(cfg.sweep_parameter, cfg.sweep_values, market, cfg.replications,
                            strategies=tuple(Strategy(s) for s in cfg.strategy),
                            pricings=tuple(Pricing(p) for p in cfg.pricing))
        return ex.sweep_rows(spec, scenario, cfg.seed, cfg.jobs)
    return ex.run_cells(scenario, _cells(cfg, market), cfg.replications, cfg.seed, cfg.jobs)


def _write_montecarlo(cfg, out, rows):
    if "raw_reps" in cfg.emit:
        ex.write_raw_reps(out / "raw_reps.csv", rows)
        fps = sorted({(r.replication, r.fingerprint) for r in rows})
        _data.write_csv(out / "fingerprints.csv", ("replication", "split_fingerprint"), fps)
    summaries = ex.summarize(rows)
    if "summary" in cfg.emit:
        (out / "summary.json").write_text(ex.summary_json(summaries, cfg.sweep_parameter), encoding="utf-8")
        _data.write_csv(out / "histogram.csv", ex.HISTOGRAM_HEADER, ex.histogram_bins(rows))
    (out / "config.ini").write_text(dump_config(cfg), encoding="utf-8")
    for (s, p, v), summ in sorted(summaries.items(), key=lambda kv: (kv[0][2], kv[0][1], kv[0][0])):
        tag = f" {cfg.sweep_parameter}={v:g}" if cfg.sweep_parameter else ""
        print(f"{s:5s} {p}{tag}  purchased {summ.purchased.label()}")


def cmd_montecarlo(args) -> int:
    cfg, out = _load(args)
    _write_montecarlo(cfg, out, _montecarlo_rows(cfg))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, out = _load(args)
    if not cfg.sweep_parameter:
        raise ConfigError("sweep needs sweep_parameter (wtp, wts_scale or budget)")
    _write_montecarlo(cfg, out, _montecarlo_rows(cfg))
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg, out = _load(args)
    if args.raw_reps:
        if not Path(args.raw_reps).is_file():
            raise FileNotFoundError(f"raw replication file not found: {args.raw_reps}")
        rows = ex.read_raw_reps(args.raw_reps)
    else:
        if "RSC" not in cfg.strategy:
            raise ConfigError("compare needs RSC among the strategies")
        rows = _montecarlo_rows(cfg)
        if "raw_reps" in cfg.emit:
            ex.write_raw_reps(out / "raw_reps.csv", rows)
    results = ex.compare_strategies(rows, baseline="RSC", metric=args.metric)
    _data.write_csv(out / "compare.csv", ex.COMPARE_HEADER, ([r[k] for k in ex.COMPARE_HEADER] for r in results))
    for r in results:
        print(f"{r['pricing']} {r['comparison']:13s} p={r['p_value']:.3g} median_delta={r['median_delta']:.4g}")
    return EXIT_OK


def cmd_properties(args) -> int:
    run_dir = Path(args.run_dir)
    paths = [run_dir / n for n in ("ledger.csv", "offers.csv", "summary.json")]
    for p in paths:
        if not p.is_file():
            raise FileNotFoundError(f"missing {p}")
    try:
        ledger = read_ledger(paths[0])
        import csv
        with paths[1].open(newline="", encoding="utf-8") as fh:
            wts = {r["seller_id"]: float(r["wts"]) for r in csv.DictReader(fh)}
        summary = json.loads(paths[2].read_text(encoding="utf-8"))
        pricing, budget, wtp, spent = summary["pricing"], summary["budget"], summary["wtp"], summary["spent"]
    except (ValueError, KeyError) as exc:
        raise DataError(f"unreadable run directory {run_dir}: {exc}") from exc
    check_ledger(ledger, wts, pricing, budget, spent, wtp)
    print(f"properties hold for {len(ledger)} transactions in {run_dir}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="labelmarket", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, montecarlo=False):
        p.add_argument("--config", help="INI file with an [experiment] section")
        p.add_argument("--preset", choices=("real_estate", "energy"),
                       help="default values when no config file (or no dataset key) is given")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        p.add_argument("--seed", type=int)
        p.add_argument("--output-dir", dest="output_dir", help=f"output directory (default ${OUTPUT_ENV})")
        p.add_argument("--data-path", dest="data_path")
        p.add_argument("--strategy", help="comma-separated subset of VBAL,QBCAL,RSC")
        p.add_argument("--pricing", help="comma-separated subset of BC,SC")
        if montecarlo:
            p.add_argument("--replications", type=int)
            p.add_argument("--jobs", type=int, help="worker processes (output does not depend on it)")
            p.add_argument("--sweep-parameter", dest="sweep_parameter", choices=("wtp", "wts_scale", "budget"))
            p.add_argument("--sweep-values", dest="sweep_values", help="comma-separated values")

    common(sub.add_parser("run", help="single split, one market per strategy and pricing"))
    common(sub.add_parser("montecarlo", help="resampled replications"), montecarlo=True)
    common(sub.add_parser("sweep", help="replications over a parameter grid"), montecarlo=True)
    p = sub.add_parser("compare", help="paired Wilcoxon tests of each strategy against RSC")
    common(p, montecarlo=True)
    p.add_argument("--raw-reps", dest="raw_reps", help="reuse a raw_reps.csv instead of running")
    p.add_argument("--metric", default="avg_cost", choices=("avg_cost", "incorporated", "spent", "improvement_pct"))
    p = sub.add_parser("properties", help="check budget balance, IR and pricing rules on a run directory")
    p.add_argument("run_dir")
    return parser


COMMANDS = {
    "run": cmd_run,
    "montecarlo": cmd_montecarlo,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "properties": cmd_properties,
}


def _exit_code(exc) -> int:
    if isinstance(exc, ReplicationError):
        return _exit_code(exc.cause)
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (DataError, FileNotFoundError)):
        return EXIT_DATA
    return EXIT_MARKET


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (LabelMarketError, FileNotFoundError) as exc:
        kind = {EXIT_CONFIG: "config error", EXIT_DATA: "data error"}.get(_exit_code(exc), "market error")
        if isinstance(exc, PropertyViolation):
            kind = "property violation"
        print(f"labelmarket: {kind}: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
