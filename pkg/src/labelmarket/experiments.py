"""Monte Carlo replications, parameter sweeps and their summaries.

A ``Scenario`` knows how to stage one replication of a case study from a
split seed. Replication ``i`` of an experiment with root seed ``s`` derives
its split stream and its market seed from ``(s, "montecarlo-rep", i)``, so
every (strategy, pricing, parameter value) cell sees the same split in the
same replication and cells can be compared pairwise. Workers compute whole
replications and results are reassembled in replication order, which makes
the output independent of the number of processes.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from . import data as _data
from .errors import ConfigError, LabelMarketError, ReplicationError
from .market import MarketConfig, Pricing, Strategy, make_offers, run_market
from .regress import LossKind, LossSpec
from .stats import paired_comparison, percentile

STRATEGIES = (Strategy.VBAL, Strategy.QBCAL, Strategy.RSC)
PRICINGS = (Pricing.BUYER_CENTRIC, Pricing.SELLER_CENTRIC)

RAW_HEADER = (
    "replication", "strategy", "pricing", "param_value",
    "acquired", "incorporated", "spent", "improvement_pct",
)


# ---------------------------------------------------------------- scenarios


@dataclass(frozen=True, eq=False)
class Scenario:
    """Data source plus staging rules for one case study.

    ``source`` is a ``RawTable`` (cross-sectional data, shuffled split) or an
    ``EnergySeries`` (analyst/seller time series, chronological validation).
    ``pool_size=None`` puts every row not in the labelled set into the pool.
    """

    source: object
    k_init: int
    pool_size: Optional[int] = None
    val_fraction: float = 0.0
    normalize_target: bool = False
    wts: _data.WtsModel = _data.WtsModel()
    loss: LossKind = LossKind.PARAM_VARIANCE
    lag_spec: _data.LagSpec = _data.LagSpec()

    def __post_init__(self):
        object.__setattr__(self, "loss", LossKind(self.loss))
        if self.loss is LossKind.VALIDATION_MSE and self.val_fraction <= 0:
            raise ConfigError("validation MSE needs val_fraction > 0")

    @property
    def is_energy(self) -> bool:
        return isinstance(self.source, _data.EnergySeries)

    def stage(self, split_seed) -> _data.LabelledPool:
        if self.is_energy:
            pool_size = 300 if self.pool_size is None else self.pool_size
            return _data.stage_energy(
                self.source, self.k_init, pool_size, self.val_fraction, split_seed, self.lag_spec
            )
        n_val = int(round(self.val_fraction * self.source.n_rows))
        pool_size = self.source.n_rows - self.k_init - n_val if self.pool_size is None else self.pool_size
        return _data.split_pool(
            self.source, self.k_init, pool_size, self.val_fraction, split_seed, self.normalize_target
        )

    def wts_for(self, staged: _data.LabelledPool, scale: float = 1.0) -> np.ndarray:
        model = replace(self.wts, scale=self.wts.scale * scale)
        if not self.is_energy or model.kind is _data.WtsKind.UNIFORM:
            return _data.pool_wts(self.source, staged, model)
        # lag features: the driver is named like "lag_24", range over the pool
        names = list(staged.feature_names[1:])
        if model.driver_feature not in names:
            raise ConfigError(f"WTS driver {model.driver_feature!r} is not one of {names}")
        return _data.synth_wts(staged.raw_pool_features[:, names.index(model.driver_feature)], model)

    def loss_for(self, staged: _data.LabelledPool) -> LossSpec:
        if self.loss is LossKind.VALIDATION_MSE:
            return LossSpec.mse(staged.X_val, staged.y_val)
        return LossSpec.param_variance()


def real_estate_scenario(table=None, k_init=80, pool_size=None, wts=None) -> Scenario:
    """Reference valuation study: parameter-variance loss, standardized target."""
    if table is None:
        from .synthetic import real_estate_table
        table = real_estate_table()
    return Scenario(table, k_init, pool_size, 0.0, True, wts or _data.WtsModel(), LossKind.PARAM_VARIANCE)


def energy_scenario(series=None, k_init=100, pool_size=300, val_fraction=0.2, eta=30.0) -> Scenario:
    """Reference load-forecasting study: 7 lags, validation MSE, flat WTS."""
    if series is None:
        from .synthetic import energy_series
        series = energy_series()
    return Scenario(series, k_init, pool_size, val_fraction, False, _data.WtsModel.uniform(eta),
                    LossKind.VALIDATION_MSE)


REAL_ESTATE_MARKET = MarketConfig(wtp=1200.0, budget=15.0, improvement_target=0.2)
ENERGY_MARKET = MarketConfig(wtp=50.0, budget=1200.0, improvement_target=0.2)


# ---------------------------------------------------------------- replications


def replication_streams(seed: int, replication: int):
    """(split seed sequence, market seed) for one replication."""
    split = _data.seed_sequence(seed, "montecarlo-rep", replication, "split")
    market = int(_data.seed_sequence(seed, "montecarlo-rep", replication, "market").generate_state(1)[0])
    return split, market


@dataclass(frozen=True)
class Cell:
    strategy: Strategy
    pricing: Pricing
    param_value: float
    cfg: MarketConfig
    wts_scale: float = 1.0


@dataclass(frozen=True)
class RepRow:
    replication: int
    strategy: str
    pricing: str
    param_value: float
    acquired: int
    incorporated: int
    spent: float
    improvement_pct: float
    budget_exhausted: bool
    threshold_met: bool
    fingerprint: str

    @property
    def avg_cost(self) -> float:
        return self.spent / self.incorporated if self.incorporated else math.nan

    def raw(self) -> tuple:
        return (self.replication, self.strategy, self.pricing, self.param_value,
                self.acquired, self.incorporated, self.spent, self.improvement_pct)


def run_replication(scenario: Scenario, cells: Sequence[Cell], seed: int, replication: int,
                    split_replication: Optional[int] = None) -> list:
    """Stage one split and run every cell on it.

    ``split_replication`` pins the split to another replication's stream
    (used when a sweep is run without resampling).
    """
    try:
        split_seed, _ = replication_streams(seed, replication if split_replication is None else split_replication)
        _, market_seed = replication_streams(seed, replication)
        staged = scenario.stage(split_seed)
        loss = scenario.loss_for(staged)
        offers_by_scale = {}
        rows = []
        for cell in cells:
            if cell.wts_scale not in offers_by_scale:
                offers_by_scale[cell.wts_scale] = make_offers(staged.y_pool, scenario.wts_for(staged, cell.wts_scale))
            cfg = cell.cfg.with_(strategy=cell.strategy, pricing=cell.pricing, seed=market_seed)
            out = run_market(staged, offers_by_scale[cell.wts_scale], cfg, loss)
            rows.append(RepRow(replication, cell.strategy.value, cell.pricing.value, float(cell.param_value),
                               out.n_acquired, out.n_incorporated, out.total_spent, out.improvement_pct,
                               out.budget_exhausted, out.threshold_met, staged.fingerprint()))
        return rows
    except LabelMarketError as exc:
        raise ReplicationError(replication, exc) from exc


def _replication_job(args):
    return run_replication(*args)


def run_cells(scenario: Scenario, cells: Sequence[Cell], replications: int, seed: int = 0,
              jobs: int = 1, resample: bool = True) -> list:
    """All rows for ``replications`` x ``cells``, ordered by replication then cell."""
    if replications < 1:
        raise ConfigError("replications must be at least 1")
    cells = list(cells)
    args = [(scenario, cells, seed, i, None if resample else 0) for i in range(replications)]
    if jobs <= 1 or replications == 1:
        chunks = map(_replication_job, args)
        return [row for chunk in chunks for row in chunk]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map preserves submission order, so the result does not depend on jobs
        chunks = list(pool.map(_replication_job, args, chunksize=max(1, replications // (4 * jobs))))
    return [row for chunk in chunks for row in chunk]


# ---------------------------------------------------------------- summaries


@dataclass(frozen=True)
class Aggregate:
    mean: float
    p25: float
    p75: float

    @classmethod
    def of(cls, values):
        v = np.asarray(values, dtype=float)
        return cls(float(v.mean()), percentile(v, 0.25), percentile(v, 0.75))

    @property
    def iqr(self) -> float:
        return self.p75 - self.p25

    def label(self) -> str:
        return f"{self.mean:.2f} [{self.p25:.2f}--{self.p75:.2f}]"


@dataclass(frozen=True)
class RunSummary:
    """Per-replication results of one cell and their mean / quartiles."""

    incorporated: tuple
    acquired: tuple
    spent: tuple
    improvement_pct: tuple

    @classmethod
    def from_rows(cls, rows):
        rows = sorted(rows, key=lambda r: r.replication)
        return cls(
            tuple(int(r.incorporated) for r in rows),
            tuple(int(r.acquired) for r in rows),
            tuple(float(r.spent) for r in rows),
            tuple(float(r.improvement_pct) for r in rows),
        )

    @property
    def replications(self) -> int:
        return len(self.incorporated)

    @property
    def purchased(self) -> Aggregate:
        return Aggregate.of(self.incorporated)

    # convenience views on the headline metric
    @property
    def mean(self) -> float:
        return self.purchased.mean

    @property
    def p25(self) -> float:
        return self.purchased.p25

    @property
    def p75(self) -> float:
        return self.purchased.p75

    def to_dict(self) -> dict:
        out = {"replications": self.replications}
        for name in ("incorporated", "acquired", "spent", "improvement_pct"):
            a = Aggregate.of(getattr(self, name))
            out[name] = {"mean": a.mean, "p25": a.p25, "p75": a.p75}
        return out


def summarize(rows) -> dict:
    """Group rows into ``{(strategy, pricing, param_value): RunSummary}``."""
    groups = {}
    for r in rows:
        groups.setdefault((r.strategy, r.pricing, r.param_value), []).append(r)
    return {k: RunSummary.from_rows(v) for k, v in groups.items()}


def default_cells(cfg: MarketConfig, strategies=STRATEGIES, pricings=PRICINGS, param_value=0.0):
    return [Cell(Strategy(s), Pricing(p), param_value, cfg) for s in strategies for p in pricings]


def monte_carlo(scenario: Scenario, cfg: MarketConfig, replications: int, seed: int = 0,
                jobs: int = 1) -> RunSummary:
    """Resample the split ``replications`` times and run the configured market."""
    rows = run_cells(scenario, [Cell(cfg.strategy, cfg.pricing, 0.0, cfg)], replications, seed, jobs)
    return RunSummary.from_rows(rows)


class SweepParameter(str, Enum):
    WTP = "wtp"
    WTS_SCALE = "wts_scale"
    BUDGET = "budget"


@dataclass(frozen=True)
class SweepSpec:
    parameter: SweepParameter
    values: tuple
    base_config: MarketConfig
    replications: int = 50
    resample: bool = True
    strategies: tuple = STRATEGIES
    pricings: tuple = PRICINGS

    def __post_init__(self):
        object.__setattr__(self, "parameter", SweepParameter(self.parameter))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")

    def cells(self) -> list:
        out = []
        for v in self.values:
            cfg, scale = self.base_config, 1.0
            if self.parameter is SweepParameter.WTP:
                cfg = cfg.with_(wtp=v)
            elif self.parameter is SweepParameter.BUDGET:
                cfg = cfg.with_(budget=v)
            else:
                scale = v
            out.extend(Cell(Strategy(s), Pricing(p), v, cfg, scale)
                       for s in self.strategies for p in self.pricings)
        return out


def sweep_rows(spec: SweepSpec, scenario: Scenario, seed: int = 0, jobs: int = 1) -> list:
    return run_cells(scenario, spec.cells(), spec.replications, seed, jobs, spec.resample)


def sweep(spec: SweepSpec, scenario: Scenario, seed: int = 0, jobs: int = 1) -> dict:
    """``{(strategy, pricing, value): RunSummary}`` over the Cartesian grid."""
    return summarize(sweep_rows(spec, scenario, seed, jobs))


def compare_strategies(rows, baseline: str = "RSC", metric: str = "avg_cost") -> list:
    """Paired Wilcoxon comparisons of each strategy against ``baseline``.

    Rows are paired by (replication, pricing, param_value). Returns dicts
    with pricing, comparison, p_value, median_delta, n_pairs.
    """
    by_key = {(r.strategy, r.pricing, r.param_value, r.replication): r for r in rows}
    strategies = sorted({r.strategy for r in rows} - {baseline}, key=[s.value for s in STRATEGIES].index)
    out = []
    for pricing in sorted({r.pricing for r in rows}):
        for value in sorted({r.param_value for r in rows}):
            reps = sorted({r.replication for r in rows if r.pricing == pricing and r.param_value == value})
            for s in strategies:
                pairs = [(by_key[(s, pricing, value, i)], by_key[(baseline, pricing, value, i)])
                         for i in reps if (s, pricing, value, i) in by_key and (baseline, pricing, value, i) in by_key]
                a = [getattr(m, metric) for m, _ in pairs]
                b = [getattr(base, metric) for _, base in pairs]
                p, med = paired_comparison(a, b)
                n = int(sum(not (math.isnan(x) or math.isnan(y)) for x, y in zip(a, b)))
                out.append({"pricing": pricing, "param_value": value, "comparison": f"{s} vs {baseline}",
                            "p_value": p, "median_delta": med, "n_pairs": n})
    return out


# ---------------------------------------------------------------- emitters


def write_raw_reps(path, rows):
    _data.write_csv(path, RAW_HEADER, (r.raw() for r in rows))


def read_raw_reps(path) -> list:
    """Rows of a raw replication CSV (only the emitted columns are populated)."""
    import csv
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            out.append(RepRow(int(rec["replication"]), rec["strategy"], rec["pricing"],
                              float(rec["param_value"]), int(rec["acquired"]), int(rec["incorporated"]),
                              float(rec["spent"]), float(rec["improvement_pct"]), False, False, ""))
    return out


def summary_json(summaries: dict, parameter: Optional[str] = None) -> str:
    cells = []
    for (s, p, v), summ in sorted(summaries.items(), key=lambda kv: (kv[0][2], kv[0][1],
                                                                     [x.value for x in STRATEGIES].index(kv[0][0]))):
        cells.append({"strategy": s, "pricing": p, "param_value": v, **summ.to_dict(),
                      "purchased": summ.purchased.label()})
    return json.dumps({"parameter": parameter, "cells": cells}, indent=2, sort_keys=False) + "\n"


def histogram_bins(rows) -> list:
    """(strategy, pricing, param_value, incorporated, count), sorted."""
    counts = Counter((r.strategy, r.pricing, r.param_value, r.incorporated) for r in rows)
    return [(*k, n) for k, n in sorted(counts.items())]


HISTOGRAM_HEADER = ("strategy", "pricing", "param_value", "incorporated", "count")
COMPARE_HEADER = ("pricing", "param_value", "comparison", "p_value", "median_delta", "n_pairs")
