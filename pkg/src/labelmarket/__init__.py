"""Budgeted label acquisition markets for linear regression.

A buyer with a small labelled set queries sellers' hidden labels one at a
time (greedy prediction-variance, bootstrap committee or random choice),
keeps a label only when it lowers the model loss enough to be worth the
seller's asking price, and pays either a value-based or an ask-based price.
"""
from .data import LabelledPool, LagSpec, WtsModel, build_lag_samples, load_energy, load_real_estate, split_pool, stage_energy, synth_wts
from .experiments import (
    RunSummary,
    SweepSpec,
    energy_scenario,
    monte_carlo,
    real_estate_scenario,
    sweep,
)
from .market import MarketConfig, MarketOutcome, Pricing, Strategy, make_offers, run_market
from .regress import LossSpec, ols_fit, rank_one_refit
from .stats import paired_comparison, percentile, wilcoxon_signed_rank
from .strategy import CommitteeSpec, select_qbc, select_rsc, select_vbal

__all__ = [
    "CommitteeSpec", "LabelledPool", "LagSpec", "LossSpec", "MarketConfig", "MarketOutcome", "Pricing",
    "RunSummary", "Strategy", "SweepSpec", "WtsModel", "build_lag_samples", "energy_scenario", "load_energy",
    "load_real_estate", "make_offers", "monte_carlo", "ols_fit", "paired_comparison", "percentile",
    "rank_one_refit", "real_estate_scenario", "run_market", "select_qbc", "select_rsc", "select_vbal",
    "split_pool", "stage_energy", "sweep", "synth_wts", "wilcoxon_signed_rank",
]
