"""Experiment configuration: one flat INI section per experiment.

Every key is optional; missing keys take the defaults of the chosen
``dataset`` preset. Units: ``wtp`` is currency per unit of loss reduction,
``budget`` and ``wts_eta`` are currency, everything else is dimensionless.

Example::

    [experiment]
    dataset = real_estate
    data_path = bundled
    k_init = 80
    wtp = 1200
    budget = 15
    improvement_target = 0.2
    strategy = VBAL,QBCAL,RSC
    pricing = BC,SC
    seed = 0
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from . import data as _data
from .errors import ConfigError
from .experiments import Scenario, SweepParameter
from .market import MarketConfig, Pricing, Strategy
from .regress import LossKind
from .strategy import CommitteeSpec

SECTION = "experiment"
OUTPUT_ENV = "LABELMARKET_OUTPUT_DIR"
DEFAULT_OUTPUT = "labelmarket-out"
EMIT_KINDS = ("ledger", "trajectory", "summary", "raw_reps")


def _optional_float(text):
    text = text.strip()
    return None if text in ("", "none") else float(text)


def _optional_int(text):
    text = text.strip()
    return None if text in ("", "none") else int(text)


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _str_list(text):
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _float_list(text):
    return tuple(float(p) for p in _str_list(text))


def _int_list(text):
    return tuple(int(p) for p in _str_list(text))


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "real_estate"
    data_path: str = "bundled"
    analyst_column: str = "Rachael"
    seller_column: str = "Madge"
    k_init: int = 80
    pool_size: Optional[int] = None
    val_fraction: float = 0.0
    normalize_target: bool = True
    lags: tuple = _data.LagSpec().lags
    loss: str = "param_variance"
    wts: str = "synthetic"
    wts_d0: float = 0.1
    wts_d1: float = 0.5
    wts_eta: float = 0.0
    wts_driver: str = "mrt_distance"
    wts_scale: float = 1.0
    wtp: float = 1200.0
    budget: float = 15.0
    improvement_target: Optional[float] = 0.2
    alpha: Optional[float] = None
    strategy: tuple = ("VBAL", "QBCAL", "RSC")
    pricing: tuple = ("BC", "SC")
    rsc_applies_wtp_check: bool = False
    committee_size: int = 10
    bootstrap_fraction: float = 1.0
    seed: int = 0
    replications: int = 50
    sweep_parameter: Optional[str] = None
    sweep_values: tuple = ()
    output_dir: Optional[str] = None
    emit: tuple = EMIT_KINDS
    jobs: int = 1

    # ------------------------------------------------------------ building

    def validate(self) -> "ExperimentConfig":
        if self.dataset not in PRESETS:
            raise ConfigError(f"dataset must be one of {sorted(PRESETS)}, got {self.dataset!r}")
        try:
            for s in self.strategy:
                Strategy(s)
            for p in self.pricing:
                Pricing(p)
            LossKind(self.loss)
            _data.WtsKind(self.wts)
            if self.sweep_parameter is not None:
                SweepParameter(self.sweep_parameter)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not self.strategy or not self.pricing:
            raise ConfigError("strategy and pricing lists must be non-empty")
        bad = set(self.emit) - set(EMIT_KINDS)
        if bad:
            raise ConfigError(f"unknown emit kinds {sorted(bad)}")
        if self.replications < 1 or self.jobs < 1:
            raise ConfigError("replications and jobs must be at least 1")
        self.market()
        self.wts_model()
        return self

    def market(self) -> MarketConfig:
        try:
            cfg = MarketConfig(
                wtp=self.wtp,
                budget=self.budget,
                improvement_target=self.improvement_target,
                alpha=self.alpha,
                pricing=self.pricing[0],
                strategy=self.strategy[0],
                rsc_applies_wtp_check=self.rsc_applies_wtp_check,
                committee=CommitteeSpec(self.committee_size, self.bootstrap_fraction),
                seed=self.seed,
            )
            cfg.threshold(1.0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg

    def wts_model(self) -> _data.WtsModel:
        try:
            return _data.WtsModel(self.wts, self.wts_d0, self.wts_d1, self.wts_eta, self.wts_driver, self.wts_scale)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def resolved_data_path(self) -> Path:
        if self.data_path == "bundled":
            from .synthetic import bundled
            return bundled(self.dataset)
        return Path(self.data_path)

    def scenario(self) -> Scenario:
        """Load the dataset and build the staging rules. Raises DataError."""
        path = self.resolved_data_path()
        if not path.is_file():
            raise FileNotFoundError(f"dataset file not found: {path}")
        if self.dataset == "energy":
            source = _data.load_energy(path, self.analyst_column, self.seller_column)
        else:
            source = _data.load_real_estate(path)
        try:
            lag_spec = _data.LagSpec(tuple(self.lags))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return Scenario(source, self.k_init, self.pool_size, self.val_fraction, self.normalize_target,
                        self.wts_model(), LossKind(self.loss), lag_spec)

    def output_path(self) -> Path:
        return Path(self.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)


PRESETS = {
    "real_estate": ExperimentConfig(),
    "energy": ExperimentConfig(
        dataset="energy",
        k_init=100,
        pool_size=300,
        val_fraction=0.2,
        normalize_target=False,
        loss="validation_mse",
        wts="uniform",
        wts_d0=0.0,
        wts_d1=0.0,
        wts_eta=30.0,
        wtp=50.0,
        budget=1200.0,
        replications=20,
    ),
}

_PARSERS = {
    "dataset": str.strip,
    "data_path": str.strip,
    "analyst_column": str.strip,
    "seller_column": str.strip,
    "k_init": int,
    "pool_size": _optional_int,
    "val_fraction": float,
    "normalize_target": _bool,
    "lags": _int_list,
    "loss": str.strip,
    "wts": str.strip,
    "wts_d0": float,
    "wts_d1": float,
    "wts_eta": float,
    "wts_driver": str.strip,
    "wts_scale": float,
    "wtp": float,
    "budget": float,
    "improvement_target": _optional_float,
    "alpha": _optional_float,
    "strategy": lambda t: tuple(s.upper() for s in _str_list(t)),
    "pricing": lambda t: tuple(s.upper() for s in _str_list(t)),
    "rsc_applies_wtp_check": _bool,
    "committee_size": int,
    "bootstrap_fraction": float,
    "seed": int,
    "replications": int,
    "sweep_parameter": lambda t: t.strip() or None,
    "sweep_values": _float_list,
    "output_dir": lambda t: t.strip() or None,
    "emit": _str_list,
    "jobs": int,
}
assert set(_PARSERS) == {f.name for f in fields(ExperimentConfig)}


def parse_values(values: dict) -> dict:
    """Convert raw text values to typed fields. Raises ConfigError."""
    out = {}
    for key, text in values.items():
        key = key.strip().lower()
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            out[key] = _PARSERS[key](text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from exc
    return out


def read_config_file(path) -> dict:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not parser.has_section(SECTION):
        raise ConfigError(f"config {path} has no [{SECTION}] section")
    return dict(parser.items(SECTION))


def build_config(path=None, overrides: Optional[dict] = None, preset: Optional[str] = None) -> ExperimentConfig:
    """Preset defaults, then file values, then overrides (both as raw text)."""
    file_values = parse_values(read_config_file(path)) if path else {}
    override_values = parse_values(overrides or {})
    name = override_values.get("dataset") or file_values.get("dataset") or preset or "real_estate"
    if name not in PRESETS:
        raise ConfigError(f"dataset must be one of {sorted(PRESETS)}, got {name!r}")
    cfg = replace(PRESETS[name], **file_values)
    cfg = replace(cfg, **override_values)
    return cfg.validate()


def dump_config(cfg: ExperimentConfig) -> str:
    """INI text for ``cfg`` that reads back to the same values."""
    def text(v):
        if v is None:
            return ""
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, tuple):
            return ",".join(text(x) for x in v)
        if isinstance(v, float):
            return repr(v)
        return str(v)
    lines = [f"[{SECTION}]"] + [f"{f.name} = {text(getattr(cfg, f.name))}" for f in fields(cfg)]
    return "\n".join(lines) + "\n"
