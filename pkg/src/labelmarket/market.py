"""Single-buyer label market: selection, ex-post pricing, budget/threshold stop.

One loop serves all three strategies. Every queried label is acquired and
leaves the pool; whether it is incorporated into the model depends on the
realised loss reduction and on the willingness-to-pay check
eta <= phi * l. The check applies to VBAL and QBCAL always, and to RSC only
when ``rsc_applies_wtp_check`` is set.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import data as _data
from .errors import (
    ConfigConflict,
    ConfigError,
    DegenerateCommittee,
    PropertyViolation,
    SingularDesign,
    UntrainableInitialSet,
)
from .regress import FitState, LossKind, LossSpec, ols_fit, rank_one_refit
from .strategy import CommitteeSpec, committee_fits, committee_variance, select_rsc, select_vbal


class Pricing(str, Enum):
    BUYER_CENTRIC = "BC"
    SELLER_CENTRIC = "SC"


class Strategy(str, Enum):
    VBAL = "VBAL"
    QBCAL = "QBCAL"
    RSC = "RSC"


@dataclass(frozen=True)
class MarketConfig:
    """Market parameters.

    Give exactly one of ``improvement_target`` (relative, converted to an
    absolute threshold ``(1 - r) * L0`` at market start) or ``alpha``
    (absolute loss level). ``budget`` may be 0, which closes the market
    before any query.
    """

    wtp: float
    budget: float
    improvement_target: Optional[float] = None
    alpha: Optional[float] = None
    pricing: Pricing = Pricing.BUYER_CENTRIC
    strategy: Strategy = Strategy.VBAL
    rsc_applies_wtp_check: bool = False
    committee: CommitteeSpec = CommitteeSpec()
    seed: int = 0
    refit_sigma2: bool = False

    def __post_init__(self):
        object.__setattr__(self, "pricing", Pricing(self.pricing))
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if not self.wtp > 0:
            raise ConfigError("wtp must be positive")
        if not self.budget >= 0:
            raise ConfigError("budget must be nonnegative")
        if self.improvement_target is not None and not 0 < self.improvement_target < 1:
            raise ConfigError("improvement_target must lie in (0, 1)")
        if self.alpha is not None and self.alpha < 0:
            raise ConfigError("alpha must be nonnegative")

    def threshold(self, initial_loss: float) -> float:
        if (self.improvement_target is None) == (self.alpha is None):
            raise ConfigConflict("give exactly one of improvement_target or alpha")
        if self.alpha is not None:
            return float(self.alpha)
        return (1.0 - self.improvement_target) * initial_loss

    def with_(self, **changes) -> "MarketConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class SellerOffer:
    seller_id: str
    label: float
    wts: float

    def __post_init__(self):
        if not self.wts >= 0:
            raise ConfigError(f"seller {self.seller_id}: WTS must be nonnegative")


def make_offers(y_pool, wts, seller_ids=None) -> list:
    y_pool = np.asarray(y_pool, dtype=float)
    wts = np.asarray(wts, dtype=float)
    if y_pool.shape != wts.shape:
        raise ConfigError("labels and WTS must align")
    if seller_ids is None:
        seller_ids = [f"s{j:04d}" for j in range(len(y_pool))]
    return [SellerOffer(str(s), float(y), float(w)) for s, y, w in zip(seller_ids, y_pool, wts)]


@dataclass(frozen=True)
class TransactionRecord:
    step: int
    seller_id: str
    loss_reduction: float
    price: float
    acquired: bool
    incorporated: bool
    cumulative_cost: float
    loss_after: float
    pool_index: int = -1
    score: Optional[float] = None


@dataclass(frozen=True, eq=False)
class MarketOutcome:
    budget_exhausted: bool
    threshold_met: bool
    n_acquired: int
    n_incorporated: int
    total_spent: float
    improvement_pct: float
    ledger: tuple
    final_fit: FitState
    initial_loss: float
    final_loss: float
    alpha: float
    strategy: Strategy
    pricing: Pricing
    wtp: float
    budget: float

    @property
    def avg_cost(self) -> float:
        """Spend per incorporated label (nan when nothing was incorporated)."""
        return self.total_spent / self.n_incorporated if self.n_incorporated else math.nan

    def summary(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "pricing": self.pricing.value,
            "budget_exhausted": self.budget_exhausted,
            "threshold_met": self.threshold_met,
            "bought": self.n_incorporated,
            "acquired": self.n_acquired,
            "spent": self.total_spent,
            "improvement": self.improvement_pct,
            "avg_cost": None if not self.n_incorporated else self.avg_cost,
            "initial_loss": self.initial_loss,
            "final_loss": self.final_loss,
            "alpha": self.alpha,
        }


# ---------------------------------------------------------------- pricing rules


def purchase_decision(loss_reduction: float, wts: float, wtp: float) -> bool:
    """Buy iff the label improves the loss and eta / l <= phi."""
    if not wtp > 0:
        raise ConfigError("wtp must be positive")
    if not loss_reduction > 0:
        return False
    # same product as the buyer-centric price, so IR holds bit-exactly
    return wts <= wtp * loss_reduction


def price(loss_reduction, wts, wtp, scheme, incorporated: bool) -> float:
    if not wtp > 0:
        raise ConfigError("wtp must be positive")
    if Pricing(scheme) is Pricing.BUYER_CENTRIC:
        return wtp * loss_reduction if incorporated else 0.0
    return float(wts)


# ---------------------------------------------------------------- the loop


def _loss_fn(loss: LossSpec, sigma2_frozen: float, refit_sigma2: bool):
    if loss.kind is LossKind.PARAM_VARIANCE:
        if refit_sigma2:
            return lambda fit: loss.evaluate(fit, fit.sigma2_hat if not fit.sigma2_degenerate else sigma2_frozen)
        return lambda fit: loss.evaluate(fit, sigma2_frozen)
    return loss.evaluate


def run_market(pool: _data.LabelledPool, offers: Sequence[SellerOffer], cfg: MarketConfig,
               loss: Optional[LossSpec] = None) -> MarketOutcome:
    """Run the acquisition loop until the budget or the loss threshold binds.

    ``offers[j]`` belongs to pool row ``j``. ``loss`` defaults to the
    parameter-variance loss; pass ``LossSpec.mse(...)`` for validation MSE.
    The loop checks ``c < B`` before each query, so the last payment may
    take the total past the budget.
    """
    if loss is None:
        loss = LossSpec.param_variance()
    if len(offers) != pool.pool_size:
        raise ConfigError(f"{len(offers)} offers for {pool.pool_size} pool points")
    try:
        fit = ols_fit(pool.X_labelled, pool.y_labelled)
    except Exception as exc:
        raise UntrainableInitialSet(str(exc)) from exc

    # degenerate initial fits (rows <= cols) carry no noise estimate; fall back
    # to unit variance so the loss is the pure design term
    sigma2 = fit.sigma2_hat if not fit.sigma2_degenerate else 1.0
    loss_of = _loss_fn(loss, sigma2, cfg.refit_sigma2)
    initial_loss = loss_of(fit)
    alpha = cfg.threshold(initial_loss)

    X_pool = pool.X_pool
    live = list(range(pool.pool_size))
    X_lab = [pool.X_labelled]
    y_lab = [pool.y_labelled]
    current = initial_loss
    cost = 0.0
    ledger = []
    rsc_rng = _data.derive_rng(cfg.seed, "rsc")
    resamples = None
    use_wtp_check = cfg.strategy is not Strategy.RSC or cfg.rsc_applies_wtp_check

    while cost < cfg.budget and current > alpha and live:
        step = len(ledger) + 1
        cand = X_pool[live]
        score = None
        if cfg.strategy is Strategy.VBAL:
            choice = select_vbal(fit, cand)
            pos, score = choice.pool_index, choice.score
        elif cfg.strategy is Strategy.QBCAL:
            Xl = np.vstack(X_lab)
            yl = np.concatenate(y_lab)
            try:
                stream = _data.seed_sequence(cfg.seed, "bootstrap", step)
                reuse = None if cfg.committee.refresh else resamples
                fits, used = committee_fits(Xl, yl, cfg.committee, stream, reuse)
                if resamples is None:
                    resamples = used
                scores = committee_variance(np.stack([cand @ f.beta for f in fits]))
                pos = int(np.argmax(scores))
                score = float(scores[pos])
            except DegenerateCommittee:
                pos = select_rsc(len(live), rsc_rng).pool_index
        else:
            pos = select_rsc(len(live), rsc_rng).pool_index

        j = live.pop(pos)
        offer = offers[j]
        x = X_pool[j]
        try:
            trial = rank_one_refit(fit, x, offer.label)
            after = loss_of(trial)
        except SingularDesign:
            trial, after = None, current
        reduction = current - after
        if use_wtp_check:
            incorporated = purchase_decision(reduction, offer.wts, cfg.wtp)
        else:
            incorporated = reduction > 0
        paid = price(reduction, offer.wts, cfg.wtp, cfg.pricing, incorporated)
        if incorporated:
            fit = trial
            current = after
            X_lab.append(x[None, :])
            y_lab.append(np.array([offer.label]))
        cost += paid
        ledger.append(TransactionRecord(
            step=step,
            seller_id=offer.seller_id,
            loss_reduction=float(reduction),
            price=float(paid),
            acquired=True,
            incorporated=bool(incorporated),
            cumulative_cost=cost,
            loss_after=float(current),
            pool_index=int(j),
            score=score,
        ))

    improvement = 100.0 * (initial_loss - current) / initial_loss if initial_loss > 0 else 0.0
    return MarketOutcome(
        budget_exhausted=cost >= cfg.budget,
        threshold_met=current <= alpha,
        n_acquired=len(ledger),
        n_incorporated=sum(r.incorporated for r in ledger),
        total_spent=cost,
        improvement_pct=improvement,
        ledger=tuple(ledger),
        final_fit=fit,
        initial_loss=initial_loss,
        final_loss=current,
        alpha=alpha,
        strategy=cfg.strategy,
        pricing=cfg.pricing,
        wtp=cfg.wtp,
        budget=cfg.budget,
    )


# ---------------------------------------------------------------- properties


@dataclass(frozen=True)
class PropertyReport:
    budget_balance: bool
    individual_rationality: bool
    zero_element: Optional[bool]  # None under seller-centric pricing
    pre_purchase_budget: bool
    symmetry: Optional[bool]  # None when no rerun was requested

    @property
    def ok(self) -> bool:
        return all(v is not False for v in (
            self.budget_balance, self.individual_rationality, self.zero_element,
            self.pre_purchase_budget, self.symmetry))


def check_ledger(ledger, wts_by_seller: dict, pricing, budget, total_spent=None, wtp=None):
    """Mechanical market properties of a ledger. Raises PropertyViolation.

    Checks budget balance (running sum of prices), individual rationality
    for incorporated labels, the buyer-centric zero-element rule, the
    pre-purchase budget check and, when ``wtp`` is given, the price rule
    itself.
    """
    pricing = Pricing(pricing)
    running = 0.0
    for rec in ledger:
        if running >= budget:
            raise PropertyViolation("pre-purchase budget", rec.step,
                                    f"queried with cumulative cost {running!r} >= budget {budget!r}")
        running += rec.price
        if running != rec.cumulative_cost:
            raise PropertyViolation("budget balance", rec.step,
                                    f"cumulative cost {rec.cumulative_cost!r} != running sum {running!r}")
        eta = wts_by_seller[rec.seller_id]
        if rec.incorporated and not rec.price >= eta:
            raise PropertyViolation("individual rationality", rec.step,
                                    f"seller {rec.seller_id} paid {rec.price!r} < WTS {eta!r}")
        if rec.incorporated and not rec.loss_reduction > 0:
            raise PropertyViolation("incorporation", rec.step, "incorporated a non-improving label")
        if pricing is Pricing.BUYER_CENTRIC:
            if rec.loss_reduction <= 0 and rec.price != 0:
                raise PropertyViolation("zero-element", rec.step,
                                        f"seller {rec.seller_id} paid {rec.price!r} for l_j={rec.loss_reduction!r}")
            if not rec.incorporated and rec.price != 0:
                raise PropertyViolation("zero-element", rec.step, "rejected label was paid")
            if wtp is not None and rec.incorporated and rec.price != wtp * rec.loss_reduction:
                raise PropertyViolation("price rule", rec.step, "BC price != wtp * l_j")
        elif rec.price != eta:
            raise PropertyViolation("price rule", rec.step, f"SC price {rec.price!r} != WTS {eta!r}")
    if total_spent is not None and total_spent != running:
        raise PropertyViolation("budget balance", None,
                                f"total_spent {total_spent!r} != sum of prices {running!r}")
    return True


def check_market_properties(outcome: MarketOutcome, offers, cfg: MarketConfig,
                            pool: Optional[_data.LabelledPool] = None,
                            loss: Optional[LossSpec] = None) -> PropertyReport:
    """Verify budget balance, individual rationality, zero-element and the
    pre-purchase budget check on a finished run.

    With ``pool`` given, symmetry at selection is also checked: the market is
    rerun with every seller id replaced by a fresh clone id, and the sequence
    of selected pool rows, decisions and prices must not change.
    """
    wts = {o.seller_id: o.wts for o in offers}
    check_ledger(outcome.ledger, wts, cfg.pricing, cfg.budget, outcome.total_spent, cfg.wtp)
    symmetric = None
    if pool is not None:
        clones = [SellerOffer(f"clone-{k}-{o.seller_id}", o.label, o.wts) for k, o in enumerate(offers)]
        rerun = run_market(pool, clones, cfg, loss)
        a = [(r.pool_index, r.incorporated, r.price, r.loss_reduction) for r in outcome.ledger]
        b = [(r.pool_index, r.incorporated, r.price, r.loss_reduction) for r in rerun.ledger]
        if a != b:
            step = next((i + 1 for i, (u, v) in enumerate(zip(a, b)) if u != v), min(len(a), len(b)) + 1)
            raise PropertyViolation("symmetry", step, "selection depends on seller identity")
        symmetric = True
    return PropertyReport(
        budget_balance=True,
        individual_rationality=True,
        zero_element=True if cfg.pricing is Pricing.BUYER_CENTRIC else None,
        pre_purchase_budget=True,
        symmetry=symmetric,
    )


# ---------------------------------------------------------------- analysis


def cost_efficiency_trajectory(ledger) -> list:
    """Cumulative loss reduction bought per unit spent, one entry per record
    once any money has been spent."""
    out = []
    gained = 0.0
    spent = 0.0
    for rec in ledger:
        if rec.incorporated:
            gained += rec.loss_reduction
        spent += rec.price
        if spent != 0:
            out.append(gained / spent)
    return out


def improvement_trajectory(outcome: MarketOutcome) -> list:
    """(step, cumulative_cost, improvement_pct) rows, starting from step 0."""
    L0 = outcome.initial_loss
    rows = [(0, 0.0, 0.0)]
    for rec in outcome.ledger:
        pct = 100.0 * (L0 - rec.loss_after) / L0 if L0 > 0 else 0.0
        rows.append((rec.step, rec.cumulative_cost, pct))
    return rows


def seller_revenue_comparison(outcome_bc: MarketOutcome, outcome_sc: MarketOutcome, offers=None) -> list:
    """Per-seller (seller_id, revenue_bc, revenue_sc), sorted by BC revenue
    descending, then SC revenue descending, then seller id."""
    def revenue(outcome):
        rev = {}
        for rec in outcome.ledger:
            rev[rec.seller_id] = rev.get(rec.seller_id, 0.0) + rec.price
        return rev

    bc, sc = revenue(outcome_bc), revenue(outcome_sc)
    sellers = set(bc) | set(sc)
    if offers is not None:
        sellers |= {o.seller_id for o in offers}
    rows = [(s, bc.get(s, 0.0), sc.get(s, 0.0)) for s in sellers]
    rows.sort(key=lambda r: (-r[1], -r[2], r[0]))
    return rows


# ---------------------------------------------------------------- ledger I/O

LEDGER_HEADER = ("step", "seller_id", "l_j", "p_j", "acquired", "incorporated", "cumulative_cost", "loss_after")


def write_ledger(path, ledger):
    _data.write_csv(path, LEDGER_HEADER, (
        (r.step, r.seller_id, r.loss_reduction, r.price, r.acquired, r.incorporated,
         r.cumulative_cost, r.loss_after) for r in ledger))


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("true", "1"):
        return True
    if t in ("false", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_ledger(path) -> list:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != LEDGER_HEADER:
            raise ValueError(f"unexpected ledger header {reader.fieldnames}")
        return [TransactionRecord(
            step=int(row["step"]),
            seller_id=row["seller_id"],
            loss_reduction=float(row["l_j"]),
            price=float(row["p_j"]),
            acquired=_parse_bool(row["acquired"]),
            incorporated=_parse_bool(row["incorporated"]),
            cumulative_cost=float(row["cumulative_cost"]),
            loss_after=float(row["loss_after"]),
        ) for row in reader]
