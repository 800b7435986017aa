import math

import numpy as np
import pytest
from conftest import make_pool, random_market_data

from labelmarket.errors import ConfigConflict, ConfigError, PropertyViolation, UntrainableInitialSet
from labelmarket.market import (
    MarketConfig,
    Pricing,
    SellerOffer,
    Strategy,
    TransactionRecord,
    check_ledger,
    check_market_properties,
    cost_efficiency_trajectory,
    make_offers,
    price,
    purchase_decision,
    read_ledger,
    run_market,
    seller_revenue_comparison,
    write_ledger,
)
from labelmarket.regress import LossSpec, param_variance_loss
from labelmarket.strategy import upv_scores


def record(step, sid, l, p, inc, cum, after=0.0):
    return TransactionRecord(step, sid, l, p, True, inc, cum, after)


def base_cfg(**kw):
    args = dict(wtp=10.0, budget=1.0, improvement_target=0.5)
    args.update(kw)
    return MarketConfig(**args)


# ---------------------------------------------------------------- rules


def test_purchase_decision_examples():
    assert purchase_decision(0.0, 0.3, 1200) is False
    assert purchase_decision(0.001, 0.6, 1200) is True
    assert purchase_decision(0.001, 2.4, 1200) is False
    assert purchase_decision(-0.1, 0.0, 1200) is False


def test_price_examples():
    assert price(0.001, 0.45, 1200, Pricing.BUYER_CENTRIC, True) == pytest.approx(1.2)
    assert price(0.001, 0.45, 1200, "BC", False) == 0.0
    assert price(-0.5, 0.45, 1200, "SC", False) == 0.45


def test_rules_reject_nonpositive_wtp():
    with pytest.raises(ConfigError):
        purchase_decision(0.1, 0.1, 0.0)
    with pytest.raises(ConfigError):
        MarketConfig(wtp=-1.0, budget=1.0, improvement_target=0.2)


def test_exactly_one_threshold_form():
    with pytest.raises(ConfigConflict):
        MarketConfig(wtp=1.0, budget=1.0, improvement_target=0.2, alpha=0.1).threshold(1.0)
    with pytest.raises(ConfigConflict):
        MarketConfig(wtp=1.0, budget=1.0).threshold(1.0)
    assert MarketConfig(wtp=1.0, budget=1.0, improvement_target=0.2).threshold(2.0) == pytest.approx(1.6)
    assert MarketConfig(wtp=1.0, budget=1.0, alpha=0.3).threshold(2.0) == 0.3


# ---------------------------------------------------------------- the loop


def test_zero_budget_buys_nothing(small_market):
    pool, wts = small_market
    out = run_market(pool, make_offers(pool.y_pool, wts), base_cfg(budget=0.0))
    assert out.n_acquired == 0 and out.improvement_pct == 0.0
    assert out.budget_exhausted and not out.threshold_met


def test_empty_pool_stops_immediately(small_market):
    pool, _ = small_market
    empty = make_pool(pool.X_labelled, pool.y_labelled, np.empty((0, 4)), [])
    out = run_market(empty, [], base_cfg())
    assert out.n_acquired == 0 and not out.threshold_met
    out = run_market(empty, [], base_cfg(improvement_target=None, alpha=1e9))
    assert out.threshold_met


def test_untrainable_initial_set():
    bad = make_pool(np.empty((0, 2)), [], [[1.0, 0.0]], [1.0])
    with pytest.raises(UntrainableInitialSet):
        run_market(bad, make_offers([1.0], [0.1]), base_cfg())


def test_offers_must_cover_pool(small_market):
    pool, wts = small_market
    with pytest.raises(ConfigError):
        run_market(pool, make_offers(pool.y_pool[:3], wts[:3]), base_cfg())


@pytest.mark.parametrize("strategy", list(Strategy))
@pytest.mark.parametrize("pricing", list(Pricing))
def test_ledger_invariants(strategy, pricing):
    for seed in range(8):
        pool, wts = random_market_data(seed)
        offers = make_offers(pool.y_pool, wts)
        cfg = base_cfg(strategy=strategy, pricing=pricing, seed=seed, rsc_applies_wtp_check=True)
        out = run_market(pool, offers, cfg)
        report = check_market_properties(out, offers, cfg, pool)
        assert report.ok
        # only the last record may push the total past the budget
        assert all(r.cumulative_cost - r.price < cfg.budget for r in out.ledger)
        inc = [r for r in out.ledger if r.incorporated]
        losses = [r.loss_after for r in inc]
        assert all(b <= a for a, b in zip(losses, losses[1:]))
        if pricing is Pricing.BUYER_CENTRIC:
            assert out.total_spent == pytest.approx(cfg.wtp * sum(r.loss_reduction for r in inc), abs=1e-9)
        else:
            total = 0.0
            for r in out.ledger:
                total += offers[r.pool_index].wts
            assert out.total_spent == total
        # the stored improvement agrees with the final fit
        final = out.final_loss
        assert out.improvement_pct == pytest.approx(100 * (out.initial_loss - final) / out.initial_loss, abs=1e-9)
        assert out.threshold_met == (final <= out.alpha)


def test_final_fit_reproduces_final_loss(small_market):
    pool, wts = small_market
    out = run_market(pool, make_offers(pool.y_pool, wts), base_cfg(strategy="VBAL"))
    # sigma^2 is frozen at the initial fit, so the loss is trace(A_final) * sigma2_0
    from labelmarket.regress import ols_fit
    sigma2 = ols_fit(pool.X_labelled, pool.y_labelled).sigma2_hat
    assert param_variance_loss(out.final_fit, sigma2) == pytest.approx(out.final_loss, rel=1e-9)


def test_rejected_points_leave_the_pool(small_market):
    pool, wts = small_market
    out = run_market(pool, make_offers(pool.y_pool, wts), base_cfg(budget=1e9, improvement_target=0.99))
    ids = [r.seller_id for r in out.ledger]
    assert len(ids) == len(set(ids)) == pool.pool_size


def test_rsc_without_check_only_needs_improvement():
    pool, _ = random_market_data(3)
    wts = np.full(pool.pool_size, 1e6)  # nobody would pass the WTP check
    offers = make_offers(pool.y_pool, wts)
    plain = run_market(pool, offers, base_cfg(strategy="RSC", budget=1e12))
    checked = run_market(pool, offers, base_cfg(strategy="RSC", budget=1e12, rsc_applies_wtp_check=True))
    assert plain.n_incorporated > 0
    assert checked.n_incorporated == 0


def test_determinism_byte_identical(tmp_path, small_market):
    pool, wts = small_market
    offers = make_offers(pool.y_pool, wts)
    for strategy in Strategy:
        cfg = base_cfg(strategy=strategy, seed=5)
        write_ledger(tmp_path / "a.csv", run_market(pool, offers, cfg).ledger)
        write_ledger(tmp_path / "b.csv", run_market(pool, offers, cfg).ledger)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_ledger_round_trip(tmp_path, small_market):
    pool, wts = small_market
    out = run_market(pool, make_offers(pool.y_pool, wts), base_cfg(pricing="SC", strategy="QBCAL"))
    write_ledger(tmp_path / "l.csv", out.ledger)
    back = read_ledger(tmp_path / "l.csv")
    strip = lambda r: (r.step, r.seller_id, r.loss_reduction, r.price, r.acquired, r.incorporated,
                       r.cumulative_cost, r.loss_after)
    assert [strip(r) for r in back] == [strip(r) for r in out.ledger]


def test_mse_loss_market():
    pool, wts = random_market_data(9)
    loss = LossSpec.mse(pool.X_val, pool.y_val)
    out = run_market(pool, make_offers(pool.y_pool, wts), base_cfg(improvement_target=0.1, budget=5.0), loss)
    assert all(r.loss_reduction > 0 for r in out.ledger if r.incorporated)


def test_identical_points_get_identical_scores():
    pool, wts = random_market_data(4)
    X = np.vstack([pool.X_pool, pool.X_pool[7]])
    twin = make_pool(pool.X_labelled, pool.y_labelled, X, np.append(pool.y_pool, pool.y_pool[7]))
    from labelmarket.regress import ols_fit
    scores = upv_scores(ols_fit(twin.X_labelled, twin.y_labelled).info_inverse, twin.X_pool)
    assert scores[7] == scores[-1]


# ---------------------------------------------------------------- property checks


def test_check_ledger_flags_violations():
    wts = {"a": 0.5}
    with pytest.raises(PropertyViolation, match="individual rationality"):
        check_ledger([record(1, "a", 0.1, 0.2, True, 0.2)], wts, "BC", 10.0)
    with pytest.raises(PropertyViolation, match="zero-element"):
        check_ledger([record(1, "a", -0.1, 0.2, False, 0.2)], wts, "BC", 10.0)
    with pytest.raises(PropertyViolation, match="budget balance"):
        check_ledger([record(1, "a", 0.1, 0.6, True, 0.7)], wts, "BC", 10.0)
    with pytest.raises(PropertyViolation, match="pre-purchase"):
        check_ledger([record(1, "a", 0.1, 0.6, True, 0.6), record(2, "a", 0.1, 0.6, True, 1.2)], wts, "BC", 0.5)
    with pytest.raises(PropertyViolation, match="price rule"):
        check_ledger([record(1, "a", 0.1, 0.4, False, 0.4)], wts, "SC", 10.0)


def test_sc_rejected_record_still_counts():
    ledger = [record(1, "a", -0.1, 0.5, False, 0.5)]
    assert check_ledger(ledger, {"a": 0.5}, "SC", 10.0, total_spent=0.5)


def test_symmetry_check_detects_identity_dependence(small_market):
    pool, wts = small_market
    offers = make_offers(pool.y_pool, wts)
    cfg = base_cfg()
    out = run_market(pool, offers, cfg)
    assert check_market_properties(out, offers, cfg, pool).symmetry is True


# ---------------------------------------------------------------- analysis


def test_cost_efficiency_examples():
    assert cost_efficiency_trajectory([record(1, "a", 2.0, 4.0, True, 4.0)]) == [0.5]
    phi = 1200.0
    ls = [0.0013, 0.0021, 0.0007]
    ledger, cum = [], 0.0
    for i, l in enumerate(ls):
        cum += phi * l
        ledger.append(record(i + 1, f"s{i}", l, phi * l, True, cum))
    assert cost_efficiency_trajectory(ledger) == pytest.approx([1 / phi] * 3, rel=1e-12)


def test_cost_efficiency_mixed_ledger():
    ledger = [
        record(1, "a", -0.5, 0.3, False, 0.3),
        record(2, "b", 0.2, 0.4, True, 0.7),
        record(3, "c", 0.1, 0.5, True, 1.2),
    ]
    assert cost_efficiency_trajectory(ledger) == pytest.approx([0.0, 0.2 / 0.7, 0.3 / 1.2], abs=1e-12)
    assert cost_efficiency_trajectory([record(1, "a", -0.5, 0.0, False, 0.0)]) == []


def _outcome_with(ledger, pricing):
    from labelmarket.market import MarketOutcome
    return MarketOutcome(True, False, len(ledger), 0, 0.0, 0.0, tuple(ledger), None, 1.0, 1.0, 0.5,
                         Strategy.VBAL, Pricing(pricing), 1200.0, 1.0)


def test_seller_revenue_examples():
    bc = _outcome_with([record(1, "a", 0.002, 1200 * 0.002, True, 2.4)], "BC")
    sc = _outcome_with([record(1, "a", 0.002, 0.5, True, 0.5)], "SC")
    rows = seller_revenue_comparison(bc, sc, [SellerOffer("a", 0.0, 0.5), SellerOffer("z", 0.0, 0.1)])
    assert rows == [("a", pytest.approx(2.4), 0.5), ("z", 0.0, 0.0)]


def test_seller_revenue_matches_groupby(small_market):
    pool, wts = small_market
    offers = make_offers(pool.y_pool, wts)
    bc = run_market(pool, offers, base_cfg(pricing="BC", strategy="RSC", seed=2))
    sc = run_market(pool, offers, base_cfg(pricing="SC", strategy="RSC", seed=2))
    rows = seller_revenue_comparison(bc, sc, offers)
    got = {s: (a, b) for s, a, b in rows}
    for out, k in ((bc, 0), (sc, 1)):
        oracle = {}
        for r in out.ledger:
            oracle[r.seller_id] = oracle.get(r.seller_id, 0.0) + r.price
        for sid, v in oracle.items():
            assert got[sid][k] == v
    assert [r[1] for r in rows] == sorted((r[1] for r in rows), reverse=True)


def test_summary_fields(small_market):
    pool, wts = small_market
    out = run_market(pool, make_offers(pool.y_pool, wts), base_cfg())
    s = out.summary()
    for key in ("budget_exhausted", "threshold_met", "bought", "spent", "improvement", "avg_cost"):
        assert key in s
    if out.n_incorporated:
        assert s["avg_cost"] == out.total_spent / out.n_incorporated
    else:
        assert math.isnan(out.avg_cost)
