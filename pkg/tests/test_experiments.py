import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from labelmarket.errors import EmptyInput, LengthMismatch
from labelmarket.experiments import (
    REAL_ESTATE_MARKET,
    Cell,
    SweepSpec,
    compare_strategies,
    default_cells,
    monte_carlo,
    read_raw_reps,
    real_estate_scenario,
    replication_streams,
    run_cells,
    summarize,
    sweep,
    write_raw_reps,
)
from labelmarket.market import make_offers, run_market
from labelmarket.stats import paired_comparison, percentile, wilcoxon_signed_rank


# ---------------------------------------------------------------- oracles


def average_ranks(values):
    """Ranks 1..n with ties sharing the mean of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [Fraction(0)] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        shared = Fraction(sum(range(i + 1, j + 2)), j - i + 1)
        for k in range(i, j + 1):
            ranks[order[k]] = shared
        i = j + 1
    return ranks


def enumeration_oracle(x, y):
    """Two-sided p as P(min(W+, W-) <= w_obs) over all 2^n sign patterns."""
    d = [a - b for a, b in zip(x, y) if a != b]
    if not d:
        return 1.0
    ranks = average_ranks([abs(v) for v in d])
    w_plus = sum(r for r, v in zip(ranks, d) if v > 0)
    w_obs = min(w_plus, sum(ranks) - w_plus)
    total = sum(ranks)
    hits = 0
    for signs in itertools.product((0, 1), repeat=len(d)):
        wp = sum(r for r, s in zip(ranks, signs) if s)
        if min(wp, total - wp) <= w_obs:
            hits += 1
    return hits / 2 ** len(d)


def interp_percentile(values, q):
    v = sorted(values)
    pos = q * (len(v) - 1)
    lo = int(pos)
    if lo == len(v) - 1:
        return v[lo]
    return v[lo] + (pos - lo) * (v[lo + 1] - v[lo])


# ---------------------------------------------------------------- Wilcoxon


def test_wilcoxon_all_positive_five():
    w, p = wilcoxon_signed_rank([1, 2, 3, 4, 5], [0, 0, 0, 0, 0])
    assert w == 0.0
    assert p == pytest.approx(0.0625, abs=1e-15)


def test_wilcoxon_all_zero_differences():
    assert wilcoxon_signed_rank([1.0, 2.0], [1.0, 2.0])[1] == 1.0


def test_wilcoxon_errors():
    with pytest.raises(LengthMismatch):
        wilcoxon_signed_rank([1, 2], [1])
    with pytest.raises(EmptyInput):
        wilcoxon_signed_rank([], [])


def wilcoxon_corpus():
    """Seeded inputs with n <= 12, including ties and zero differences."""
    rng = np.random.default_rng(2024)
    cases = []
    for n in range(1, 13):
        for _ in range(3):
            x = rng.normal(size=n)
            y = rng.normal(size=n)
            cases.append((x, y))
        # rounded values produce ties and zeros
        x = np.round(rng.normal(size=n), 0)
        y = np.round(rng.normal(size=n), 0)
        cases.append((x, y))
    return cases


def test_wilcoxon_matches_enumeration():
    for x, y in wilcoxon_corpus():
        assert wilcoxon_signed_rank(x, y)[1] == pytest.approx(enumeration_oracle(x, y), abs=1e-12)


def test_wilcoxon_exact_and_normal_agree_at_n20():
    rng = np.random.default_rng(7)
    for _ in range(20):
        x = rng.normal(size=20)
        y = rng.normal(loc=rng.uniform(-0.5, 0.5), size=20)
        _, exact = wilcoxon_signed_rank(x, y, method="exact")
        _, approx = wilcoxon_signed_rank(x, y, method="approx")
        assert abs(exact - approx) < 0.02


def test_wilcoxon_sign_invariance():
    rng = np.random.default_rng(11)
    for n in (5, 18, 40):
        x, y = rng.normal(size=n), rng.normal(size=n)
        assert wilcoxon_signed_rank(x, y) == wilcoxon_signed_rank(y, x)


# ---------------------------------------------------------------- percentile / paired


def test_percentile_examples():
    assert percentile([5], 0.0) == percentile([5], 0.7) == 5.0
    assert percentile([1, 2, 3, 4], 0.5) == 2.5
    with pytest.raises(EmptyInput):
        percentile([], 0.5)
    with pytest.raises(ValueError):
        percentile([1.0], 1.5)


def test_percentile_matches_sort_oracle():
    v = np.random.default_rng(100).normal(size=100).tolist()
    for q in (0.0, 0.1, 0.25, 0.5, 0.75, 1.0):
        assert percentile(v, q) == pytest.approx(interp_percentile(v, q), abs=1e-12)


def test_paired_comparison_examples():
    assert paired_comparison([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == (1.0, 0.0)
    base = np.random.default_rng(5).uniform(1, 3, size=50)
    p, med = paired_comparison(base - 1.0, base)
    assert med == pytest.approx(-1.0)
    assert p < 1e-8


def test_paired_comparison_drops_nan_pairs():
    p, med = paired_comparison([1.0, math.nan, 3.0], [0.0, 1.0, 1.0])
    assert med == 1.5


# ---------------------------------------------------------------- Monte Carlo


@pytest.fixture(scope="module")
def scenario():
    return real_estate_scenario()


def test_single_replication_equals_direct_run(scenario):
    cfg = REAL_ESTATE_MARKET.with_(strategy="VBAL", pricing="SC")
    summary = monte_carlo(scenario, cfg, 1, seed=3)
    split, market_seed = replication_streams(3, 0)
    staged = scenario.stage(split)
    out = run_market(staged, make_offers(staged.y_pool, scenario.wts_for(staged)),
                     cfg.with_(seed=market_seed), scenario.loss_for(staged))
    assert summary.incorporated == (out.n_incorporated,)
    assert summary.mean == summary.p25 == summary.p75 == out.n_incorporated
    assert summary.spent == (out.total_spent,)


def test_zero_budget_gives_zero_counts(scenario):
    s = monte_carlo(scenario, REAL_ESTATE_MARKET.with_(budget=0.0), 5)
    assert s.incorporated == (0,) * 5
    assert s.p25 == s.p75 == 0


def test_summary_recomputes_from_raw_csv(scenario, tmp_path):
    cells = default_cells(REAL_ESTATE_MARKET, strategies=("VBAL", "RSC"), pricings=("SC",))
    rows = run_cells(scenario, cells, 50, seed=1)
    write_raw_reps(tmp_path / "raw.csv", rows)
    back = read_raw_reps(tmp_path / "raw.csv")
    assert [r.raw() for r in back] == [r.raw() for r in rows]
    for key, summ in summarize(rows).items():
        counts = [r.incorporated for r in back if (r.strategy, r.pricing, r.param_value) == key]
        assert len(counts) == 50
        assert summ.mean == pytest.approx(sum(counts) / 50, abs=1e-12)
        assert summ.p25 == pytest.approx(interp_percentile(counts, 0.25), abs=1e-12)
        assert summ.p75 == pytest.approx(interp_percentile(counts, 0.75), abs=1e-12)


def test_sweep_grid_shape(scenario):
    spec = SweepSpec("budget", [10, 20], REAL_ESTATE_MARKET, replications=1)
    table = sweep(spec, scenario)
    assert len(table) == 2 * 3 * 2
    assert {k[2] for k in table} == {10.0, 20.0}
    single = sweep(SweepSpec("wtp", [1200], REAL_ESTATE_MARKET, replications=1), scenario)
    assert len(single) == 6 and all(s.replications == 1 for s in single.values())


def test_parallel_matches_sequential(scenario):
    cells = default_cells(REAL_ESTATE_MARKET)
    assert run_cells(scenario, cells, 4, seed=2, jobs=1) == run_cells(scenario, cells, 4, seed=2, jobs=2)


def test_cells_share_split_per_replication(scenario):
    rows = run_cells(scenario, default_cells(REAL_ESTATE_MARKET), 5, seed=0)
    by_rep = {}
    for r in rows:
        by_rep.setdefault(r.replication, set()).add(r.fingerprint)
    assert all(len(f) == 1 for f in by_rep.values())
    assert len(set.union(*by_rep.values())) == 5
    fixed = SweepSpec("wts_scale", [1, 2], REAL_ESTATE_MARKET, replications=3, resample=False,
                      strategies=("RSC",), pricings=("SC",))
    frozen = run_cells(scenario, fixed.cells(), 3, resample=False)
    assert len({r.fingerprint for r in frozen}) == 1


def test_compare_strategies_shape(scenario):
    rows = run_cells(scenario, default_cells(REAL_ESTATE_MARKET), 8, seed=0)
    table = compare_strategies(rows)
    assert [(t["pricing"], t["comparison"]) for t in table] == [
        ("BC", "VBAL vs RSC"), ("BC", "QBCAL vs RSC"), ("SC", "VBAL vs RSC"), ("SC", "QBCAL vs RSC")]
    assert all(0.0 <= t["p_value"] <= 1.0 for t in table)


def test_wts_scale_cells_scale_offers(scenario):
    cfg = REAL_ESTATE_MARKET.with_(strategy="RSC", pricing="SC")
    cells = [Cell(cfg.strategy, cfg.pricing, s, cfg, s) for s in (1.0, 2.0)]
    one, two = run_cells(scenario, cells, 1)
    if one.acquired and one.acquired == two.acquired:
        assert two.spent == pytest.approx(2 * one.spent)
