"""Walk through one real-estate label market.

A buyer holds 80 labelled house sales and may buy price labels for the
remaining listings. Each strategy runs under both pricing schemes on the
same split, then the per-seller revenue of the two schemes is compared.
Seed 0 shows the one-shot case: the first VBAL query lands on an extreme
listing whose value-based price alone overruns the budget.

    python demos/real_estate_market.py
    python demos/real_estate_market.py --seed 0
"""
import argparse

from labelmarket import make_offers, real_estate_scenario, run_market
from labelmarket.data import seed_sequence
from labelmarket.experiments import REAL_ESTATE_MARKET
from labelmarket.market import cost_efficiency_trajectory, seller_revenue_comparison


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=4)
    args = parser.parse_args()

    scenario = real_estate_scenario()
    staged = scenario.stage(seed_sequence(args.seed, "split"))
    offers = make_offers(staged.y_pool, scenario.wts_for(staged))
    loss = scenario.loss_for(staged)
    print(f"labelled rows: {staged.k}, pool: {staged.pool_size}, "
          f"asking prices from {min(o.wts for o in offers):.2f} to {max(o.wts for o in offers):.2f}")

    outcomes = {}
    print(f"\n{'strategy':8s} {'pricing':7s} {'bought':>6s} {'queried':>7s} {'spent':>7s} {'avg':>6s} {'gain %':>7s}")
    for strategy in ("VBAL", "QBCAL", "RSC"):
        for pricing in ("BC", "SC"):
            cfg = REAL_ESTATE_MARKET.with_(strategy=strategy, pricing=pricing, seed=args.seed)
            out = run_market(staged, offers, cfg, loss)
            outcomes[(strategy, pricing)] = out
            print(f"{strategy:8s} {pricing:7s} {out.n_incorporated:6d} {out.n_acquired:7d} "
                  f"{out.total_spent:7.2f} {out.avg_cost:6.2f} {out.improvement_pct:7.2f}")

    vbal_bc = outcomes[("VBAL", "BC")]
    print("\nVBAL under buyer-centric pricing, step by step:")
    for r in vbal_bc.ledger:
        mark = "kept" if r.incorporated else "dropped"
        print(f"  step {r.step:2d}  seller {r.seller_id:>5s}  loss drop {r.loss_reduction:.5f}  "
              f"paid {r.price:.3f}  total {r.cumulative_cost:.3f}  {mark}")
    eff = cost_efficiency_trajectory(vbal_bc.ledger)
    if eff:
        print(f"loss reduction per unit spent ends at {eff[-1]:.6f} (1/wtp = {1 / REAL_ESTATE_MARKET.wtp:.6f})")

    rows = seller_revenue_comparison(vbal_bc, outcomes[("VBAL", "SC")], offers)
    paid = [r for r in rows if r[1] or r[2]]
    print(f"\nsellers paid under either scheme: {len(paid)}")
    for sid, bc, sc in paid[:10]:
        print(f"  {sid:>5s}  BC {bc:6.3f}  SC {sc:6.3f}")


if __name__ == "__main__":
    main()
