"""A load-forecasting buyer purchases a neighbour's meter readings.

The analyst forecasts its own hourly load from readings 1 to 7 days back.
A second building sells its lagged samples at a flat asking price of 30,
and the buyer measures value as the drop in validation error.

    python demos/energy_forecasting_market.py
"""
import argparse

from labelmarket import energy_scenario, make_offers, run_market
from labelmarket.data import seed_sequence
from labelmarket.experiments import ENERGY_MARKET
from labelmarket.market import improvement_trajectory


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    scenario = energy_scenario()
    staged = scenario.stage(seed_sequence(args.seed, "split"))
    offers = make_offers(staged.y_pool, scenario.wts_for(staged))
    loss = scenario.loss_for(staged)
    print(f"lags: {', '.join(staged.feature_names[1:])}")
    print(f"analyst samples: {staged.k}, seller samples on offer: {staged.pool_size}, "
          f"validation samples: {staged.X_val.shape[0]}")

    for pricing in ("BC", "SC"):
        for strategy in ("VBAL", "QBCAL", "RSC"):
            cfg = ENERGY_MARKET.with_(strategy=strategy, pricing=pricing, seed=args.seed)
            out = run_market(staged, offers, cfg, loss)
            print(f"{strategy:5s} {pricing}  queried {out.n_acquired:3d}  kept {out.n_incorporated:3d}  "
                  f"spent {out.total_spent:8.2f}  validation error down {out.improvement_pct:5.2f}%  "
                  f"budget exhausted: {out.budget_exhausted}  target met: {out.threshold_met}")
            if strategy == "VBAL" and pricing == "SC":
                traj = improvement_trajectory(out)
                marks = traj[:: max(1, len(traj) // 5)]
                print("      spend -> improvement: " +
                      ", ".join(f"{c:.0f} -> {g:.1f}%" for _, c, g in marks))


if __name__ == "__main__":
    main()
