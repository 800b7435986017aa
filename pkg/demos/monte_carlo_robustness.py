"""How stable are the strategies when the data split changes?

Resamples the real-estate split many times, runs all six markets on each
split, prints the spread of the number of labels bought, and tests whether
the active strategies are cheaper per label than random choice.

    python demos/monte_carlo_robustness.py --replications 100
"""
import argparse

from labelmarket import real_estate_scenario
from labelmarket.experiments import (
    REAL_ESTATE_MARKET,
    compare_strategies,
    default_cells,
    histogram_bins,
    run_cells,
    summarize,
)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--replications", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    rows = run_cells(real_estate_scenario(), default_cells(REAL_ESTATE_MARKET), args.replications,
                     seed=args.seed, jobs=args.jobs)

    print("labels bought, mean [p25--p75]:")
    for (s, p, _), summ in sorted(summarize(rows).items(), key=lambda kv: (kv[0][1], kv[0][0])):
        print(f"  {s:5s} {p}  {summ.purchased.label()}  IQR {summ.purchased.iqr:g}")

    print("\nhistogram of labels bought under seller-centric pricing:")
    for s, p, _, count, n in histogram_bins(rows):
        if p == "SC":
            print(f"  {s:5s} {count:3d} {'#' * n}")

    print("\naverage cost per label against random choice (paired Wilcoxon):")
    for t in compare_strategies(rows, baseline="RSC", metric="avg_cost"):
        print(f"  {t['pricing']} {t['comparison']:13s} median difference {t['median_delta']:+.3f}  "
              f"p = {t['p_value']:.2g}  ({t['n_pairs']} pairs)")


if __name__ == "__main__":
    main()
