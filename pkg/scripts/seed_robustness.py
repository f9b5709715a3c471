"""Steady-state error of each strategy across training-data seeds.

    python scripts/seed_robustness.py --seeds 0 1 2 3 4 --out seeds.csv
"""
import argparse
import csv

from pmsm_gp.aggregation import STRATEGIES
from pmsm_gp.config import load_config
from pmsm_gp.sim import compare


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", default="paper.toml")
    ap.add_argument("--seeds", type=int, nargs="+", default=list(range(5)))
    ap.add_argument("--out", default=None, help="optional CSV of steady-state errors")
    args = ap.parse_args()

    cfg = load_config(args.config)
    table = []
    for seed in args.seeds:
        rows = compare(cfg, seed=seed, count_violations=False)
        steady = {r.strategy: (r.metrics.steady_e if r.metrics else float("nan")) for r in rows}
        ordered = steady["none"] > steady["moe"] > steady["gpoe"]
        close = max(steady["coaoe-mean"], steady["coaoe-eta"]) <= 1.1 * steady["gpoe"]
        table.append([seed] + [steady[s] for s in STRATEGIES] + [ordered and close])
        print(f"seed {seed}: " + "  ".join(f"{s}={steady[s]:.4g}" for s in STRATEGIES)
              + f"  ordering={'ok' if ordered and close else 'broken'}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["seed", *STRATEGIES, "ordering_holds"])
            w.writerows(table)


if __name__ == "__main__":
    main()
