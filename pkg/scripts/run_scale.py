"""Balanced and imbalanced runs at desk or full scale, with a trend check.

    python scripts/run_scale.py --preset desk --out results/desk
    python scripts/run_scale.py --preset full --out results/full --cache results/cache
"""
import argparse
import logging
import time

from scipy.stats import spearmanr

from geneteams.pipeline import IMBALANCED, desk_preset, full_preset, run_experiment
from geneteams.report import emit_report


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--preset", choices=("desk", "full"), default="desk")
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--bernoulli", action="store_true", help="per-sample carrier draws instead of exact counts")
    ap.add_argument("--imbalanced", action="store_true", help="also run the 4:1 ratio schedule")
    ap.add_argument("--out", default="results")
    ap.add_argument("--cache")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO)

    make = desk_preset if args.preset == "desk" else full_preset
    cfg = make(runs=args.runs, seed=args.seed, name=f"{args.preset}-balanced")
    cfg.data.exact_counts = not args.bernoulli
    t0 = time.time()
    report = run_experiment(cfg, cache_dir=args.cache)
    emit_report(report, f"{args.out}/balanced")
    sizes = [int(s.size) for s in report.summaries]
    rho = spearmanr(sizes, report.series("oa")).statistic
    for s in report.summaries:
        print(f"S={s.size:>3}  OA {s.oa:6.2f}  CV {s.cv_accuracy:6.2f}  AUC {s.auc:.4f}  MCC {s.metrics['mcc']}")
    print(f"spearman(OA, S) = {rho:.3f}; elapsed {time.time() - t0:.0f}s")

    if args.imbalanced:
        n_pat = cfg.data.n_patient // 4
        icfg = make(runs=args.runs, seed=args.seed, name=f"{args.preset}-imbalanced", mode=IMBALANCED,
                    schedule=[0.1, 0.2, 0.3, 0.4, 0.5], patient_subset=n_pat)
        icfg.data.exact_counts = not args.bernoulli
        irep = run_experiment(icfg, cache_dir=args.cache)
        emit_report(irep, f"{args.out}/imbalanced")
        for s in irep.summaries:
            m = s.metrics
            print(f"{s.size:>4}  OA {s.oa:6.2f}  recall {m['recall']}  spec {m['specificity']}  MCC {m['mcc']}")
        print(f"elapsed {time.time() - t0:.0f}s")


if __name__ == "__main__":
    main()
