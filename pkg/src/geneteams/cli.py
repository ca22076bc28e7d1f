"""Command line entry point: datagen, cubes, features, train, eval, experiment.

Exit codes: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .cgr import build_cube, read_cube, write_cube, write_pgm
from .datagen import CohortSpec, cohort_audit, generate_cohort, load_cohort, save_cohort
from .empr import decompose, feature_vector, mean_cube_supports, read_features_csv, reconstruct, write_features_csv
from .metrics import confusion, overall_accuracy, roc_and_auc, summary_metrics
from .pipeline import DataConfig, ExperimentConfig, build_cohort, run_experiment
from .report import emit_report
from .seq import PATIENT, read_fasta_file
from .svm import SvmHyperparams, decision_values, fit_svm, grid_search_cv, load_model, save_model

log = logging.getLogger("geneteams")

CUBE_INDEX = "cubes.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _labels_pm1(labels) -> np.ndarray:
    return np.array([1 if l == PATIENT else -1 for l in labels])


def cmd_datagen(args) -> None:
    data = DataConfig()
    if args.spec:
        with open(args.spec) as fh:
            data = DataConfig(**json.load(fh))
    cfg = ExperimentConfig(data=data, seed=args.seed)
    if args.reference:
        d = cfg.data
        spec = CohortSpec(read_fasta_file(args.reference), d.n_control, d.n_patient, d.maf_polymorphic,
                          d.maf_pathogenic_control, d.maf_pathogenic_patient, d.poly_interval,
                          d.patho_interval, seed=args.seed, exact_counts=d.exact_counts)
        cohort = generate_cohort(spec)
    else:
        cohort = build_cohort(cfg)
    save_cohort(cohort, args.out)
    audit = cohort_audit(cohort) if args.audit else None
    if audit is not None and not audit.ok:
        raise ValueError(f"{len(audit.flagged)} sites deviate from the requested carrier counts")
    print(f"wrote {len(cohort)} samples x {len(cohort.gene_ids)} genes to {args.out}")


def cmd_cubes(args) -> None:
    cohort = load_cohort(args.cohort)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    wanted = {}
    for item in args.pgm or []:
        sid, _, k = item.partition(":")
        wanted.setdefault(sid, []).append(int(k or 0))
    for i, sid in enumerate(cohort.sample_ids):
        cube = build_cube(cohort.gene_codes(i), args.resolution)
        write_cube(out / f"{sid}.cgr", cube)
        for k in wanted.pop(sid, []):
            write_pgm(out / f"{sid}_gene{k}.pgm", cube[:, :, k])
    if wanted:
        raise ValueError(f"unknown sample ids for --pgm: {sorted(wanted)}")
    with open(out / CUBE_INDEX, "w") as fh:
        json.dump({"samples": [{"id": s, "label": l} for s, l in zip(cohort.sample_ids, cohort.labels)],
                   "genes": cohort.gene_ids, "resolution": args.resolution}, fh, indent=2)
        fh.write("\n")
    print(f"wrote {len(cohort)} cubes to {out}")


def cmd_features(args) -> None:
    root = Path(args.cubes)
    with open(root / CUBE_INDEX) as fh:
        index = json.load(fh)
    ids = [s["id"] for s in index["samples"]]
    labels = [s["label"] for s in index["samples"]]
    supports = None
    if args.shared_supports:
        supports = mean_cube_supports(read_cube(root / f"{sid}.cgr") for sid in ids)
    rows, checks = [], []
    for sid in ids:
        cube = read_cube(root / f"{sid}.cgr")
        d = decompose(cube, supports=supports, full=args.depth == "full")
        rows.append(feature_vector(d))
        if args.depth == "full":
            err = np.linalg.norm(reconstruct(d) - cube) / max(np.linalg.norm(cube.astype(float)), 1e-300)
            checks.append((sid, float(err)))
    write_features_csv(args.out, ids, labels, np.vstack(rows))
    if checks:
        worst = max(e for _, e in checks)
        print(f"full decomposition: worst relative reconstruction error {worst:.3e}")
    print(f"wrote {len(ids)} feature rows to {args.out}")


def cmd_train(args) -> None:
    ids, labels, X = read_features_csv(args.features)
    y = _labels_pm1(labels)
    if args.c is not None and args.gamma is not None:
        params, cv = SvmHyperparams(args.c, args.gamma), None
    elif args.c is None and args.gamma is None:
        gs = grid_search_cv(X, y, k=args.folds, rng=args.seed)
        params, cv = gs.best, gs.cv_accuracy
    else:
        raise UsageError("give both --c and --gamma, or neither for grid search")
    model = fit_svm(X, y, params)
    save_model(args.out, model)
    msg = f"c={params.c:g} gamma={params.gamma:g}"
    if cv is not None:
        msg += f" cv_accuracy={100 * cv:.2f}%"
    print(f"{msg}; model written to {args.out}")


def cmd_eval(args) -> None:
    model = load_model(args.model)
    ids, labels, X = read_features_csv(args.features)
    y = _labels_pm1(labels)
    scores = decision_values(model, X)
    cm = confusion(np.where(scores >= 0, 1, -1), y)
    result = {"oa": overall_accuracy(cm), "tp": cm.tp, "fp": cm.fp, "tn": cm.tn, "fn": cm.fn,
              **summary_metrics(cm)}
    if (y > 0).any() and (y < 0).any():
        result["auc"] = roc_and_auc(scores, y).auc
    text = json.dumps(result, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)


def cmd_experiment(args) -> None:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out = Path(args.out or cfg.output_dir)
    report = run_experiment(cfg, cache_dir=args.cache)
    emit_report(report, out)
    for s in report.summaries:
        print(f"{s.size:>5}  OA {s.oa:6.2f}%  CV {s.cv_accuracy:6.2f}%  AUC {s.auc:.4f}")
    print(f"report written to {out}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="geneteams", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("datagen", help="synthesise a control/patient cohort directory")
    s.add_argument("--spec", help="JSON with cohort fields (counts, lengths, frequencies)")
    s.add_argument("--reference", help="FASTA of reference genes; random references otherwise")
    s.add_argument("--out", required=True)
    s.add_argument("--audit", action="store_true", help="fail if realised carrier counts deviate")
    s.set_defaults(func=cmd_datagen)

    s = sub.add_parser("cubes", help="render a cohort's CGR cubes")
    s.add_argument("--cohort", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--resolution", type=int, default=700)
    s.add_argument("--pgm", action="append", metavar="SAMPLE:GENE",
                   help="also export this gene slice as a PGM image (repeatable)")
    s.set_defaults(func=cmd_cubes)

    s = sub.add_parser("features", help="EMPR one-way features of every cube")
    s.add_argument("--cubes", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--depth", choices=("oneway", "full"), default="oneway",
                   help="full also computes two-way/residual terms and checks reconstruction")
    s.add_argument("--shared-supports", action="store_true", help="use ADS of the mean cube for all samples")
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("train", help="fit an RBF SVM on a feature table")
    s.add_argument("--features", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--c", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--folds", type=int, default=5)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="score a feature table with a saved model")
    s.add_argument("--model", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("experiment", help="run a full experiment from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--cache", help="directory for the feature cache")
    s.set_defaults(func=cmd_experiment)

    for name, sp in sub.choices.items():
        sp.add_argument("--seed", type=int, default=None if name == "experiment" else 0)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"geneteams: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError) as exc:
        print(f"geneteams: data error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
