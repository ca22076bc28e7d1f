"""Write experiment reports: CSV tables, curve data and small SVG plots.

Output is a pure function of the report, so re-emitting gives identical
bytes.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

from .metrics import METRIC_NAMES, roc_and_auc
from .pipeline import ExperimentReport, versions

RUN_COLUMNS = [
    "dataset", "mode", "size", "run", "seed", "n_train_control", "n_train_patient", "n_test",
    "c", "gamma", "cv_accuracy", "oa", "tp", "fp", "tn", "fn", *METRIC_NAMES, "auc",
]
SUMMARY_COLUMNS = ["dataset", "size", "quantity", "mean", "n_defined", "n_undefined"]
# row order and captions of the metric table
TABLE_ROWS = [
    ("oa", "Overall Accuracy"),
    ("cv_accuracy", "CV Accuracy"),
    ("npv", "True Neg. Rate"),
    ("precision", "True Pos. Rate"),
    ("recall", "Recall"),
    ("specificity", "Specificity"),
    ("mcc", "MCC"),
    ("auc", "AUC"),
]
ROC_COLUMNS = ["fpr", "tpr", "threshold"]


def _num(v) -> str:
    return "" if v is None else repr(v) if isinstance(v, float) else str(v)


def _file_tag(size: str) -> str:
    return size.replace("%", "pct")


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# -- svg -------------------------------------------------------------------------

_W, _H, _PAD = 480, 360, 50


def _svg(series, title: str, xlabel: str, ylabel: str, xlim, ylim, diagonal=False, xticks=None) -> str:
    (x0, x1), (y0, y1) = xlim, ylim
    pw, ph = _W - 2 * _PAD, _H - 2 * _PAD

    def px(x):
        return _PAD + (x - x0) / (x1 - x0) * pw

    def py(y):
        return _H - _PAD - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_PAD}" y="{_PAD}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{_W / 2:.1f}" y="{_PAD / 2:.1f}" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{_W / 2:.1f}" y="{_H - 10}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="14" y="{_H / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {_H / 2:.1f})">{ylabel}</text>',
    ]
    for t in xticks if xticks is not None else (x0, (x0 + x1) / 2, x1):
        out.append(f'<text x="{px(t):.2f}" y="{_H - _PAD + 15}" text-anchor="middle" font-size="10">{t:g}</text>')
    for t in (y0, (y0 + y1) / 2, y1):
        out.append(f'<text x="{_PAD - 5}" y="{py(t) + 3:.2f}" text-anchor="end" font-size="10">{t:g}</text>')
    if diagonal:
        out.append(f'<line x1="{px(x0):.2f}" y1="{py(y0):.2f}" x2="{px(x1):.2f}" y2="{py(y1):.2f}" '
                   'stroke="gray" stroke-dasharray="5,4"/>')
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    for n, (label, xs, ys) in enumerate(series):
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        col = colors[n % len(colors)]
        out.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        ly = _PAD + 15 + 15 * n
        out.append(f'<text x="{_W - _PAD - 5}" y="{ly}" text-anchor="end" font-size="11" fill="{col}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# -- emit ------------------------------------------------------------------------


def emit_report(report: ExperimentReport, out_dir, formats: Sequence[str] = ("csv", "svg")) -> list[Path]:
    """Write the report files and a manifest; returns the paths written."""
    root = Path(out_dir)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {root}: {exc}") from exc
    cfg = report.config
    written: list[Path] = []

    def put(name: str) -> Path:
        p = root / name
        written.append(p)
        return p

    if "csv" in formats:
        _write_csv(put("runs.csv"), RUN_COLUMNS, (
            [cfg.name, cfg.mode, r.size, r.run, r.seed, r.n_train_control, r.n_train_patient, r.n_test,
             _num(r.c), _num(r.gamma), _num(r.cv_accuracy), _num(r.oa), r.tp, r.fp, r.tn, r.fn,
             *(_num(r.metrics[m]) for m in METRIC_NAMES), _num(r.auc)]
            for r in report.records
        ))
        with open(put("splits.jsonl"), "w") as fh:
            for r in report.records:
                fh.write(json.dumps({"size": r.size, "run": r.run, "train": r.train_ids, "test": r.test_ids}) + "\n")
        rows = []
        for s in report.summaries:
            for q in ("oa", "cv_accuracy", "auc"):
                rows.append([cfg.name, s.size, q, _num(getattr(s, q)), s.runs, 0])
            for m in METRIC_NAMES:
                rows.append([cfg.name, s.size, m, _num(s.metrics[m]), s.runs - s.undefined[m], s.undefined[m]])
        _write_csv(put("summary.csv"), SUMMARY_COLUMNS, rows)
        table = []
        for key, caption in TABLE_ROWS:
            vals = [getattr(s, key) if key in ("oa", "cv_accuracy", "auc") else s.metrics[key]
                    for s in report.summaries]
            table.append([caption] + [("" if v is None else f"{v:.4f}") for v in vals])
        _write_csv(put("table.csv"), ["metric"] + [s.size for s in report.summaries], table)
        _write_csv(put("accuracy.csv"), ["size", "oa", "cv_accuracy"],
                   ([s.size, _num(s.oa), _num(s.cv_accuracy)] for s in report.summaries))

    curves = {}
    for r in report.records:
        if r.run == 0 and r.scores is not None:
            curves[r.size] = roc_and_auc(r.scores, r.test_labels)
    if "csv" in formats:
        for size, roc in curves.items():
            _write_csv(put(f"roc_{_file_tag(size)}.csv"), ROC_COLUMNS,
                       ([_num(float(a)), _num(float(b)), _num(float(t))]
                        for a, b, t in zip(roc.fpr, roc.tpr, roc.thresholds)))

    if "svg" in formats:
        xs = list(range(len(report.summaries)))
        lo = min(min(s.oa, s.cv_accuracy) for s in report.summaries)
        svg = _svg(
            [("OA", xs, [s.oa for s in report.summaries]),
             ("CV", xs, [s.cv_accuracy for s in report.summaries])],
            f"{cfg.name}: accuracy vs training size ({', '.join(s.size for s in report.summaries)})",
            "schedule entry", "accuracy (%)", (0, max(1, len(xs) - 1)), (min(40.0, lo), 100.0),
            xticks=xs,
        )
        put("accuracy.svg").write_text(svg)
        for size, roc in curves.items():
            svg = _svg([(f"{size}: AUC {roc.auc:.4f}", roc.fpr.tolist(), roc.tpr.tolist())],
                       f"{cfg.name}: ROC, training size {size}", "false positive rate",
                       "true positive rate", (0.0, 1.0), (0.0, 1.0), diagonal=True)
            put(f"roc_{_file_tag(size)}.svg").write_text(svg)

    manifest = {
        "config": cfg.to_dict(),
        "master_seed": cfg.seed,
        "run_seeds": {f"{r.size}/{r.run}": r.seed for r in report.records},
        "versions": versions(),
        "files": sorted(p.name for p in written),
    }
    with open(put("manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return written
