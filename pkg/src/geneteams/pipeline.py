"""End-to-end experiments: cohort -> CGR cubes -> EMPR features -> repeated
train/test splits with grid-searched RBF SVMs -> aggregated reports."""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .cgr import build_cube
from .datagen import Cohort, CohortSpec, generate_cohort, load_cohort, random_references
from .empr import cube_features, mean_cube_supports, read_features_csv, write_features_csv
from .metrics import METRIC_NAMES, confusion, overall_accuracy, roc_and_auc, summary_metrics
from .seq import PATIENT
from .svm import decision_values, fit_svm, grid_search_cv

log = logging.getLogger(__name__)

BALANCED = "balanced"
IMBALANCED = "imbalanced"


@dataclass
class DataConfig:
    """Synthetic cohort recipe, or a saved cohort directory when ``cohort_dir`` is set."""

    cohort_dir: str | None = None
    n_genes: int = 31
    min_length: int = 10_000
    max_length: int = 50_000
    n_control: int = 400
    n_patient: int = 400
    maf_polymorphic: float = 0.40
    maf_pathogenic_control: float = 0.25
    maf_pathogenic_patient: float = 0.30
    poly_interval: int = 100
    patho_interval: int = 200
    exact_counts: bool = True


@dataclass
class ExperimentConfig:
    data: DataConfig = field(default_factory=DataConfig)
    name: str = "experiment"
    mode: str = BALANCED
    # balanced: per-class training counts; imbalanced: training ratios per group
    schedule: list = field(default_factory=lambda: [10, 20, 30, 40, 50])
    resolution: int = 700
    runs: int = 100
    seed: int = 0
    folds: int = 5
    grid_exponents: list = field(default_factory=lambda: list(range(-4, 5)))
    # keep this many randomly chosen patients (e.g. 100 for the 4:1 sets)
    patient_subset: int | None = None
    shuffle_labels: bool = False
    shared_supports: bool = False
    class_weighted: bool = False
    workers: int = 1
    output_dir: str = "results"

    def __post_init__(self):
        if isinstance(self.data, dict):
            self.data = DataConfig(**self.data)
        if self.mode not in (BALANCED, IMBALANCED):
            raise ValueError(f"mode must be {BALANCED!r} or {IMBALANCED!r}")
        if not self.schedule:
            raise ValueError("schedule must be nonempty")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.mode == IMBALANCED and not all(0 < r < 1 for r in self.schedule):
            raise ValueError("imbalanced schedule entries are ratios in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def grid(self) -> tuple[float, ...]:
        return tuple(10.0**e for e in self.grid_exponents)


def desk_preset(**overrides) -> ExperimentConfig:
    """Laptop-sized run: 31 genes of 10^4 bases, R=128, 100+100 samples, 20 runs."""
    data = DataConfig(n_genes=31, min_length=10_000, max_length=10_000, n_control=100, n_patient=100)
    cfg = dict(data=data, name="desk", resolution=128, runs=20)
    cfg.update(overrides)
    return ExperimentConfig(**cfg)


def full_preset(**overrides) -> ExperimentConfig:
    cfg = dict(data=DataConfig(), name="full", resolution=700, runs=20)
    cfg.update(overrides)
    return ExperimentConfig(**cfg)


# -- seeds --------------------------------------------------------------------


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from any printable parts."""
    h = hashlib.sha256(repr(tuple(parts)).encode()).digest()
    return int.from_bytes(h[:8], "little") >> 1


# -- data and features -----------------------------------------------------------


def build_cohort(cfg: ExperimentConfig) -> Cohort:
    d = cfg.data
    if d.cohort_dir:
        return load_cohort(d.cohort_dir)
    rng = np.random.default_rng(derive_seed(cfg.seed, "references"))
    refs = random_references(d.n_genes, d.min_length, d.max_length, rng)
    spec = CohortSpec(
        genes=refs,
        n_control=d.n_control,
        n_patient=d.n_patient,
        maf_polymorphic=d.maf_polymorphic,
        maf_pathogenic_control=d.maf_pathogenic_control,
        maf_pathogenic_patient=d.maf_pathogenic_patient,
        poly_interval=d.poly_interval,
        patho_interval=d.patho_interval,
        seed=derive_seed(cfg.seed, "cohort"),
        exact_counts=d.exact_counts,
    )
    return generate_cohort(spec)


def _sample_features(args) -> np.ndarray:
    cohort, i, resolution, supports = args
    return cube_features(build_cube(cohort.gene_codes(i), resolution), supports=supports)


def cohort_features(cohort: Cohort, resolution: int, shared_supports: bool = False, workers: int = 1) -> np.ndarray:
    """(n_samples, 2R + n_genes) one-way EMPR features, one cube at a time."""
    supports = None
    if shared_supports:
        supports = mean_cube_supports(build_cube(cohort.gene_codes(i), resolution) for i in range(len(cohort)))
    jobs = [(cohort, i, resolution, supports) for i in range(len(cohort))]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_sample_features, jobs, chunksize=8))
    else:
        rows = [_sample_features(j) for j in jobs]
    return np.vstack(rows)


def _feature_key(cfg: ExperimentConfig) -> str:
    payload = {"data": asdict(cfg.data), "resolution": cfg.resolution, "seed": cfg.seed,
               "shared_supports": cfg.shared_supports}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def load_or_build_features(cfg: ExperimentConfig, cache_dir=None):
    """Features for the configured cohort, cached as CSV under ``cache_dir``."""
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"features-{_feature_key(cfg)}.csv"
        if path.exists():
            log.info("feature cache hit: %s", path)
            return read_features_csv(path)
    cohort = build_cohort(cfg)
    X = cohort_features(cohort, cfg.resolution, cfg.shared_supports, cfg.workers)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        write_features_csv(path, cohort.sample_ids, cohort.labels, X)
    return cohort.sample_ids, cohort.labels, X


# -- experiments --------------------------------------------------------------------


@dataclass
class RunRecord:
    size: str
    run: int
    seed: int
    n_train_control: int
    n_train_patient: int
    n_test: int
    c: float
    gamma: float
    cv_accuracy: float
    oa: float
    tp: int
    fp: int
    tn: int
    fn: int
    metrics: dict
    auc: float
    train_ids: list = field(repr=False)
    test_ids: list = field(repr=False)
    scores: list | None = field(default=None, repr=False)
    test_labels: list | None = field(default=None, repr=False)


@dataclass
class SizeSummary:
    size: str
    runs: int
    oa: float
    cv_accuracy: float
    auc: float
    metrics: dict  # name -> mean over defined runs, or None
    undefined: dict  # name -> count of runs where the metric was undefined


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: list[RunRecord]
    summaries: list[SizeSummary]

    def summary(self, size) -> SizeSummary:
        for s in self.summaries:
            if s.size == size_label(size):
                return s
        raise KeyError(size)

    def series(self, attr: str) -> list[float]:
        return [getattr(s, attr) if attr in ("oa", "cv_accuracy", "auc") else s.metrics[attr]
                for s in self.summaries]


def size_label(entry) -> str:
    if isinstance(entry, float) and entry < 1:
        return f"{round(entry * 100)}%"
    return str(int(entry))


def training_counts(cfg: ExperimentConfig, entry, n_control: int, n_patient: int) -> tuple[int, int]:
    if cfg.mode == BALANCED:
        s = int(entry)
        if s >= min(n_control, n_patient):
            raise ValueError(f"training count {s} leaves no test samples in a class")
        return s, s
    nc, np_ = int(round(entry * n_control)), int(round(entry * n_patient))
    if nc < cfg.folds or np_ < cfg.folds:
        raise ValueError(f"ratio {entry} gives too few training samples for {cfg.folds}-fold CV")
    return nc, np_


def _run_one(args) -> RunRecord:
    cfg, entry, run, ids, y, X = args
    seed = derive_seed(cfg.seed, size_label(entry), run)
    rng = np.random.default_rng(seed)
    ctrl, pat = np.flatnonzero(y < 0), np.flatnonzero(y > 0)
    n_c, n_p = training_counts(cfg, entry, ctrl.size, pat.size)
    train = np.sort(np.r_[rng.choice(ctrl, n_c, replace=False), rng.choice(pat, n_p, replace=False)])
    test = np.setdiff1d(np.arange(y.size), train)
    weights = None
    if cfg.class_weighted:
        weights = {1: n_c / n_p, -1: 1.0}
    gs = grid_search_cv(X[train], y[train], k=cfg.folds, grid_c=cfg.grid, grid_gamma=cfg.grid, rng=rng,
                        class_weight=weights)
    model = fit_svm(X[train], y[train], gs.best, class_weight=weights)
    scores = decision_values(model, X[test])
    pred = np.where(scores >= 0, 1, -1)
    cm = confusion(pred, y[test])
    keep_curve = run == 0
    return RunRecord(
        size=size_label(entry),
        run=run,
        seed=seed,
        n_train_control=n_c,
        n_train_patient=n_p,
        n_test=int(test.size),
        c=gs.best.c,
        gamma=gs.best.gamma,
        cv_accuracy=100.0 * gs.cv_accuracy,
        oa=overall_accuracy(cm),
        tp=cm.tp, fp=cm.fp, tn=cm.tn, fn=cm.fn,
        metrics=summary_metrics(cm),
        auc=roc_and_auc(scores, y[test]).auc,
        train_ids=[ids[i] for i in train],
        test_ids=[ids[i] for i in test],
        scores=scores.tolist() if keep_curve else None,
        test_labels=y[test].tolist() if keep_curve else None,
    )


def summarise(size: str, records: Sequence[RunRecord]) -> SizeSummary:
    metrics, undefined = {}, {}
    for name in METRIC_NAMES:
        vals = [r.metrics[name] for r in records if r.metrics[name] is not None]
        metrics[name] = float(np.mean(vals)) if vals else None
        undefined[name] = len(records) - len(vals)
    return SizeSummary(
        size=size,
        runs=len(records),
        oa=float(np.mean([r.oa for r in records])),
        cv_accuracy=float(np.mean([r.cv_accuracy for r in records])),
        auc=float(np.mean([r.auc for r in records])),
        metrics=metrics,
        undefined=undefined,
    )


def select_samples(cfg: ExperimentConfig, ids, labels, X):
    """Label vector (+1 patient), optional patient subsample and label shuffle."""
    ids = list(ids)
    y = np.array([1 if l == PATIENT else -1 for l in labels])
    X = np.asarray(X)
    keep = np.arange(len(ids))
    if cfg.patient_subset is not None:
        rng = np.random.default_rng(derive_seed(cfg.seed, "patient-subset"))
        pat = np.flatnonzero(y > 0)
        if cfg.patient_subset > pat.size:
            raise ValueError(f"cohort has only {pat.size} patients")
        chosen = rng.choice(pat, cfg.patient_subset, replace=False)
        keep = np.sort(np.r_[np.flatnonzero(y < 0), chosen])
    ids, y, X = [ids[i] for i in keep], y[keep], X[keep]
    if cfg.shuffle_labels:
        y = np.random.default_rng(derive_seed(cfg.seed, "shuffle")).permutation(y)
    return ids, y, X


def run_experiment(cfg: ExperimentConfig, features=None, cache_dir=None) -> ExperimentReport:
    """Every schedule entry times ``cfg.runs`` independent splits.

    ``features`` may be a precomputed (ids, labels, X) triple; otherwise
    they are built (or read from ``cache_dir``).
    """
    ids, labels, X = features if features is not None else load_or_build_features(cfg, cache_dir)
    ids, y, X = select_samples(cfg, ids, labels, X)
    if not ((y > 0).any() and (y < 0).any()):
        raise ValueError("experiment needs both classes")
    jobs = [(cfg, entry, run, ids, y, X) for entry in cfg.schedule for run in range(cfg.runs)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            records = list(pool.map(_run_one, jobs))
    else:
        records = []
        for job in jobs:
            records.append(_run_one(job))
            log.debug("size %s run %d: OA %.2f", records[-1].size, records[-1].run, records[-1].oa)
    summaries = []
    for entry in cfg.schedule:
        label = size_label(entry)
        summaries.append(summarise(label, [r for r in records if r.size == label]))
    return ExperimentReport(cfg, records, summaries)


def run_balanced_experiment(cfg: ExperimentConfig, **kw) -> ExperimentReport:
    if cfg.mode != BALANCED:
        raise ValueError("config mode is not balanced")
    return run_experiment(cfg, **kw)


def run_imbalanced_experiment(cfg: ExperimentConfig, **kw) -> ExperimentReport:
    if cfg.mode != IMBALANCED:
        raise ValueError("config mode is not imbalanced")
    return run_experiment(cfg, **kw)


def versions() -> dict:
    import platform

    import scipy

    return {"geneteams": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}
