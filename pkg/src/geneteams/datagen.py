"""Synthetic control/patient cohorts built from reference gene sequences.

Each gene gets one polymorphic and one pathogenic position list, shared by
both groups. Carriers are assigned in exact counts (round(f * N)) per site,
and every site has a single alternate base.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .seq import (
    CONTROL,
    PATIENT,
    GeneSequence,
    NetworkSample,
    encode,
    read_fasta_file,
    write_fasta_file,
)


@dataclass(frozen=True)
class PositionLists:
    polymorphic: tuple[int, ...]
    pathogenic: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "polymorphic", tuple(sorted(int(p) for p in self.polymorphic)))
        object.__setattr__(self, "pathogenic", tuple(sorted(int(p) for p in self.pathogenic)))
        if set(self.polymorphic) & set(self.pathogenic):
            raise ValueError("polymorphic and pathogenic positions must be disjoint")


@dataclass
class CohortSpec:
    genes: list[GeneSequence]
    n_control: int = 400
    n_patient: int = 400
    maf_polymorphic: float = 0.40
    maf_pathogenic_control: float = 0.25
    maf_pathogenic_patient: float = 0.30
    poly_interval: int = 100
    patho_interval: int = 200
    seed: int = 0
    # False draws carriers per sample (Bernoulli) instead of exact counts
    exact_counts: bool = True

    def __post_init__(self):
        for name in ("maf_polymorphic", "maf_pathogenic_control", "maf_pathogenic_patient"):
            f = getattr(self, name)
            if not 0.0 <= f <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {f}")
        if self.poly_interval < 1 or self.patho_interval < 1:
            raise ValueError("intervals must be >= 1")
        if self.n_control < 0 or self.n_patient < 0:
            raise ValueError("sample counts must be >= 0")
        if not self.genes:
            raise ValueError("at least one reference gene is required")

    @property
    def n_samples(self) -> int:
        return self.n_control + self.n_patient

    def echo(self) -> dict:
        """JSON-friendly summary (references by id and length only)."""
        d = {k: v for k, v in asdict(self).items() if k != "genes"}
        d["genes"] = [{"id": g.id, "length": len(g)} for g in self.genes]
        return d


def _window_draws(n_windows: int, width: int, rng: np.random.Generator) -> np.ndarray:
    starts = np.arange(n_windows) * width + 1
    return starts + rng.integers(0, width, size=n_windows)


def sample_position_lists(
    gene_length: int, poly_interval: int, patho_interval: int, rng: np.random.Generator
) -> PositionLists:
    """One uniform position per complete window for each list.

    Windows are [k*w + 1, (k+1)*w]; a trailing partial window gets nothing.
    Pathogenic draws that collide with a polymorphic position are redrawn
    inside the same window.
    """
    if gene_length < 1:
        raise ValueError("gene_length must be positive")
    poly = _window_draws(gene_length // poly_interval, poly_interval, rng)
    patho = _window_draws(gene_length // patho_interval, patho_interval, rng)
    taken = set(poly.tolist())
    for k, p in enumerate(patho):
        if p not in taken:
            continue
        lo = k * patho_interval + 1
        hi = lo + patho_interval
        if all(q in taken for q in range(lo, hi)):
            raise ValueError(
                f"pathogenic window [{lo}, {hi - 1}] is fully occupied by polymorphic "
                "positions; disjoint lists are impossible"
            )
        while p in taken:
            p = int(rng.integers(lo, hi))
        patho[k] = p
    return PositionLists(tuple(poly.tolist()), tuple(patho.tolist()))


def generate_reference(length: int, rng: np.random.Generator, id: str = "ref") -> GeneSequence:
    if length < 1:
        raise ValueError("reference length must be >= 1")
    return GeneSequence.from_codes(id, rng.integers(0, 4, size=length, dtype=np.uint8))


def carrier_count(n_samples: int, frequency: float) -> int:
    # half-up rounding; Python's round() is banker's
    return int(math.floor(frequency * n_samples + 0.5))


def assign_carriers(n_samples: int, frequency: float, rng: np.random.Generator) -> frozenset[int]:
    if n_samples < 0:
        raise ValueError("n_samples must be >= 0")
    k = carrier_count(n_samples, frequency)
    if k == 0:
        return frozenset()
    return frozenset(rng.choice(n_samples, size=k, replace=False).tolist())


def gene_rng(seed: int, gene_index: int) -> np.random.Generator:
    """Per-gene generator; serial and parallel generation draw identical streams."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(gene_index)]))


@dataclass
class GeneVariants:
    """Every variant site of one gene and who carries it."""

    positions: PositionLists
    sites: np.ndarray  # 0-based site offsets, polymorphic first then pathogenic
    alt: np.ndarray  # alternate base code per site
    carriers: np.ndarray  # bool, (n_samples, n_sites)


def _gene_variants(spec: CohortSpec, k: int) -> GeneVariants:
    rng = gene_rng(spec.seed, k)
    ref = spec.genes[k].codes()
    pl = sample_position_lists(len(ref), spec.poly_interval, spec.patho_interval, rng)
    sites = np.array(pl.polymorphic + pl.pathogenic, dtype=np.int64) - 1
    # one alternate per site, uniform over the three non-reference bases
    alt = ((ref[sites].astype(np.int64) + rng.integers(1, 4, size=sites.size)) % 4).astype(np.uint8)

    nc, npat = spec.n_control, spec.n_patient
    carriers = np.zeros((nc + npat, sites.size), dtype=bool)
    n_poly = len(pl.polymorphic)
    for j in range(sites.size):
        if j < n_poly:
            fc = fp = spec.maf_polymorphic
        else:
            fc, fp = spec.maf_pathogenic_control, spec.maf_pathogenic_patient
        if spec.exact_counts:
            carriers[list(assign_carriers(nc, fc, rng)), j] = True
            carriers[[nc + i for i in assign_carriers(npat, fp, rng)], j] = True
        else:
            carriers[:nc, j] = rng.random(nc) < fc
            carriers[nc:, j] = rng.random(npat) < fp
    return GeneVariants(pl, sites, alt, carriers)


class Cohort:
    """Labelled network samples, materialised per sample on demand.

    A generated cohort keeps only references and variant tables; a cohort
    loaded from disk reads each sample's FASTA when asked for it.
    """

    def __init__(
        self,
        sample_ids: Sequence[str],
        labels: Sequence[str],
        references: Sequence[GeneSequence],
        position_lists: dict[str, PositionLists],
        spec: CohortSpec | None = None,
        variants: list[GeneVariants] | None = None,
        loader: Callable[[int], list[np.ndarray]] | None = None,
    ):
        if len(sample_ids) != len(labels):
            raise ValueError("sample_ids and labels differ in length")
        if (variants is None) == (loader is None):
            raise ValueError("exactly one of variants or loader is required")
        self.sample_ids = list(sample_ids)
        self.labels = list(labels)
        self.references = list(references)
        self.position_lists = dict(position_lists)
        self.spec = spec
        self._variants = variants
        self._loader = loader
        self._ref_codes = [g.codes() for g in self.references]

    def __len__(self) -> int:
        return len(self.sample_ids)

    @property
    def gene_ids(self) -> list[str]:
        return [g.id for g in self.references]

    def gene_codes(self, i: int) -> list[np.ndarray]:
        """Base codes of every gene of sample i, in network order."""
        if self._loader is not None:
            return self._loader(i)
        out = []
        for ref, var in zip(self._ref_codes, self._variants):
            codes = ref.copy()
            hit = var.carriers[i]
            codes[var.sites[hit]] = var.alt[hit]
            out.append(codes)
        return out

    def sample(self, i: int) -> NetworkSample:
        genes = tuple(
            GeneSequence.from_codes(gid, c) for gid, c in zip(self.gene_ids, self.gene_codes(i))
        )
        return NetworkSample(self.sample_ids[i], self.labels[i], genes)

    @property
    def samples(self) -> list[NetworkSample]:
        return [self.sample(i) for i in range(len(self))]

    def indices(self, label: str) -> np.ndarray:
        return np.array([i for i, l in enumerate(self.labels) if l == label], dtype=np.int64)


def sample_ids_for(n_control: int, n_patient: int) -> tuple[list[str], list[str]]:
    ids = [f"control_{i:04d}" for i in range(n_control)] + [
        f"patient_{i:04d}" for i in range(n_patient)
    ]
    return ids, [CONTROL] * n_control + [PATIENT] * n_patient


def generate_cohort(spec: CohortSpec) -> Cohort:
    # controls occupy sample indices [0, n_control), patients the rest
    variants = [_gene_variants(spec, k) for k in range(len(spec.genes))]
    ids, labels = sample_ids_for(spec.n_control, spec.n_patient)
    return Cohort(
        ids,
        labels,
        spec.genes,
        {g.id: v.positions for g, v in zip(spec.genes, variants)},
        spec=spec,
        variants=variants,
    )


def random_references(
    n_genes: int, min_length: int, max_length: int, rng: np.random.Generator
) -> list[GeneSequence]:
    lengths = rng.integers(min_length, max_length + 1, size=n_genes)
    return [generate_reference(int(n), rng, id=f"gene{k + 1:03d}") for k, n in enumerate(lengths)]


# -- auditing ---------------------------------------------------------------


@dataclass(frozen=True)
class SiteFrequency:
    gene: str
    position: int
    kind: str
    group: str
    carriers: int
    n: int
    expected: int | None

    @property
    def fraction(self) -> float:
        return self.carriers / self.n if self.n else 0.0

    @property
    def ok(self) -> bool:
        return self.expected is None or self.carriers == self.expected


@dataclass
class AuditReport:
    rows: list[SiteFrequency] = field(default_factory=list)

    @property
    def flagged(self) -> list[SiteFrequency]:
        return [r for r in self.rows if not r.ok]

    @property
    def ok(self) -> bool:
        return not self.flagged

    def fractions(self, kind: str, group: str) -> np.ndarray:
        return np.array([r.fraction for r in self.rows if r.kind == kind and r.group == group])


def cohort_audit(cohort: Cohort) -> AuditReport:
    """Realised carrier fraction per listed site and group.

    A carrier is any sample whose base differs from the reference there.
    When the cohort carries an exact-count spec, counts other than
    round(f * N) are flagged.
    """
    if len(cohort) == 0:
        raise ValueError("cannot audit an empty cohort")
    groups = {g: cohort.indices(g) for g in (CONTROL, PATIENT)}
    spec = cohort.spec
    expected_freq = None
    if spec is not None and spec.exact_counts:
        expected_freq = {
            ("polymorphic", CONTROL): spec.maf_polymorphic,
            ("polymorphic", PATIENT): spec.maf_polymorphic,
            ("pathogenic", CONTROL): spec.maf_pathogenic_control,
            ("pathogenic", PATIENT): spec.maf_pathogenic_patient,
        }
    per_gene_sites = []
    for k, gid in enumerate(cohort.gene_ids):
        pl = cohort.position_lists[gid]
        sites = np.array(pl.polymorphic + pl.pathogenic, dtype=np.int64) - 1
        kinds = ["polymorphic"] * len(pl.polymorphic) + ["pathogenic"] * len(pl.pathogenic)
        per_gene_sites.append((gid, sites, kinds, cohort._ref_codes[k][sites]))

    hits = [np.zeros((len(cohort), s.size), dtype=bool) for _, s, _, _ in per_gene_sites]
    for i in range(len(cohort)):
        for k, codes in enumerate(cohort.gene_codes(i)):
            _, sites, _, ref = per_gene_sites[k]
            hits[k][i] = codes[sites] != ref

    report = AuditReport()
    for k, (gid, sites, kinds, _) in enumerate(per_gene_sites):
        for group, idx in groups.items():
            if idx.size == 0:
                continue
            counts = hits[k][idx].sum(axis=0)
            for j, site in enumerate(sites):
                exp = None
                if expected_freq is not None:
                    exp = carrier_count(idx.size, expected_freq[(kinds[j], group)])
                report.rows.append(
                    SiteFrequency(gid, int(site) + 1, kinds[j], group, int(counts[j]), int(idx.size), exp)
                )
    return report


# -- persistence --------------------------------------------------------------

MANIFEST = "manifest.json"
REFERENCE = "reference.fasta"


def save_cohort(cohort: Cohort, directory, line_width: int = 80) -> Path:
    """One FASTA per sample, the references, a manifest and per-gene positions."""
    root = Path(directory)
    (root / "samples").mkdir(parents=True, exist_ok=True)
    (root / "positions").mkdir(exist_ok=True)
    write_fasta_file(root / REFERENCE, cohort.references, line_width)
    for i in range(len(cohort)):
        write_fasta_file(root / "samples" / f"{cohort.sample_ids[i]}.fasta", cohort.sample(i).genes, line_width)
    for gid, pl in cohort.position_lists.items():
        with open(root / "positions" / f"{gid}.json", "w") as fh:
            json.dump({"polymorphic": list(pl.polymorphic), "pathogenic": list(pl.pathogenic)}, fh)
            fh.write("\n")
    manifest = {
        "samples": [{"id": s, "label": l} for s, l in zip(cohort.sample_ids, cohort.labels)],
        "genes": cohort.gene_ids,
        "seed": cohort.spec.seed if cohort.spec else None,
        "spec": cohort.spec.echo() if cohort.spec else None,
    }
    with open(root / MANIFEST, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return root


class _DirectoryLoader:
    def __init__(self, root: Path, ids: list[str], gene_ids: list[str]):
        self.root, self.ids, self.gene_ids = root, ids, gene_ids

    def __call__(self, i: int) -> list[np.ndarray]:
        recs = read_fasta_file(self.root / "samples" / f"{self.ids[i]}.fasta")
        if [r.id for r in recs] != self.gene_ids:
            raise ValueError(f"sample {self.ids[i]}: gene records out of network order")
        return [encode(r.bases) for r in recs]


class _MemoryLoader:
    def __init__(self, codes: list[list[np.ndarray]]):
        self.codes = codes

    def __call__(self, i: int) -> list[np.ndarray]:
        return [c.copy() for c in self.codes[i]]


def load_cohort(directory) -> Cohort:
    root = Path(directory)
    with open(root / MANIFEST) as fh:
        manifest = json.load(fh)
    refs = read_fasta_file(root / REFERENCE)
    gene_ids = manifest["genes"]
    if [g.id for g in refs] != gene_ids:
        raise ValueError("reference FASTA gene order does not match the manifest")
    positions = {}
    for gid in gene_ids:
        with open(root / "positions" / f"{gid}.json") as fh:
            d = json.load(fh)
        positions[gid] = PositionLists(tuple(d["polymorphic"]), tuple(d["pathogenic"]))
    ids = [s["id"] for s in manifest["samples"]]
    labels = [s["label"] for s in manifest["samples"]]

    return Cohort(ids, labels, refs, positions, loader=_DirectoryLoader(root, ids, gene_ids))


def cohort_from_samples(
    samples: Sequence[NetworkSample],
    references: Sequence[GeneSequence] | None = None,
    position_lists: dict[str, PositionLists] | None = None,
) -> Cohort:
    """Wrap in-memory samples as a cohort.

    Without references the first sample stands in for them; without
    position lists the audit has no sites to report.
    """
    refs = list(references) if references is not None else list(samples[0].genes)
    codes = [[g.codes() for g in s.genes] for s in samples]
    return Cohort(
        [s.sample_id for s in samples],
        [s.label for s in samples],
        refs,
        position_lists or {g.id: PositionLists((), ()) for g in refs},
        loader=_MemoryLoader(codes),
    )


__all__ = [
    "AuditReport",
    "Cohort",
    "CohortSpec",
    "GeneVariants",
    "PositionLists",
    "assign_carriers",
    "carrier_count",
    "cohort_audit",
    "generate_cohort",
    "generate_reference",
    "cohort_from_samples",
    "load_cohort",
    "random_references",
    "sample_position_lists",
    "save_cohort",
]
