"""Sequence and network domain types plus FASTA reading/writing."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ALPHABET = "ACGT"
_CODE = np.full(256, 255, dtype=np.uint8)
for _i, _ch in enumerate(ALPHABET):
    _CODE[ord(_ch)] = _i
    _CODE[ord(_ch.lower())] = _i

CONTROL = "control"
PATIENT = "patient"
LABELS = (CONTROL, PATIENT)


class FastaError(ValueError):
    """Raised for malformed FASTA input."""


def encode(bases: str) -> np.ndarray:
    """Map an ACGT string to uint8 codes 0..3, rejecting anything else."""
    raw = np.frombuffer(bases.encode("ascii", errors="replace"), dtype=np.uint8)
    codes = _CODE[raw]
    bad = np.flatnonzero(codes == 255)
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"illegal nucleotide {bases[i]!r} at base index {i}")
    return codes


def decode(codes: np.ndarray) -> str:
    return np.frombuffer(b"ACGT", dtype=np.uint8)[np.asarray(codes)].tobytes().decode("ascii")


@dataclass(frozen=True)
class GeneSequence:
    id: str
    bases: str

    def __post_init__(self):
        if not self.id:
            raise ValueError("GeneSequence id must be nonempty")
        bases = self.bases.upper()
        encode(bases)
        object.__setattr__(self, "bases", bases)

    def __len__(self) -> int:
        return len(self.bases)

    @classmethod
    def from_codes(cls, id: str, codes: np.ndarray) -> "GeneSequence":
        return cls(id, decode(codes))

    def codes(self) -> np.ndarray:
        return encode(self.bases)


@dataclass(frozen=True)
class NetworkSample:
    sample_id: str
    label: str
    genes: tuple[GeneSequence, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}, got {self.label!r}")
        object.__setattr__(self, "genes", tuple(self.genes))
        if len(self.genes) < 1:
            raise ValueError("a network sample needs at least one gene")

    @property
    def gene_ids(self) -> tuple[str, ...]:
        return tuple(g.id for g in self.genes)


def parse_fasta(text: str | Iterable[str]) -> list[GeneSequence]:
    """Parse FASTA text into records, folding case and stripping whitespace.

    Errors name the offending symbol and its base index within the record.
    """
    lines = text.splitlines() if isinstance(text, str) else (l.rstrip("\n") for l in text)
    records: list[GeneSequence] = []
    name: str | None = None
    chunks: list[str] = []

    def flush():
        if name is not None:
            records.append(GeneSequence(name, "".join(chunks)))

    for lineno, line in enumerate(lines, 1):
        if line.startswith(">"):
            flush()
            name = line[1:].strip()
            if not name:
                raise FastaError(f"line {lineno}: empty record header")
            chunks = []
            continue
        body = "".join(line.split())
        if not body:
            continue
        if name is None:
            raise FastaError(f"line {lineno}: sequence data before any '>' header")
        offset = sum(len(c) for c in chunks)
        try:
            encode(body)
        except ValueError:
            j = next(k for k, ch in enumerate(body) if ch not in "ACGTacgt")
            raise FastaError(
                f"record {name!r}: illegal nucleotide {body[j]!r} at base index {offset + j}"
            ) from None
        chunks.append(body.upper())
    flush()
    return records


def write_fasta(records: Sequence[GeneSequence], line_width: int = 60) -> str:
    if line_width < 1:
        raise ValueError("line_width must be >= 1")
    out = []
    for rec in records:
        out.append(f">{rec.id}\n")
        s = rec.bases
        for i in range(0, len(s), line_width):
            out.append(s[i : i + line_width] + "\n")
    return "".join(out)


def read_fasta_file(path) -> list[GeneSequence]:
    with open(path) as fh:
        return parse_fasta(fh.read())


def write_fasta_file(path, records: Sequence[GeneSequence], line_width: int = 60) -> None:
    with open(path, "w") as fh:
        fh.write(write_fasta(records, line_width))
