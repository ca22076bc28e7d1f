"""Enhanced Multivariance Products Representation of 3-D arrays.

Components are computed with Averaged Directional Supports under a set of
weight vectors (constant 1/n_r by default). The classifier only needs the
supports, g0 and the three one-way components; two-way and residual terms
exist for verifying the expansion.

Every weighted contraction is done as sequential single-axis
contractions, so a component costs O(n1 * n2 * n3).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np


class DegenerateCubeError(ValueError):
    """A directional average vanishes, so its support cannot be normalised."""


@dataclass(frozen=True)
class WeightVectors:
    w1: np.ndarray
    w2: np.ndarray
    w3: np.ndarray

    def __iter__(self):
        return iter((self.w1, self.w2, self.w3))

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.w1.size, self.w2.size, self.w3.size)


@dataclass(frozen=True)
class SupportVectors:
    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray

    def __iter__(self):
        return iter((self.s1, self.s2, self.s3))


@dataclass
class EmprDecomposition:
    g0: float
    g1: np.ndarray
    g2: np.ndarray
    g3: np.ndarray
    supports: SupportVectors
    weights: WeightVectors
    g12: np.ndarray | None = None
    g13: np.ndarray | None = None
    g23: np.ndarray | None = None
    g123: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.g1.size, self.g2.size, self.g3.size)

    @property
    def complete(self) -> bool:
        return all(x is not None for x in (self.g12, self.g13, self.g23, self.g123))


def constant_weights(n1: int, n2: int, n3: int) -> WeightVectors:
    if min(n1, n2, n3) < 1:
        raise ValueError("axis sizes must be >= 1")
    return WeightVectors(np.full(n1, 1.0 / n1), np.full(n2, 1.0 / n2), np.full(n3, 1.0 / n3))


def _as_cube(cube) -> np.ndarray:
    g = np.asarray(cube)
    if g.ndim != 3:
        raise ValueError(f"expected a 3-D array, got shape {g.shape}")
    return g


def _weights_for(cube, weights: WeightVectors | None) -> WeightVectors:
    if weights is None:
        return constant_weights(*cube.shape)
    if weights.shape != cube.shape:
        raise ValueError(f"weights {weights.shape} do not match cube {cube.shape}")
    return weights


_CHUNK = 1 << 21  # elements cast to float64 at a time for integer cubes


def _row_blocks(cube: np.ndarray):
    """Yield (start, float64 block) slabs along axis 1; avoids a full cast of
    large binary cubes."""
    n1, n2, n3 = cube.shape
    if cube.dtype == np.float64:
        yield 0, cube
        return
    step = max(1, _CHUNK // (n2 * n3))
    for i0 in range(0, n1, step):
        yield i0, cube[i0 : i0 + step].astype(np.float64)


def _contract3(cube: np.ndarray, v3: np.ndarray) -> np.ndarray:
    """sum_k v3_k G_ijk -> (n1, n2)."""
    n1, n2, n3 = cube.shape
    out = np.empty((n1, n2))
    for i0, block in _row_blocks(cube):
        m = block.shape[0]
        out[i0 : i0 + m] = (block.reshape(m * n2, n3) @ v3).reshape(m, n2)
    return out


def _contract1(cube: np.ndarray, v1: np.ndarray) -> np.ndarray:
    """sum_i v1_i G_ijk -> (n2, n3)."""
    n1, n2, n3 = cube.shape
    out = np.zeros(n2 * n3)
    for i0, block in _row_blocks(cube):
        m = block.shape[0]
        out += v1[i0 : i0 + m] @ block.reshape(m, n2 * n3)
    return out.reshape(n2, n3)


def directional_averages(cube, weights: WeightVectors | None = None) -> tuple[np.ndarray, ...]:
    """Unnormalised averaged directions: weighted means over all axes but one."""
    g = _as_cube(cube)
    w1, w2, w3 = _weights_for(g, weights)
    m12 = _contract3(g, w3)
    m23 = _contract1(g, w1)
    return m12 @ w2, w1 @ m12, w2 @ m23


def ads_supports(cube, weights: WeightVectors | None = None) -> SupportVectors:
    g = _as_cube(cube)
    w = _weights_for(g, weights)
    out = []
    for axis, (big_s, wr) in enumerate(zip(directional_averages(g, w), w), 1):
        eta = np.sqrt(np.dot(wr, big_s * big_s))
        if not eta > 0:
            raise DegenerateCubeError(f"averaged direction along axis {axis} is identically zero")
        out.append(big_s / eta)
    return SupportVectors(*out)


def zeroth_component(cube, weights: WeightVectors, supports: SupportVectors) -> float:
    g = _as_cube(cube)
    (w1, w2, w3), (s1, s2, s3) = weights, supports
    return float((w1 * s1) @ _contract3(g, w3 * s3) @ (w2 * s2))


def oneway_components(cube, weights: WeightVectors, supports: SupportVectors, g0: float):
    g = _as_cube(cube)
    (w1, w2, w3), (s1, s2, s3) = weights, supports
    a1, a2, a3 = w1 * s1, w2 * s2, w3 * s3
    p12 = _contract3(g, a3)
    p23 = _contract1(g, a1)
    g1 = p12 @ a2 - g0 * s1
    g2 = a1 @ p12 - g0 * s2
    g3 = a2 @ p23 - g0 * s3
    return g1, g2, g3


def twoway_components(cube, weights: WeightVectors, supports: SupportVectors, g0: float, oneways):
    """Pairwise contraction minus every lower-order term times the supports."""
    g = _as_cube(cube)
    (w1, w2, w3), (s1, s2, s3) = weights, supports
    g1, g2, g3 = oneways
    n1, n2, n3 = g.shape
    p12 = _contract3(g, w3 * s3)
    p23 = _contract1(g, w1 * s1)
    p13 = np.einsum("ijk,j->ik", g, w2 * s2)
    g12 = p12 - np.outer(g1, s2) - np.outer(s1, g2) - g0 * np.outer(s1, s2)
    g13 = p13 - np.outer(g1, s3) - np.outer(s1, g3) - g0 * np.outer(s1, s3)
    g23 = p23 - np.outer(g2, s3) - np.outer(s2, g3) - g0 * np.outer(s2, s3)
    return g12, g13, g23


def _outer3(a, b, c) -> np.ndarray:
    return a[:, None, None] * b[None, :, None] * c[None, None, :]


def lower_terms(d: EmprDecomposition, include_twoway: bool = True) -> list[np.ndarray]:
    """The seven non-residual terms, each of full cube shape."""
    s1, s2, s3 = d.supports
    terms = [
        d.g0 * _outer3(s1, s2, s3),
        _outer3(d.g1, s2, s3),
        _outer3(s1, d.g2, s3),
        _outer3(s1, s2, d.g3),
    ]
    if include_twoway:
        if d.g12 is None or d.g13 is None or d.g23 is None:
            raise ValueError("two-way components have not been computed")
        terms += [
            d.g12[:, :, None] * s3[None, None, :],
            d.g13[:, None, :] * s2[None, :, None],
            s1[:, None, None] * d.g23[None, :, :],
        ]
    return terms


def residual_component(cube, d: EmprDecomposition) -> np.ndarray:
    g = _as_cube(cube).astype(float)
    return g - sum(lower_terms(d))


def decompose(
    cube,
    weights: WeightVectors | None = None,
    supports: SupportVectors | None = None,
    full: bool = False,
) -> EmprDecomposition:
    """EMPR of a cube; ``full`` adds the two-way and residual components.

    Supports default to the cube's own ADS; pass shared ones to decompose a
    set of cubes under a common basis.
    """
    g = _as_cube(cube)
    w = _weights_for(g, weights)
    s = ads_supports(g, w) if supports is None else supports
    g0 = zeroth_component(g, w, s)
    g1, g2, g3 = oneway_components(g, w, s, g0)
    d = EmprDecomposition(g0, g1, g2, g3, s, w)
    if full:
        g12, g13, g23 = twoway_components(g, w, s, g0, (g1, g2, g3))
        d = replace(d, g12=g12, g13=g13, g23=g23)
        d.g123 = residual_component(g, d)
    return d


def reconstruct(d: EmprDecomposition) -> np.ndarray:
    if not d.complete:
        raise ValueError("reconstruction needs a full decomposition")
    return sum(lower_terms(d)) + d.g123


def all_terms(d: EmprDecomposition) -> list[np.ndarray]:
    if not d.complete:
        raise ValueError("needs a full decomposition")
    return lower_terms(d) + [d.g123]


def weighted_inner(a: np.ndarray, b: np.ndarray, weights: WeightVectors) -> float:
    w1, w2, w3 = weights
    return float(np.einsum("ijk,i,j,k->", a * b, w1, w2, w3))


def feature_vector(d: EmprDecomposition) -> np.ndarray:
    """[g1; g2; g3], length n1 + n2 + n3."""
    return np.concatenate([d.g1, d.g2, d.g3])


def cube_features(cube, supports: SupportVectors | None = None) -> np.ndarray:
    return feature_vector(decompose(cube, supports=supports))


# -- feature tables -----------------------------------------------------------


def feature_header(n: int) -> list[str]:
    return ["sample_id", "label"] + [f"f{i}" for i in range(n)]


def write_features_csv(path, sample_ids: Sequence[str], labels: Sequence[str], features: np.ndarray) -> None:
    """One row per sample; floats written with repr so they read back exactly."""
    features = np.asarray(features, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(feature_header(features.shape[1]))
        for sid, lab, row in zip(sample_ids, labels, features):
            w.writerow([sid, lab] + [repr(float(v)) for v in row])


def read_features_csv(path) -> tuple[list[str], list[str], np.ndarray]:
    ids, labels, rows = [], [], []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[:2] != ["sample_id", "label"]:
            raise ValueError(f"{path}: not a feature table")
        for rec in r:
            ids.append(rec[0])
            labels.append(rec[1])
            rows.append([float(v) for v in rec[2:]])
    return ids, labels, np.array(rows, dtype=float).reshape(len(rows), len(header) - 2)


def mean_cube_supports(cubes: Iterable[np.ndarray]) -> SupportVectors:
    """ADS of the average cube, for decomposing a whole cohort on one basis."""
    total, n = None, 0
    for c in cubes:
        total = c.astype(float) if total is None else total + c
        n += 1
    if total is None:
        raise ValueError("no cubes given")
    return ads_supports(total / n)
