"""Chaos Game Representation: trajectories, binary rasters and gene cubes."""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .seq import GeneSequence, NetworkSample, encode

DEFAULT_RESOLUTION = 700
# A=(0,0) C=(0,1) G=(1,0) T=(1,1), indexed by base code 0..3
CORNER_X = np.array([0.0, 0.0, 1.0, 1.0])
CORNER_Y = np.array([0.0, 1.0, 0.0, 1.0])

CUBE_MAGIC = b"CGR3"
_HEADER = struct.Struct("<4sIII")


def _codes(seq) -> np.ndarray:
    if isinstance(seq, GeneSequence):
        return seq.codes()
    if isinstance(seq, str):
        return encode(seq)
    return np.asarray(seq, dtype=np.uint8)


def cgr_trajectory(seq) -> np.ndarray:
    """Points of the midpoint recursion started at (0.5, 0.5), shape (len, 2).

    The start point itself is not emitted. Halving is exact in binary, so
    the filter below reproduces the scalar recursion bit for bit.
    """
    codes = _codes(seq)
    if codes.size == 0:
        return np.empty((0, 2))
    b, a = [0.5], [1.0, -0.5]
    zi = [0.25]  # 0.5 * start coordinate
    x, _ = lfilter(b, a, CORNER_X[codes], zi=zi)
    y, _ = lfilter(b, a, CORNER_Y[codes], zi=zi)
    return np.column_stack([x, y])


def pixel_indices(points: np.ndarray, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """(row, col) of each point; row 0 is the top edge, y grows upward."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    r = resolution
    col = np.minimum(np.floor(pts[:, 0] * r), r - 1).astype(np.int64)
    row = np.minimum(np.floor((1.0 - pts[:, 1]) * r), r - 1).astype(np.int64)
    return row, col


def rasterize(points, resolution: int = DEFAULT_RESOLUTION) -> np.ndarray:
    """Binary R x R occupancy image of a trajectory."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    img = np.zeros((resolution, resolution), dtype=np.uint8)
    row, col = pixel_indices(points, resolution)
    img[row, col] = 1
    return img


def cgr_image(seq, resolution: int = DEFAULT_RESOLUTION) -> np.ndarray:
    return rasterize(cgr_trajectory(seq), resolution)


def build_cube(sample: NetworkSample | Sequence, resolution: int = DEFAULT_RESOLUTION) -> np.ndarray:
    """Stack per-gene images along the third axis: shape (R, R, n_genes).

    Accepts a NetworkSample or any sequence of genes (GeneSequence, str or
    base-code arrays) in network order.
    """
    genes = sample.genes if isinstance(sample, NetworkSample) else sample
    if len(genes) < 1:
        raise ValueError("a cube needs at least one gene")
    cube = np.zeros((resolution, resolution, len(genes)), dtype=np.uint8)
    for k, g in enumerate(genes):
        row, col = pixel_indices(cgr_trajectory(g), resolution)
        cube[row, col, k] = 1
    return cube


def write_cube(path, cube: np.ndarray) -> None:
    """Little-endian header then bytes ordered gene slice, row, column."""
    n1, n2, n3 = cube.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CUBE_MAGIC, n1, n2, n3))
        fh.write(np.ascontiguousarray(np.transpose(cube, (2, 0, 1)), dtype=np.uint8).tobytes())


def read_cube(path) -> np.ndarray:
    data = Path(path).read_bytes()
    magic, n1, n2, n3 = _HEADER.unpack_from(data)
    if magic != CUBE_MAGIC:
        raise ValueError(f"{path}: not a CGR cube file")
    body = np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size)
    if body.size != n1 * n2 * n3:
        raise ValueError(f"{path}: expected {n1 * n2 * n3} data bytes, found {body.size}")
    return np.transpose(body.reshape(n3, n1, n2), (1, 2, 0)).copy()


def write_pgm(path, image: np.ndarray) -> None:
    """Binary graymap; set pixels are drawn black on white."""
    img = np.where(np.asarray(image) > 0, 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
