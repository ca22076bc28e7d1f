import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geneteams.cgr import (
    build_cube,
    cgr_image,
    cgr_trajectory,
    pixel_indices,
    rasterize,
    read_cube,
    write_cube,
    write_pgm,
)
from geneteams.seq import GeneSequence, NetworkSample
from oracles import cgr_points_loop

dna = st.text(alphabet="ACGT", max_size=300)


def test_single_base():
    assert cgr_trajectory("A").tolist() == [[0.25, 0.25]]


def test_acgt_exact():
    expected = [[0.25, 0.25], [0.125, 0.625], [0.5625, 0.3125], [0.78125, 0.65625]]
    assert cgr_trajectory("ACGT").tolist() == expected


def test_empty():
    assert cgr_trajectory("").shape == (0, 2)
    assert rasterize(cgr_trajectory(""), 4).sum() == 0


def test_matches_loop_oracle(rng):
    s = "".join(rng.choice(list("ACGT"), 2000))
    assert cgr_trajectory(s).tolist() == [list(p) for p in cgr_points_loop(s)]


@settings(max_examples=100, deadline=None)
@given(dna, dna)
def test_prefix_stability(p, q):
    a, b = cgr_trajectory(p + q), cgr_trajectory(p)
    assert np.array_equal(a[: len(p)], b)


@settings(max_examples=100, deadline=None)
@given(dna, st.text(alphabet="ACGT", min_size=1, max_size=40))
def test_suffix_determines_square(p, suffix):
    m = len(suffix)
    a, b = cgr_trajectory(p + suffix)[-1], cgr_trajectory(suffix)[-1]
    assert np.all(np.abs(a - b) <= 2.0 ** -m)


@settings(max_examples=50, deadline=None)
@given(dna)
def test_points_inside_unit_square(s):
    pts = cgr_trajectory(s)
    assert np.all((pts > 0) & (pts < 1))


def test_raster_examples():
    img = rasterize(np.array([[0.25, 0.25]]), 2)
    assert img.tolist() == [[0, 0], [1, 0]]
    img = rasterize(np.array([[0.75, 0.75]]), 2)
    assert img.tolist() == [[0, 1], [0, 0]]


def test_raster_clamps_boundary():
    row, col = pixel_indices(np.array([[1.0, 0.0], [0.0, 1.0]]), 4)
    assert row.tolist() == [3, 0] and col.tolist() == [3, 0]


def test_raster_is_binary_and_idempotent():
    pts = cgr_trajectory("ACGTACGTTTGCA")
    once = rasterize(pts, 16)
    twice = rasterize(np.vstack([pts, pts]), 16)
    assert np.array_equal(once, twice)
    assert set(np.unique(once)) <= {0, 1}
    with pytest.raises(ValueError):
        rasterize(pts, 1)


def test_cube_shape_and_slices(rng):
    genes = tuple(GeneSequence(f"g{k}", "".join(rng.choice(list("ACGT"), 50))) for k in range(31))
    cube = build_cube(NetworkSample("s", "control", genes), 700)
    assert cube.shape == (700, 700, 31) and cube.dtype == np.uint8
    for k in (0, 30):
        assert np.array_equal(cube[:, :, k], cgr_image(genes[k], 700))


def test_cube_empty_gene_and_identical_genes():
    cube = build_cube(["", "ACGT", "ACGT"], 8)
    assert cube[:, :, 0].sum() == 0
    assert np.array_equal(cube[:, :, 1], cube[:, :, 2])
    with pytest.raises(ValueError):
        build_cube([], 8)


def test_cube_file_round_trip(tmp_path, rng):
    cube = (rng.random((5, 6, 3)) > 0.5).astype(np.uint8)
    write_cube(tmp_path / "c.cgr", cube)
    assert np.array_equal(read_cube(tmp_path / "c.cgr"), cube)
    raw = (tmp_path / "c.cgr").read_bytes()
    assert raw[:4] == b"CGR3" and len(raw) == 16 + cube.size
    # first stored slice is gene 0, row-major
    assert np.frombuffer(raw[16:46], dtype=np.uint8).tolist() == cube[:, :, 0].ravel().tolist()


def test_pgm(tmp_path):
    img = np.array([[1, 0], [0, 0]], dtype=np.uint8)
    write_pgm(tmp_path / "x.pgm", img)
    assert (tmp_path / "x.pgm").read_bytes() == b"P5\n2 2\n255\n" + bytes([0, 255, 255, 255])
