import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geneteams.empr import (
    DegenerateCubeError,
    ads_supports,
    all_terms,
    constant_weights,
    cube_features,
    decompose,
    read_features_csv,
    reconstruct,
    weighted_inner,
    write_features_csv,
)
from oracles import ads_loop, empr_loop


def _cube(rng, shape, binary=True):
    if binary:
        c = (rng.random(shape) < 0.3).astype(np.uint8)
        c.flat[0] = 1
        return c
    return rng.random(shape) + 0.1


def test_constant_weights():
    w = constant_weights(2, 3, 4)
    assert w.w1.tolist() == [0.5, 0.5]
    assert np.allclose(w.w3, 0.25)
    for v in (w.w1, w.w2, w.w3):
        assert v.sum() == pytest.approx(1.0, abs=1e-15)


def test_ads_constant_cube():
    s = ads_supports(np.full((3, 4, 5), 7.0))
    for v in (s.s1, s.s2, s.s3):
        assert np.allclose(v, 1.0, atol=1e-14)


def test_ads_counting_cube():
    G = np.arange(1, 9, dtype=float).reshape(2, 2, 2)
    w = constant_weights(2, 2, 2)
    raw = [G.mean(axis=(1, 2)), G.mean(axis=(0, 2)), G.mean(axis=(0, 1))]
    assert raw[0].tolist() == [2.5, 6.5]
    s = ads_supports(G)
    for got, r, wr in zip((s.s1, s.s2, s.s3), raw, (w.w1, w.w2, w.w3)):
        assert np.allclose(got, r / np.sqrt(np.sum(wr * r**2)), atol=1e-15)


def test_zero_cube_rejected():
    with pytest.raises(DegenerateCubeError):
        ads_supports(np.zeros((3, 3, 2)))


@pytest.mark.parametrize("binary", [True, False])
def test_against_loop_oracle(rng, binary):
    G = _cube(rng, (5, 4, 3), binary)
    w = constant_weights(*G.shape)
    s = ads_loop(G, (w.w1, w.w2, w.w3))
    d = decompose(G, full=True)
    for a, b in zip(s, d.supports):
        assert np.max(np.abs(a - b)) <= 1e-12
    g0, ones, twos = empr_loop(G, (w.w1, w.w2, w.w3), s)
    assert abs(d.g0 - g0) <= 1e-12
    for a, b in zip(ones, (d.g1, d.g2, d.g3)):
        assert np.max(np.abs(a - b)) <= 1e-12
    for a, b in zip(twos, (d.g12, d.g13, d.g23)):
        assert np.max(np.abs(a - b)) <= 1e-12


shapes = st.tuples(st.integers(1, 9), st.integers(1, 9), st.integers(1, 5))


@settings(max_examples=60, deadline=None)
@given(shapes, st.booleans(), st.integers(0, 2**32))
def test_vanishing_orthogonality_reconstruction(shape, binary, seed):
    G = _cube(np.random.default_rng(seed), shape, binary)
    d = decompose(G, full=True)
    w, (s1, s2, s3) = d.weights, d.supports
    for v, wv, sv in ((d.g1, w.w1, s1), (d.g2, w.w2, s2), (d.g3, w.w3, s3)):
        assert abs(np.sum(wv * sv * v)) <= 1e-10
    for gij, (wa, sa), (wb, sb) in (
        (d.g12, (w.w1, s1), (w.w2, s2)),
        (d.g13, (w.w1, s1), (w.w3, s3)),
        (d.g23, (w.w2, s2), (w.w3, s3)),
    ):
        assert np.max(np.abs((wa * sa) @ gij), initial=0) <= 1e-10
        assert np.max(np.abs(gij @ (wb * sb)), initial=0) <= 1e-10
    for ax, (wv, sv) in enumerate(((w.w1, s1), (w.w2, s2), (w.w3, s3))):
        assert np.max(np.abs(np.tensordot(d.g123, wv * sv, axes=([ax], [0])))) <= 1e-10
    for sv, wv in ((s1, w.w1), (s2, w.w2), (s3, w.w3)):
        assert abs(np.sum(wv * sv**2) - 1.0) <= 1e-10
    terms = all_terms(d)
    for i in range(len(terms)):
        for j in range(i + 1, len(terms)):
            assert abs(weighted_inner(terms[i], terms[j], w)) <= 1e-9
    err = np.linalg.norm(reconstruct(d) - G) / np.linalg.norm(G)
    assert err <= 1e-9


def test_rank_one_cube_has_no_residual(rng):
    a, b, c = rng.random(4) + 0.1, rng.random(3) + 0.1, rng.random(2) + 0.1
    d = decompose(np.einsum("i,j,k->ijk", a, b, c), full=True)
    for t in (d.g1, d.g2, d.g3, d.g12, d.g13, d.g23, d.g123):
        assert np.max(np.abs(t)) <= 1e-12


def test_constant_cube_only_g0():
    d = decompose(np.full((3, 4, 2), 5.0), full=True)
    assert d.g0 == pytest.approx(5.0, abs=1e-12)
    for t in (d.g1, d.g2, d.g3, d.g12, d.g13, d.g23, d.g123):
        assert np.max(np.abs(t)) <= 1e-12


def test_feature_lengths(rng):
    G = _cube(rng, (700, 700, 31))
    assert cube_features(G).shape == (1431,)
    G = _cube(rng, (731, 731, 31))
    assert cube_features(G).shape == (1493,)


def test_scaling_invariance_of_supports_and_equivariance(rng):
    G = _cube(rng, (6, 5, 4), binary=False)
    d, d2 = decompose(G), decompose(3.0 * G)
    for a, b in zip(d.supports, d2.supports):
        assert np.allclose(a, b, atol=1e-13)
    assert np.allclose(cube_features(3.0 * G), 3.0 * cube_features(G), atol=1e-12)


def test_permutation_equivariance(rng):
    G = _cube(rng, (6, 5, 4), binary=False)
    p = rng.permutation(4)
    d, dp = decompose(G), decompose(G[:, :, p])
    assert np.allclose(dp.g3, d.g3[p], atol=1e-13)
    assert np.allclose(dp.g1, d.g1, atol=1e-13)


def test_uint8_and_float_agree(rng):
    G = _cube(rng, (30, 30, 4))
    assert np.array_equal(cube_features(G), cube_features(G.astype(float)))


def test_features_csv_round_trip(tmp_path, rng):
    X = rng.normal(size=(3, 7))
    write_features_csv(tmp_path / "f.csv", ["a", "b", "c"], ["control", "patient", "control"], X)
    ids, labels, back = read_features_csv(tmp_path / "f.csv")
    assert ids == ["a", "b", "c"] and labels[1] == "patient"
    assert np.array_equal(back, X)
