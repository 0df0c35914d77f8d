import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtri

from holderlab.rng import RngStream, derive_stream, inverse_normal_cdf, root_stream

GOLDEN_W0 = [-1.0024339516419485, 0.19070433562827419, -1.1392589286160464, -0.1819235809879667]


def test_golden_normals_are_frozen():
    assert derive_stream(42, "w", 0).normals(4).tolist() == GOLDEN_W0


def test_derive_matches_child():
    assert derive_stream(7, "a", 3) == root_stream(7).child("a", 3)
    assert derive_stream(7, "a", 3).key == RngStream(7, (("a", 3),)).key


def test_labels_separate_streams():
    base = root_stream(1)
    keys = {base.child("a", 0).key, base.child("a", 1).key, base.child("b", 0).key,
            root_stream(2).child("a", 0).key, base.child("a", 0).child("a", 0).key}
    assert len(keys) == 5


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**40), st.integers(1, 50), st.integers(0, 200))
def test_positions_are_addressable(seed, n, offset):
    s = root_stream(seed).child("x")
    full = s.normals(offset + n)
    assert np.array_equal(s.normals(n, offset=offset), full[offset:])


def test_normal_block_is_chunk_invariant():
    s = root_stream(3).child("blk")
    whole = s.normal_block(10, 7)
    parts = np.vstack([s.normal_block(3, 7, 0), s.normal_block(4, 7, 3), s.normal_block(3, 7, 7)])
    assert np.array_equal(whole, parts)


def test_uniforms_open_interval():
    u = root_stream(0).uniforms(100_000)
    assert u.min() > 0.0 and u.max() < 1.0


def test_inverse_cdf_against_scipy():
    u = np.concatenate([np.linspace(1e-300, 1e-10, 50), np.linspace(1e-6, 1 - 1e-6, 20001),
                        1 - np.logspace(-16, -7, 50)])
    z, ref = inverse_normal_cdf(u), ndtri(u)
    assert np.max(np.abs(z - ref) / np.maximum(1.0, np.abs(ref))) < 1e-14


def test_normal_moments_and_independence():
    s = root_stream(11)
    a, b = s.child("a").normals(200_000), s.child("b").normals(200_000)
    # 5-sigma bands for mean, variance and cross-correlation
    assert abs(a.mean()) < 5 / np.sqrt(a.size)
    assert abs(a.var() - 1) < 5 * np.sqrt(2 / a.size)
    assert abs(np.corrcoef(a, b)[0, 1]) < 5 / np.sqrt(a.size)
    assert abs(np.corrcoef(a[:-1], a[1:])[0, 1]) < 5 / np.sqrt(a.size)


def test_rademacher_balanced():
    e = root_stream(5).rademacher(100_000)
    assert set(np.unique(e)) == {-1.0, 1.0}
    assert abs(e.mean()) < 5 / np.sqrt(e.size)


def test_stream_is_hashable_value():
    assert {root_stream(1).child("a"), root_stream(1).child("a")} == {root_stream(1).child("a")}
    with pytest.raises(Exception):
        root_stream(1).master_seed = 3
