import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfmlmc.rng import GAMMA, RngStream, as_stream, child_keys, mix64_py, uniforms_from_keys


def test_splitmix64_reference_outputs():
    # first two outputs of the reference SplitMix64 generator seeded with 0
    assert mix64_py(int(GAMMA)) == 0xE220A8397B1DCDAF
    assert mix64_py(2 * int(GAMMA)) == 0x6E789E6AA1B965F4


@given(st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1))
def test_streams_reproducible(seed, sid):
    a, b = RngStream(seed, sid), RngStream(seed, sid)
    np.testing.assert_array_equal(a.uniform(16), b.uniform(16))
    np.testing.assert_array_equal(a.uniform(8, start=8), a.uniform(16)[8:])


def test_children_distinct():
    root = RngStream(1)
    keys = {root.child(i, j).key for i in range(50) for j in range(50)}
    assert len(keys) == 2500
    assert root.child(1, 2).key != root.child(2, 1).key
    assert root.child(3).child(4).key == root.child(3, 4).key


@given(st.integers(0, 2**63), st.lists(st.integers(0, 10**6), min_size=1, max_size=4))
def test_child_keys_vectorised(seed, path):
    root = RngStream(seed, 7)
    keys = child_keys(root, *path)
    assert int(keys) == int(root.child(*path).key)


def test_child_keys_arrays_and_uniforms():
    root = RngStream(5)
    keys = child_keys(root, 0, np.arange(4), 2)
    assert [int(k) for k in keys] == [int(root.child(0, i, 2).key) for i in range(4)]
    U = uniforms_from_keys(keys, 3)
    for i in range(4):
        np.testing.assert_array_equal(U[i], root.child(0, i, 2).uniform(3))


def test_uniform_moments():
    u = RngStream(11).uniform(200_000)
    assert np.all((u > 0) & (u < 1))
    assert abs(u.mean() - 0.5) < 3 * np.sqrt(1 / 12 / len(u))
    assert np.corrcoef(u[:-1], u[1:])[0, 1] == pytest.approx(0, abs=0.01)


def test_normal_and_poisson_moments():
    z = RngStream(12).normal(200_000)
    assert abs(z.mean()) < 0.01 and z.var() == pytest.approx(1, rel=0.02)
    for lam in (0.3, 4.0, 50.0, 2000.0):
        k = RngStream(13).poisson(lam, 100_000)
        assert abs(k.mean() - lam) < 4 * np.sqrt(lam / len(k))
        assert k.var() == pytest.approx(lam, rel=0.05)
    assert np.all(RngStream(14).poisson(0.0, 10) == 0)


def test_as_stream():
    s = RngStream(3)
    assert as_stream(s) is s
    assert as_stream(3) == s
    assert as_stream(None) == RngStream(0)
    with pytest.raises(TypeError):
        as_stream("seed")
