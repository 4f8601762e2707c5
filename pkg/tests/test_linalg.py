import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from mml import linalg

from conftest import random_antisymmetric


def test_pfaffian_two_by_two():
    a = 1.7
    assert np.isclose(linalg.pfaffian(np.array([[0.0, a], [-a, 0.0]])), a)


def test_pfaffian_block_direct_sum():
    blocks = [np.array([[0.0, 1.0], [-1.0, 0.0]])] * 4
    assert np.isclose(linalg.pfaffian(sla.block_diag(*blocks)), 1.0)


def test_pfaffian_squared_is_determinant():
    rng = np.random.default_rng(0)
    a = random_antisymmetric(rng, 8)
    pf = linalg.pfaffian(a)
    assert abs(pf ** 2 - np.linalg.det(a)) <= 1e-10 * abs(np.linalg.det(a))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([2, 4, 6, 10, 16, 32, 64]))
def test_pfaffian_determinant_property(seed, dim):
    rng = np.random.default_rng(seed)
    a = random_antisymmetric(rng, dim)
    pf = linalg.pfaffian(a)
    det = np.linalg.det(a)
    assert abs(pf ** 2 - det) <= 1e-10 * max(abs(det), 1e-280)


def test_pfaffian_complex():
    rng = np.random.default_rng(3)
    a = random_antisymmetric(rng, 6) + 1j * random_antisymmetric(rng, 6)
    pf = linalg.pfaffian(a)
    assert abs(pf ** 2 - np.linalg.det(a)) <= 1e-10 * abs(np.linalg.det(a))


def test_pfaffian_odd_dimension_rejected():
    with pytest.raises(ValueError, match="odd-dimensional"):
        linalg.pfaffian(np.zeros((3, 3)))


def test_pfaffian_asymmetry_rejected():
    with pytest.raises(ValueError, match="antisymmetric"):
        linalg.pfaffian(np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_pfaffian_zero_matrix():
    assert linalg.pfaffian(np.zeros((4, 4))) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([2, 4, 8, 12]))
def test_canonical_roundtrip(seed, dim):
    rng = np.random.default_rng(seed)
    a = random_antisymmetric(rng, dim)
    o, vals = linalg.antisym_canonical(a)
    assert np.allclose(o @ o.T, np.eye(dim), atol=1e-10)
    assert np.all(vals >= 0) and np.all(np.diff(vals) >= -1e-12)
    assert np.allclose(o @ a @ o.T, linalg.antisym_blocks(vals), atol=1e-10)
    assert np.allclose(o.T @ linalg.antisym_blocks(vals) @ o, a, atol=1e-10)


def test_canonical_degenerate_values():
    a = linalg.antisym_blocks(np.array([1.0, 1.0, 1.0]))
    o, vals = linalg.antisym_canonical(a)
    assert np.allclose(vals, 1.0)
    assert np.allclose(o.T @ linalg.antisym_blocks(vals) @ o, a, atol=1e-12)


def test_orthogonal_log_roundtrip():
    rng = np.random.default_rng(7)
    k = random_antisymmetric(rng, 8, scale=0.6)
    o = sla.expm(k)
    k2 = linalg.orthogonal_log(o)
    assert np.allclose(sla.expm(k2), o, atol=1e-9)


def test_orthogonal_log_half_turn():
    # a rotation with an exact -1 eigenvalue pair
    o = sla.block_diag([[-1.0, 0.0], [0.0, -1.0]], np.eye(2))
    k = linalg.orthogonal_log(o)
    assert np.allclose(sla.expm(k), o, atol=1e-9)


def test_orthogonal_log_rejects_reflections():
    with pytest.raises(ValueError):
        linalg.orthogonal_log(np.diag([-1.0, 1.0, 1.0, 1.0]))


def test_cayley_roundtrip():
    rng = np.random.default_rng(9)
    from conftest import random_mixed_cm

    cm = random_mixed_cm(rng, 3)
    w = linalg.cayley_from_cm(cm.data)
    back = linalg.cm_from_cayley(w)
    assert np.allclose(back, cm.data, atol=1e-10)
