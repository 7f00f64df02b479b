import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ttcdr._validation import MemoryGuardError
from ttcdr.tensor import MultiIndexMap, apply_optensor, as_dense, kron, mat_to_optensor, optensor_to_mat, outer

dims_st = st.lists(st.integers(1, 4), min_size=1, max_size=4)


def test_row_major_linear_index():
    m = MultiIndexMap([2, 3, 4])
    assert m.linear((1, 2, 3)) == 1 * 12 + 2 * 4 + 3
    assert m.size == 24
    assert tuple(int(i) for i in m.multi(23)) == (1, 2, 3)


@given(dims_st)
def test_index_map_is_bijective(dims):
    m = MultiIndexMap(dims)
    lin = np.arange(m.size)
    np.testing.assert_array_equal(m.linear(m.multi(lin)), lin)


def test_kron_matches_numpy_and_ordering(rng):
    A, B = rng.standard_normal((2, 3)), rng.standard_normal((4, 2))
    K = kron(A, B)
    np.testing.assert_allclose(K, np.kron(A, B))
    # left factor slowest: K[i*4 + k, j*2 + l] = A[i, j] * B[k, l]
    assert K[1 * 4 + 3, 2 * 2 + 1] == pytest.approx(A[1, 2] * B[3, 1])
    np.testing.assert_allclose(kron([A, B, A]), np.kron(np.kron(A, B), A))


def test_outer_shape(rng):
    A, B = rng.standard_normal((2, 3)), rng.standard_normal(4)
    assert outer(A, B).shape == (2, 3, 4)


@given(st.lists(st.integers(1, 3), min_size=1, max_size=3), st.integers(0, 2**31 - 1))
def test_optensor_roundtrip_and_application(dims, seed):
    rng = np.random.default_rng(seed)
    n = int(np.prod(dims))
    A = rng.standard_normal((n, n))
    T = mat_to_optensor(A, dims, dims)
    np.testing.assert_array_equal(optensor_to_mat(T), A)
    u = rng.standard_normal(dims)
    np.testing.assert_allclose(apply_optensor(T, u).ravel(), A @ u.ravel(), atol=1e-12)


def test_optensor_of_kron_factorizes(rng):
    A, B = rng.standard_normal((2, 3)), rng.standard_normal((4, 5))
    T = mat_to_optensor(np.kron(A, B), [2, 4], [3, 5])
    np.testing.assert_allclose(T, np.multiply.outer(A, B))


def test_shape_errors(rng):
    with pytest.raises(ValueError):
        mat_to_optensor(np.zeros((4, 4)), [2, 3], [2, 2])
    with pytest.raises(ValueError):
        apply_optensor(np.zeros((2, 2, 2, 2)), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        as_dense(np.arange(5), (2, 3))


def test_memory_guard():
    with pytest.raises(MemoryGuardError):
        kron(np.zeros((2**16, 1)), np.zeros((2**16, 1)))
