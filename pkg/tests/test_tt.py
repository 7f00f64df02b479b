import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ttcdr.tensor import kron
from ttcdr.tt import (
    TTMatrix,
    TTVector,
    diag_lift,
    kron_to_ttmatrix,
    load_tt,
    save_tt,
    tt_add,
    tt_dot,
    tt_identity,
    tt_matmat,
    tt_matvec,
    tt_norm,
    tt_ones,
    tt_random,
    tt_round,
    tt_svd,
    tt_zeros,
)

small_dims = st.lists(st.integers(1, 5), min_size=2, max_size=4)
seeds = st.integers(0, 2**31 - 1)


def random_ttmatrix(rng, rows, cols, rank):
    r = [1] + [rank] * (len(rows) - 1) + [1]
    return TTMatrix([rng.standard_normal((r[k], m, n, r[k + 1])) for k, (m, n) in enumerate(zip(rows, cols))])


@given(small_dims, seeds)
def test_svd_roundtrip(dims, seed):
    x = np.random.default_rng(seed).standard_normal(dims)
    tt = tt_svd(x, 1e-14)
    assert np.linalg.norm(tt.full() - x) <= 1e-12 * np.linalg.norm(x)


def test_svd_recovers_exact_ranks():
    t = np.linspace(0, 1, 6)
    x = np.sin(t[:, None, None, None] + t[None, :, None, None] + t[None, None, :, None] + t[None, None, None, :])
    tt = tt_svd(x, 1e-12)
    assert tt.ranks == [1, 2, 2, 2, 1]
    assert tt_svd(np.ones((3, 4, 5)), 1e-12).ranks == [1, 1, 1, 1]


@given(st.lists(st.integers(2, 5), min_size=3, max_size=4), seeds, st.sampled_from([1e-2, 1e-4, 1e-8]))
def test_round_error_contract(dims, seed, tol):
    rng = np.random.default_rng(seed)
    x = tt_random(dims, 3, rng) + tt_random(dims, 2, rng) * 1e-3
    dense = x.full()
    y = tt_round(x, tol)
    assert np.linalg.norm(y.full() - dense) <= tol * np.linalg.norm(dense) * (1 + 1e-10)
    assert all(r <= 5 for r in y.ranks)


def test_round_cancels_to_zero(rng):
    x = tt_random([3, 4, 5, 2], 2, rng)
    z = tt_round(x + x - x * 2.0, 1e-12)
    assert z.ranks == [1, 1, 1, 1, 1] and tt_norm(z) == 0.0


def test_round_max_rank(rng):
    x = tt_random([4, 4, 4, 4], 4, rng)
    assert tt_round(x, 0.0, max_rank=2).max_rank == 2


def test_add_scale_dot_norm(rng):
    a, b = tt_random([3, 4, 2], 2, rng), tt_random([3, 4, 2], 3, rng)
    A, B = a.full(), b.full()
    np.testing.assert_allclose((a + b).full(), A + B, atol=1e-13)
    np.testing.assert_allclose((a - 2.5 * b).full(), A - 2.5 * B, atol=1e-13)
    assert tt_dot(a, b) == pytest.approx(np.sum(A * B))
    assert tt_norm(a) == pytest.approx(np.linalg.norm(A))
    assert (a + b).ranks == [1, 5, 5, 1]
    with pytest.raises(ValueError):
        tt_add(a, tt_random([3, 4, 3], 2, rng))


def test_entry_access_and_evaluate(rng):
    a = tt_random([3, 4, 5], 2, rng)
    A = a.full()
    assert a[2, 1, 4] == pytest.approx(A[2, 1, 4])
    idx = np.array([[0, 0, 0], [2, 3, 4], [1, 2, 3]])
    np.testing.assert_allclose(a.evaluate(idx), A[tuple(idx.T)])


@given(st.lists(st.integers(1, 5), min_size=2, max_size=4), seeds)
def test_matvec_matches_dense(dims, seed):
    rng = np.random.default_rng(seed)
    cols = [max(1, n - 1) for n in dims]
    A = random_ttmatrix(rng, dims, cols, 2)
    x = tt_random(cols, 2, rng)
    ref = A.full() @ x.full().ravel()
    got = tt_matvec(A, x).full().ravel()
    assert np.linalg.norm(got - ref) <= 1e-12 * max(1.0, np.linalg.norm(ref))


@given(st.lists(st.integers(1, 5), min_size=2, max_size=4), seeds)
def test_matmat_matches_dense(dims, seed):
    rng = np.random.default_rng(seed)
    A = random_ttmatrix(rng, dims, dims, 2)
    B = random_ttmatrix(rng, dims, [2] * len(dims), 2)
    ref = A.full() @ B.full()
    assert np.linalg.norm((A @ B).full() - ref) <= 1e-12 * max(1.0, np.linalg.norm(ref))


def test_kron_to_ttmatrix_matches_kron(rng):
    mats = [rng.standard_normal((2, 3)), rng.standard_normal((4, 4)), rng.standard_normal((3, 2))]
    T = kron_to_ttmatrix(mats)
    assert T.ranks == [1, 1, 1, 1]
    np.testing.assert_allclose(T.full(), kron(*mats), atol=1e-14)
    np.testing.assert_allclose(tt_identity([2, 3]).full(), np.eye(6))


@given(st.lists(st.integers(1, 5), min_size=2, max_size=4), seeds)
def test_diag_lift_is_hadamard(dims, seed):
    rng = np.random.default_rng(seed)
    k, u = tt_random(dims, 2, rng), tt_random(dims, 3, rng)
    D = diag_lift(k)
    assert D.ranks == k.ranks
    np.testing.assert_allclose(D.full(), np.diag(k.full().ravel()), atol=1e-13)
    np.testing.assert_allclose(tt_matvec(D, u).full(), k.full() * u.full(), atol=1e-12)


def test_matrix_rounding_and_transpose(rng):
    A = kron_to_ttmatrix([rng.standard_normal((3, 3)) for _ in range(3)])
    S = tt_round(A + A + A, 1e-12)
    assert S.ranks == [1, 1, 1, 1]
    np.testing.assert_allclose(S.full(), 3 * A.full(), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(A.T.full(), A.full().T)


def test_reversed(rng):
    x = tt_random([2, 3, 4], 2, rng)
    np.testing.assert_allclose(x.reversed().full(), x.full().transpose(2, 1, 0))


def test_constructors():
    assert tt_zeros([2, 3]).full().sum() == 0.0
    np.testing.assert_array_equal(tt_ones([2, 3]).full(), np.ones((2, 3)))
    with pytest.raises(ValueError):
        TTVector([np.zeros((1, 2, 2)), np.zeros((3, 2, 1))])


@pytest.mark.parametrize("kind", ["vector", "matrix"])
def test_save_load_roundtrip(tmp_path, rng, kind):
    obj = tt_random([3, 4, 2], 2, rng) if kind == "vector" else random_ttmatrix(rng, [2, 3], [3, 2], 2)
    path = tmp_path / "x.tt"
    save_tt(obj, path)
    back = load_tt(path)
    assert type(back) is type(obj)
    for a, b in zip(obj.cores, back.cores):
        np.testing.assert_array_equal(a, b)
    raw = path.read_bytes()
    assert raw[:8] in (b"TTVEC\0\0\0", b"TTMAT\0\0\0")
    assert int.from_bytes(raw[8:16], "little") == obj.d


def test_load_rejects_garbage():
    with pytest.raises(ValueError):
        load_tt(io.BytesIO(b"NOTATT\0\0" + b"\0" * 16))
