"""Dense tensors, Kronecker and outer products, operator reshaping.

Dense tensors are plain ``numpy.ndarray`` objects in row-major (C) order,
so the last axis varies fastest. With axes ordered ``(t, x, y, z)`` this is
the global index convention used throughout the package: time slowest,
``z`` fastest. These routines are the oracle for the tensor-train code.
"""

from __future__ import annotations

from functools import reduce

import numpy as np

from ._validation import check_dense_size

__all__ = [
    "MultiIndexMap",
    "as_dense",
    "kron",
    "outer",
    "mat_to_optensor",
    "optensor_to_mat",
    "apply_optensor",
]


class MultiIndexMap:
    """Row-major bijection between multi-indices and linear indices."""

    def __init__(self, dims):
        self.dims = tuple(int(n) for n in dims)
        if not self.dims or any(n < 1 for n in self.dims):
            raise ValueError(f"dims must be positive, got {dims!r}")

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    def linear(self, multi_index):
        """Linear index of ``multi_index`` (a tuple of ints or of arrays)."""
        return np.ravel_multi_index(tuple(multi_index), self.dims)

    def multi(self, linear_index):
        return np.unravel_index(linear_index, self.dims)


def as_dense(data, dims=None) -> np.ndarray:
    """Validate ``data`` as a dense tensor, reshaping a flat array to ``dims``."""
    arr = np.asarray(data, dtype=float)
    if dims is not None:
        dims = tuple(int(n) for n in dims)
        if arr.size != int(np.prod(dims)):
            raise ValueError(f"data of size {arr.size} does not fit dims {dims}")
        arr = arr.reshape(dims)
    if arr.ndim < 1:
        raise ValueError("a tensor needs at least one dimension")
    check_dense_size(arr.shape)
    return arr


def kron(*matrices) -> np.ndarray:
    """Kronecker product of one or more matrices, left factor slowest."""
    if len(matrices) == 1 and isinstance(matrices[0], (list, tuple)):
        matrices = tuple(matrices[0])
    mats = [np.atleast_2d(np.asarray(m, dtype=float)) for m in matrices]
    rows = int(np.prod([m.shape[0] for m in mats]))
    cols = int(np.prod([m.shape[1] for m in mats]))
    check_dense_size((rows, cols), "Kronecker product")
    return reduce(np.kron, mats)


def outer(A, B) -> np.ndarray:
    """Tensor (outer) product; the result has axes ``A.shape + B.shape``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    check_dense_size(A.shape + B.shape, "outer product")
    return np.multiply.outer(A, B)


def _interleave(d: int) -> list[int]:
    # (i_1..i_d, j_1..j_d) -> (i_1, j_1, ..., i_d, j_d)
    return [ax for k in range(d) for ax in (k, d + k)]


def mat_to_optensor(A, row_dims, col_dims) -> np.ndarray:
    """Reshape a matrix into an order-``2d`` operator tensor.

    The axes of the result are interleaved ``(i_1, j_1, ..., i_d, j_d)`` so
    that ``T[i_1, j_1, ..., i_d, j_d] == A[i_1...i_d, j_1...j_d]`` under the
    row-major multi-index map.
    """
    A = np.asarray(A, dtype=float)
    row_dims = [int(n) for n in row_dims]
    col_dims = [int(n) for n in col_dims]
    if len(row_dims) != len(col_dims):
        raise ValueError("row_dims and col_dims must have equal length")
    if A.ndim != 2 or A.shape != (int(np.prod(row_dims)), int(np.prod(col_dims))):
        raise ValueError(
            f"matrix of shape {A.shape} does not match row_dims {row_dims} "
            f"and col_dims {col_dims}"
        )
    d = len(row_dims)
    return A.reshape(row_dims + col_dims).transpose(_interleave(d))


def optensor_to_mat(T) -> np.ndarray:
    """Inverse of :func:`mat_to_optensor`."""
    T = np.asarray(T, dtype=float)
    if T.ndim % 2:
        raise ValueError("an operator tensor has an even number of axes")
    d = T.ndim // 2
    row_dims = T.shape[0::2]
    col_dims = T.shape[1::2]
    perm = list(range(0, 2 * d, 2)) + list(range(1, 2 * d, 2))
    return T.transpose(perm).reshape(int(np.prod(row_dims)), int(np.prod(col_dims)))


def apply_optensor(op, u) -> np.ndarray:
    """Contract an interleaved operator tensor with a dense tensor.

    ``result[i_1..i_d] = sum_j op[i_1, j_1, ..., i_d, j_d] * u[j_1..j_d]``.
    """
    op = np.asarray(op, dtype=float)
    u = np.asarray(u, dtype=float)
    d = u.ndim
    if op.ndim != 2 * d or tuple(op.shape[1::2]) != u.shape:
        raise ValueError(
            f"operator with shape {op.shape} cannot act on tensor of shape {u.shape}"
        )
    return np.tensordot(op, u, axes=(list(range(1, 2 * d, 2)), list(range(d))))
