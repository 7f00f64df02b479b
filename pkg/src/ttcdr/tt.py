"""Tensor-train vectors and TT-matrices.

A :class:`TTVector` holds order-3 cores ``G_k`` of shape ``(r_{k-1}, n_k, r_k)``
with ``r_0 = r_d = 1``; an entry of the tensor is the product of the matrix
slices ``G_1[:, i_1, :] @ ... @ G_d[:, i_d, :]``. A :class:`TTMatrix` holds
order-4 cores of shape ``(r_{k-1}, m_k, n_k, r_k)``, the row index ``i_k`` and
column index ``j_k`` of one mode sharing a core. Rounding a TT-matrix treats
``(i_k, j_k)`` as one fused mode of extent ``m_k * n_k``.
"""

from __future__ import annotations

import io
import struct
from typing import Sequence

import numpy as np

from ._validation import check_dense_size, check_tolerance
from .tensor import as_dense

__all__ = [
    "TTVector",
    "TTMatrix",
    "tt_svd",
    "tt_to_dense",
    "tt_round",
    "tt_add",
    "tt_scale",
    "tt_dot",
    "tt_norm",
    "tt_zeros",
    "tt_ones",
    "tt_random",
    "kron_to_ttmatrix",
    "tt_identity",
    "diag_lift",
    "tt_matvec",
    "tt_matmat",
    "save_tt",
    "load_tt",
]


def _truncation_rank(s: np.ndarray, delta: float, max_rank: int | None) -> int:
    """Smallest rank whose discarded singular values have norm <= delta."""
    if s.size == 0 or s[0] == 0.0:
        return 1
    tail = np.sqrt(np.cumsum((s * s)[::-1]))[::-1]  # tail[r] = ||s[r:]||
    r = int(np.count_nonzero(tail > delta))
    r = max(r, 1)
    if max_rank is not None:
        r = min(r, int(max_rank))
    return r


class TTVector:
    """Tensor in tensor-train format.

    Parameters
    ----------
    cores : sequence of ndarray
        Order-3 cores; ``cores[k].shape == (r_k, n_k, r_{k+1})``.
    """

    def __init__(self, cores: Sequence[np.ndarray]):
        cores = [np.asarray(c, dtype=float) for c in cores]
        if not cores:
            raise ValueError("a TT needs at least one core")
        for k, c in enumerate(cores):
            if c.ndim != 3:
                raise ValueError(f"core {k} has {c.ndim} axes, expected 3")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise ValueError("boundary TT ranks must be 1")
        for k in range(len(cores) - 1):
            if cores[k].shape[2] != cores[k + 1].shape[0]:
                raise ValueError(f"rank mismatch between cores {k} and {k + 1}")
        self.cores = cores

    @property
    def d(self) -> int:
        return len(self.cores)

    @property
    def dims(self) -> list[int]:
        return [c.shape[1] for c in self.cores]

    @property
    def ranks(self) -> list[int]:
        return [c.shape[0] for c in self.cores] + [1]

    @property
    def max_rank(self) -> int:
        return max(self.ranks)

    @property
    def n_elements(self) -> int:
        """Number of stored floating point values."""
        return int(sum(c.size for c in self.cores))

    def __repr__(self):
        return f"TTVector(dims={self.dims}, ranks={self.ranks})"

    def copy(self) -> "TTVector":
        return TTVector([c.copy() for c in self.cores])

    def full(self) -> np.ndarray:
        return tt_to_dense(self)

    def __getitem__(self, index):
        """Single entry via the chain of matrix slices."""
        if len(index) != self.d:
            raise IndexError(f"need {self.d} indices")
        v = self.cores[0][:, index[0], :]
        for k in range(1, self.d):
            v = v @ self.cores[k][:, index[k], :]
        return float(v[0, 0])

    def evaluate(self, indices) -> np.ndarray:
        """Entries at an ``(m, d)`` integer array of multi-indices."""
        indices = np.asarray(indices, dtype=np.intp)
        if indices.ndim != 2 or indices.shape[1] != self.d:
            raise ValueError("indices must have shape (m, d)")
        v = self.cores[0][0][indices[:, 0]]  # (m, r1)
        for k in range(1, self.d):
            v = np.einsum("ma,amb->mb", v, self.cores[k][:, indices[:, k], :])
        return v[:, 0]

    def norm(self) -> float:
        return tt_norm(self)

    def dot(self, other: "TTVector") -> float:
        return tt_dot(self, other)

    def round(self, tol: float = 1e-12, max_rank: int | None = None) -> "TTVector":
        return tt_round(self, tol, max_rank)

    def reversed(self) -> "TTVector":
        """TT of the tensor with its axes in reverse order."""
        return TTVector([c.transpose(2, 1, 0) for c in self.cores[::-1]])

    def __add__(self, other):
        return tt_add(self, other)

    def __sub__(self, other):
        return tt_add(self, tt_scale(other, -1.0))

    def __neg__(self):
        return tt_scale(self, -1.0)

    def __mul__(self, alpha):
        return tt_scale(self, alpha)

    __rmul__ = __mul__


class TTMatrix:
    """Linear operator in TT-matrix format.

    Parameters
    ----------
    cores : sequence of ndarray
        Order-4 cores; ``cores[k].shape == (r_k, m_k, n_k, r_{k+1})``.
    """

    def __init__(self, cores: Sequence[np.ndarray]):
        cores = [np.asarray(c, dtype=float) for c in cores]
        if not cores:
            raise ValueError("a TT-matrix needs at least one core")
        for k, c in enumerate(cores):
            if c.ndim != 4:
                raise ValueError(f"core {k} has {c.ndim} axes, expected 4")
        if cores[0].shape[0] != 1 or cores[-1].shape[3] != 1:
            raise ValueError("boundary TT ranks must be 1")
        for k in range(len(cores) - 1):
            if cores[k].shape[3] != cores[k + 1].shape[0]:
                raise ValueError(f"rank mismatch between cores {k} and {k + 1}")
        self.cores = cores

    @property
    def d(self) -> int:
        return len(self.cores)

    @property
    def row_dims(self) -> list[int]:
        return [c.shape[1] for c in self.cores]

    @property
    def col_dims(self) -> list[int]:
        return [c.shape[2] for c in self.cores]

    @property
    def ranks(self) -> list[int]:
        return [c.shape[0] for c in self.cores] + [1]

    @property
    def max_rank(self) -> int:
        return max(self.ranks)

    @property
    def n_elements(self) -> int:
        return int(sum(c.size for c in self.cores))

    @property
    def shape(self) -> tuple[int, int]:
        return int(np.prod(self.row_dims)), int(np.prod(self.col_dims))

    def __repr__(self):
        return (
            f"TTMatrix(row_dims={self.row_dims}, col_dims={self.col_dims}, "
            f"ranks={self.ranks})"
        )

    def copy(self) -> "TTMatrix":
        return TTMatrix([c.copy() for c in self.cores])

    def as_vector(self) -> TTVector:
        """View with each ``(i_k, j_k)`` pair fused into one mode."""
        return TTVector([c.reshape(c.shape[0], -1, c.shape[3]) for c in self.cores])

    @classmethod
    def from_vector(cls, tt: TTVector, row_dims, col_dims) -> "TTMatrix":
        return cls(
            [
                c.reshape(c.shape[0], m, n, c.shape[2])
                for c, m, n in zip(tt.cores, row_dims, col_dims)
            ]
        )

    def full(self) -> np.ndarray:
        """Dense matricization ``A[i_1...i_d, j_1...j_d]``."""
        m, n = self.shape
        check_dense_size((m, n), "TT-matrix")
        d = self.d
        res = self.cores[0][0]  # (m1, n1, r1)
        for k in range(1, d):
            res = np.tensordot(res, self.cores[k], axes=(-1, 0))
        res = res[..., 0]  # axes (i1, j1, i2, j2, ...)
        perm = list(range(0, 2 * d, 2)) + list(range(1, 2 * d, 2))
        return res.transpose(perm).reshape(m, n)

    def round(self, tol: float = 1e-12, max_rank: int | None = None) -> "TTMatrix":
        return tt_round(self, tol, max_rank)

    def reversed(self) -> "TTMatrix":
        return TTMatrix([c.transpose(3, 1, 2, 0) for c in self.cores[::-1]])

    def transpose(self) -> "TTMatrix":
        return TTMatrix([c.transpose(0, 2, 1, 3) for c in self.cores])

    @property
    def T(self) -> "TTMatrix":
        return self.transpose()

    def norm(self) -> float:
        return tt_norm(self.as_vector())

    def __add__(self, other):
        return tt_add(self, other)

    def __sub__(self, other):
        return tt_add(self, tt_scale(other, -1.0))

    def __neg__(self):
        return tt_scale(self, -1.0)

    def __mul__(self, alpha):
        return tt_scale(self, alpha)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, TTVector):
            return tt_matvec(self, other)
        if isinstance(other, TTMatrix):
            return tt_matmat(self, other)
        return NotImplemented


# -- construction -----------------------------------------------------------


def tt_svd(x, tol: float = 1e-12, max_rank: int | None = None) -> TTVector:
    """Decompose a dense tensor by sequential truncated SVDs.

    Each of the ``d - 1`` unfoldings is truncated with absolute threshold
    ``tol * ||x|| / sqrt(d - 1)``, which bounds the total relative Frobenius
    error by ``tol``.
    """
    x = as_dense(x)
    tol = check_tolerance(tol)
    dims = x.shape
    d = len(dims)
    nrm = np.linalg.norm(x)
    if nrm == 0.0:
        return tt_zeros(dims)
    delta = tol * nrm / np.sqrt(max(d - 1, 1))
    cores = []
    r_prev = 1
    C = x.reshape(dims[0], -1)
    for k in range(d - 1):
        C = C.reshape(r_prev * dims[k], -1)
        U, s, Vt = np.linalg.svd(C, full_matrices=False)
        r = _truncation_rank(s, delta, max_rank)
        cores.append(U[:, :r].reshape(r_prev, dims[k], r))
        C = s[:r, None] * Vt[:r]
        r_prev = r
    cores.append(C.reshape(r_prev, dims[-1], 1))
    return TTVector(cores)


def tt_to_dense(x: TTVector) -> np.ndarray:
    """Dense tensor represented by ``x``."""
    if isinstance(x, TTMatrix):
        return x.full()
    check_dense_size(x.dims, "TT tensor")
    res = x.cores[0][0]
    for c in x.cores[1:]:
        res = np.tensordot(res, c, axes=(-1, 0))
    return res[..., 0]


def tt_zeros(dims) -> TTVector:
    return TTVector([np.zeros((1, int(n), 1)) for n in dims])


def tt_ones(dims) -> TTVector:
    return TTVector([np.ones((1, int(n), 1)) for n in dims])


def tt_random(dims, ranks, rng=None) -> TTVector:
    """TT with standard normal cores; ``ranks`` lists the d - 1 inner ranks."""
    rng = np.random.default_rng(rng)
    dims = [int(n) for n in dims]
    if np.isscalar(ranks):
        ranks = [int(ranks)] * (len(dims) - 1)
    r = [1] + [int(v) for v in ranks] + [1]
    if len(r) != len(dims) + 1:
        raise ValueError("ranks must have d - 1 entries")
    return TTVector([rng.standard_normal((r[k], dims[k], r[k + 1])) for k in range(len(dims))])


# -- orthogonalization and rounding -----------------------------------------


def _left_orthogonalize(cores: list[np.ndarray]) -> list[np.ndarray]:
    """QR sweep left to right; all but the last core become left-orthonormal."""
    cores = [c.copy() for c in cores]
    for k in range(len(cores) - 1):
        r0, n, r1 = cores[k].shape
        Q, R = np.linalg.qr(cores[k].reshape(r0 * n, r1))
        cores[k] = Q.reshape(r0, n, Q.shape[1])
        cores[k + 1] = np.tensordot(R, cores[k + 1], axes=(1, 0))
    return cores


def _right_orthogonalize(cores: list[np.ndarray]) -> list[np.ndarray]:
    """QR sweep right to left; all but the first core become right-orthonormal."""
    cores = [c.copy() for c in cores]
    for k in range(len(cores) - 1, 0, -1):
        r0, n, r1 = cores[k].shape
        Q, R = np.linalg.qr(cores[k].reshape(r0, n * r1).T)
        cores[k] = Q.T.reshape(Q.shape[1], n, r1)
        cores[k - 1] = np.tensordot(cores[k - 1], R.T, axes=(2, 0))
    return cores


def tt_round(x, tol: float = 1e-12, max_rank: int | None = None):
    """Recompress a TT (or TT-matrix) to relative Frobenius accuracy ``tol``.

    Left-to-right QR orthogonalization followed by right-to-left truncated
    SVDs with per-bond threshold ``tol * ||x|| / sqrt(d - 1)``. ``max_rank``
    caps every bond (the accuracy bound then no longer holds).
    """
    if isinstance(x, TTMatrix):
        return TTMatrix.from_vector(tt_round(x.as_vector(), tol, max_rank), x.row_dims, x.col_dims)
    tol = check_tolerance(tol)
    d = x.d
    # upper bound of ||x||; a norm below roundoff of this scale is exact cancellation
    scale = float(np.prod([np.linalg.norm(c) for c in x.cores]))
    cores = _left_orthogonalize(x.cores)
    nrm = np.linalg.norm(cores[-1])
    if not np.isfinite(nrm):
        raise FloatingPointError("TT contains non-finite values")
    if nrm <= 8 * d * np.finfo(float).eps * scale:
        return tt_zeros(x.dims)
    if d == 1:
        return TTVector(cores)
    delta = tol * nrm / np.sqrt(d - 1)
    for k in range(d - 1, 0, -1):
        r0, n, r1 = cores[k].shape
        U, s, Vt = np.linalg.svd(cores[k].reshape(r0, n * r1), full_matrices=False)
        r = _truncation_rank(s, delta, max_rank)
        cores[k] = Vt[:r].reshape(r, n, r1)
        cores[k - 1] = np.tensordot(cores[k - 1], U[:, :r] * s[:r], axes=(2, 0))
    return TTVector(cores)


# -- linear algebra ---------------------------------------------------------


def _check_same_dims(x, y):
    if type(x) is not type(y):
        raise TypeError("cannot combine a TTVector with a TTMatrix")
    if isinstance(x, TTMatrix):
        ok = x.row_dims == y.row_dims and x.col_dims == y.col_dims
    else:
        ok = x.dims == y.dims
    if not ok:
        raise ValueError("dimension mismatch between TT operands")


def tt_add(x, y):
    """Sum of two TTs; ranks add (block-diagonal cores)."""
    _check_same_dims(x, y)
    if isinstance(x, TTMatrix):
        s = tt_add(x.as_vector(), y.as_vector())
        return TTMatrix.from_vector(s, x.row_dims, x.col_dims)
    d = x.d
    if d == 1:
        return TTVector([x.cores[0] + y.cores[0]])
    cores = []
    for k, (a, b) in enumerate(zip(x.cores, y.cores)):
        ra0, n, ra1 = a.shape
        rb0, _, rb1 = b.shape
        if k == 0:
            c = np.concatenate([a, b], axis=2)
        elif k == d - 1:
            c = np.concatenate([a, b], axis=0)
        else:
            c = np.zeros((ra0 + rb0, n, ra1 + rb1))
            c[:ra0, :, :ra1] = a
            c[ra0:, :, ra1:] = b
        cores.append(c)
    return TTVector(cores)


def tt_scale(x, alpha: float):
    cores = [c.copy() for c in x.cores]
    cores[0] = cores[0] * float(alpha)
    return type(x)(cores)


def tt_dot(x: TTVector, y: TTVector) -> float:
    """Inner product of two TT tensors with equal dims."""
    if isinstance(x, TTMatrix):
        x = x.as_vector()
    if isinstance(y, TTMatrix):
        y = y.as_vector()
    _check_same_dims(x, y)
    phi = np.ones((1, 1))
    for a, b in zip(x.cores, y.cores):
        tmp = np.tensordot(phi, a, axes=(0, 0))  # (rb, n, ra')
        phi = np.tensordot(tmp, b, axes=([0, 1], [0, 1]))  # (ra', rb')
    return float(phi[0, 0])


def tt_norm(x) -> float:
    """Frobenius norm, computed from an orthogonalized representation.

    This avoids the cancellation of ``sqrt(dot(x, x))`` when ``x`` is a small
    difference of large terms.
    """
    if isinstance(x, TTMatrix):
        x = x.as_vector()
    cores = _left_orthogonalize(x.cores)
    return float(np.linalg.norm(cores[-1]))


# -- operators ----------------------------------------------------------------


def kron_to_ttmatrix(factors) -> TTMatrix:
    """TT-matrix with unit inner ranks for ``A_1 (x) A_2 (x) ... (x) A_d``."""
    mats = [np.atleast_2d(np.asarray(f, dtype=float)) for f in factors]
    if not mats:
        raise ValueError("need at least one factor")
    return TTMatrix([m.reshape(1, m.shape[0], m.shape[1], 1) for m in mats])


def tt_identity(dims) -> TTMatrix:
    return kron_to_ttmatrix([np.eye(int(n)) for n in dims])


def diag_lift(k: TTVector) -> TTMatrix:
    """TT-matrix of ``diag(vec(k))`` with the ranks of ``k``.

    Each new core holds ``diag(G_k[a, :, b])`` in its ``(a, :, :, b)`` slice.
    """
    cores = []
    for G in k.cores:
        r0, n, r1 = G.shape
        new = np.zeros((r0, n, n, r1))
        idx = np.arange(n)
        new[:, idx, idx, :] = G
        cores.append(new)
    return TTMatrix(cores)


def tt_matvec(A: TTMatrix, x: TTVector) -> TTVector:
    """Apply a TT-matrix to a TT vector; ranks multiply, no rounding."""
    if A.col_dims != x.dims:
        raise ValueError(f"operator col dims {A.col_dims} do not match vector dims {x.dims}")
    cores = []
    for a, g in zip(A.cores, x.cores):
        ra0, m, n, ra1 = a.shape
        rx0, _, rx1 = g.shape
        c = np.einsum("aijb,cjd->acibd", a, g, optimize=True)
        cores.append(c.reshape(ra0 * rx0, m, ra1 * rx1))
    return TTVector(cores)


def tt_matmat(A: TTMatrix, B: TTMatrix) -> TTMatrix:
    """Product of two TT-matrices; ranks multiply, no rounding."""
    if A.col_dims != B.row_dims:
        raise ValueError(f"inner dims {A.col_dims} and {B.row_dims} differ")
    cores = []
    for a, b in zip(A.cores, B.cores):
        ra0, m, _, ra1 = a.shape
        rb0, _, p, rb1 = b.shape
        c = np.einsum("aijb,cjkd->acikbd", a, b, optimize=True)
        cores.append(c.reshape(ra0 * rb0, m, p, ra1 * rb1))
    return TTMatrix(cores)


# -- serialization ----------------------------------------------------------

_MAGIC = {TTVector: b"TTVEC\x00\x00\x00", TTMatrix: b"TTMAT\x00\x00\x00"}


def save_tt(obj, file) -> None:
    """Write a TTVector or TTMatrix in the binary cache format.

    Layout: 8-byte magic, then little-endian int64 ``d``, the mode sizes
    (``d`` values, or ``2d`` for a TT-matrix: rows then columns), the
    ``d + 1`` ranks, and finally every core as contiguous little-endian
    float64 in C order.
    """
    if type(obj) not in _MAGIC:
        raise TypeError("save_tt expects a TTVector or TTMatrix")
    if isinstance(obj, TTMatrix):
        dims = obj.row_dims + obj.col_dims
    else:
        dims = obj.dims
    header = [obj.d] + list(dims) + list(obj.ranks)
    buf = io.BytesIO()
    buf.write(_MAGIC[type(obj)])
    buf.write(struct.pack(f"<{len(header)}q", *header))
    for c in obj.cores:
        buf.write(np.ascontiguousarray(c, dtype="<f8").tobytes())
    if hasattr(file, "write"):
        file.write(buf.getvalue())
    else:
        with open(file, "wb") as fh:
            fh.write(buf.getvalue())


def load_tt(file):
    """Read an object written by :func:`save_tt`."""
    if hasattr(file, "read"):
        data = file.read()
    else:
        with open(file, "rb") as fh:
            data = fh.read()
    magic = data[:8]
    kinds = {v: k for k, v in _MAGIC.items()}
    if magic not in kinds:
        raise ValueError("not a TT cache file")
    kind = kinds[magic]
    pos = 8
    (d,) = struct.unpack_from("<q", data, pos)
    pos += 8
    ndims = 2 * d if kind is TTMatrix else d
    dims = struct.unpack_from(f"<{ndims}q", data, pos)
    pos += 8 * ndims
    ranks = struct.unpack_from(f"<{d + 1}q", data, pos)
    pos += 8 * (d + 1)
    cores = []
    for k in range(d):
        if kind is TTMatrix:
            shape = (ranks[k], dims[k], dims[d + k], ranks[k + 1])
        else:
            shape = (ranks[k], dims[k], ranks[k + 1])
        size = int(np.prod(shape))
        core = np.frombuffer(data, dtype="<f8", count=size, offset=pos).reshape(shape)
        cores.append(core.astype(float))
        pos += 8 * size
    if pos != len(data):
        raise ValueError("trailing bytes in TT cache file")
    return kind(cores)
