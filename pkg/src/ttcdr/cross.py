"""Maximum-volume row selection and TT-cross interpolation.

:func:`tt_cross` builds a TT approximation of a function sampled on a
tensor grid without ever forming the dense tensor. It alternates left and
right sweeps; at each core the fiber matrix is sampled on the current index
sets, its column space is found by a rank-revealing QR, and :func:`maxvol`
picks the rows that become the next index set. When the held-out error
stalls above the tolerance, every bond rank is increased by ``kickrank``
random indices.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from ._validation import check_positive_int, check_tolerance
from .tt import TTVector, tt_norm

__all__ = [
    "SingularPivotError",
    "CrossEvaluationError",
    "CrossConfig",
    "CrossInfo",
    "GridFunction",
    "maxvol",
    "cross_interpolate",
    "tt_cross",
]

logger = logging.getLogger(__name__)


class SingularPivotError(np.linalg.LinAlgError):
    """The matrix passed to maxvol does not have full column rank."""


class CrossEvaluationError(ValueError):
    """The sampled function returned a non-finite value."""

    def __init__(self, index, value):
        self.index = tuple(int(i) for i in index)
        self.value = value
        super().__init__(f"non-finite sample {value!r} at grid index {self.index}")


@dataclass(frozen=True)
class CrossConfig:
    """Settings of a TT-cross run.

    Attributes
    ----------
    tol : float
        Relative stopping tolerance for the held-out error and for the change
        between successive sweeps.
    max_sweeps : int
        Maximum number of half sweeps.
    initial_rank : int
        Starting bond rank (capped by the grid size).
    seed : int
        Seed of the random initial fibers and of the held-out sample.
    kickrank : int
        Rank increase applied when the held-out error stalls.
    delta : float
        Swap threshold of maxvol.
    n_check : int
        Size of the held-out random index sample.
    max_rank : int or None
        Upper bound on every bond rank.
    """

    tol: float = 1e-12
    max_sweeps: int = 40
    initial_rank: int = 2
    seed: int = 20230067
    kickrank: int = 1
    delta: float = 1e-2
    n_check: int = 1000
    max_rank: int | None = None

    def __post_init__(self):
        check_tolerance(self.tol, "tol", allow_zero=False)
        check_positive_int(self.max_sweeps, "max_sweeps")
        check_positive_int(self.initial_rank, "initial_rank")
        check_positive_int(self.kickrank, "kickrank", minimum=0)
        check_tolerance(self.delta, "delta")


@dataclass
class CrossInfo:
    converged: bool
    sweeps: int
    held_out_error: float
    n_evaluations: int
    history: list = field(default_factory=list)


@dataclass
class GridFunction:
    """A function of ``d`` coordinates restricted to a tensor grid.

    Parameters
    ----------
    evaluator : callable
        Vectorized ``f(c_1, ..., c_d) -> array`` taking one coordinate array
        per dimension.
    grids : sequence of array_like
        Node coordinates per dimension (possibly an interior subset).
    """

    evaluator: Callable
    grids: Sequence

    def __post_init__(self):
        self.grids = [np.asarray(getattr(g, "nodes", g), dtype=float) for g in self.grids]
        if not self.grids or any(g.ndim != 1 or g.size == 0 for g in self.grids):
            raise ValueError("grids must be nonempty 1D arrays")

    @property
    def dims(self) -> list[int]:
        return [g.size for g in self.grids]

    def __call__(self, indices: np.ndarray) -> np.ndarray:
        coords = [g[indices[:, k]] for k, g in enumerate(self.grids)]
        vals = np.asarray(self.evaluator(*coords), dtype=float)
        return np.broadcast_to(vals, (indices.shape[0],))


def maxvol(M, delta: float = 1e-2, max_iters: int | None = None) -> np.ndarray:
    """Row indices of a dominant ``r x r`` submatrix of a tall matrix.

    Starts from the pivots of an LU factorization with partial pivoting and
    swaps rows until every entry of ``M @ inv(M[I])`` has modulus at most
    ``1 + delta``.

    Parameters
    ----------
    M : ndarray, shape (m, r), m >= r
    delta : float
        Swap threshold.

    Returns
    -------
    ndarray of int, shape (r,)

    Raises
    ------
    SingularPivotError
        If ``M`` is rank deficient.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] < M.shape[1]:
        raise ValueError(f"maxvol needs a tall matrix, got shape {M.shape}")
    m, r = M.shape
    if r == 0:
        return np.zeros(0, dtype=np.intp)
    P, L, U = scipy.linalg.lu(M)
    piv = np.abs(np.diag(U))
    scale = np.abs(M).max()
    if scale == 0.0 or piv.min() <= 1e2 * np.finfo(float).eps * scale * max(m, r):
        raise SingularPivotError("maxvol: matrix is rank deficient")
    rows = np.argmax(P, axis=0)[:r]  # P @ L @ U == M, so row k of L@U is row rows[k] of M
    try:
        B = scipy.linalg.solve(M[rows].T, M.T).T
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularPivotError(str(exc)) from exc
    max_iters = max_iters if max_iters is not None else 100 * r + 100
    for _ in range(max_iters):
        i, j = np.unravel_index(np.argmax(np.abs(B)), B.shape)
        if abs(B[i, j]) <= 1.0 + delta:
            break
        # swap row rows[j] out for row i; rank-1 update of B = M inv(M[rows])
        bj = B[:, j].copy()
        bi = B[i, :].copy()
        bi[j] -= 1.0
        B -= np.outer(bj, bi / B[i, j])
        rows[j] = i
    else:
        raise RuntimeError("maxvol did not converge")
    if np.abs(B).max() > (1.0 + delta) * (1.0 + 1e-8):
        raise RuntimeError("maxvol postcondition violated")
    return rows.astype(np.intp)


def _rank_revealing_basis(C: np.ndarray, rel_cut: float) -> np.ndarray:
    """Orthonormal basis of the numerical column space of ``C`` (>= 1 column)."""
    Q, R, _ = scipy.linalg.qr(C, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return Q[:, :1]
    rank = max(1, int(np.count_nonzero(diag > rel_cut * diag[0])))
    return Q[:, :rank]


def _fibers(fun, left, right, k, dims):
    """Sample ``fun`` on all fibers ``(left[a], i_k, right[b])``.

    Returns an array of shape ``(len(left), n_k, len(right))``.
    """
    ra, rb, n = left.shape[0], right.shape[0], dims[k]
    A = np.repeat(left, n * rb, axis=0)
    I = np.tile(np.repeat(np.arange(n), rb), ra)[:, None]
    B = np.tile(right, (ra * n, 1))
    idx = np.hstack([A, I, B]).astype(np.intp)
    vals = np.asarray(fun(idx), dtype=float)
    bad = ~np.isfinite(vals)
    if bad.any():
        pos = int(np.flatnonzero(bad)[0])
        raise CrossEvaluationError(idx[pos], vals[pos])
    return vals.reshape(ra, n, rb)


def _random_indices(rng, dims, count):
    return np.column_stack([rng.integers(0, n, size=count) for n in dims]).astype(np.intp)


def _pad_random(rng, sets, dims, target):
    """Extend an index set with distinct random multi-indices up to ``target``."""
    have = {tuple(row) for row in sets}
    capacity = int(np.prod(dims)) if dims else 1
    target = min(target, capacity)
    rows = list(sets)
    attempts = 0
    while len(rows) < target and attempts < 50 * target + 50:
        cand = tuple(int(rng.integers(0, n)) for n in dims)
        attempts += 1
        if cand not in have:
            have.add(cand)
            rows.append(np.array(cand, dtype=np.intp))
    return np.array(rows, dtype=np.intp).reshape(len(rows), len(dims))


def cross_interpolate(fun, dims, cfg: CrossConfig | None = None):
    """TT-cross of an index function; returns ``(TTVector, CrossInfo)``.

    Parameters
    ----------
    fun : callable
        Maps an ``(m, d)`` integer array of multi-indices to ``m`` values.
    dims : sequence of int
        Mode sizes.
    cfg : CrossConfig
    """
    cfg = cfg or CrossConfig()
    dims = [int(n) for n in dims]
    d = len(dims)
    rng = np.random.default_rng(cfg.seed)
    check = _random_indices(rng, dims, cfg.n_check)
    check_vals = np.asarray(fun(check), dtype=float)
    if not np.all(np.isfinite(check_vals)):
        pos = int(np.flatnonzero(~np.isfinite(check_vals))[0])
        raise CrossEvaluationError(check[pos], check_vals[pos])
    check_norm = np.linalg.norm(check_vals)
    n_evals = check.shape[0]

    if d == 1:
        vals = _fibers(fun, np.zeros((1, 0), np.intp), np.zeros((1, 0), np.intp), 0, dims)
        return TTVector([vals]), CrossInfo(True, 1, 0.0, n_evals + dims[0])

    rel_cut = min(cfg.tol * 1e-2, 1e-12)
    cap = cfg.max_rank
    # right[k]: multi-indices of modes k+1..d-1 (bond k); left[k]: modes 0..k (bond k)
    right: list[np.ndarray] = [None] * (d - 1)
    left: list[np.ndarray] = [None] * (d - 1)
    for k in range(d - 1):
        size = min(int(np.prod(dims[k + 1 :])), int(np.prod(dims[: k + 1])))
        r = min(cfg.initial_rank, size)
        if cap:
            r = min(r, cap)
        right[k] = _pad_random(rng, np.zeros((0, d - k - 1), np.intp), dims[k + 1 :], r)

    def empty():
        return np.zeros((1, 0), np.intp)

    best = None
    prev = None
    history = []
    converged = False
    prev_err = None
    sweep = 0
    for sweep in range(1, cfg.max_sweeps + 1):
        forward = sweep % 2 == 1
        cores: list[np.ndarray] = [None] * d
        if forward:
            for k in range(d - 1):
                L = empty() if k == 0 else left[k - 1]
                C = _fibers(fun, L, right[k], k, dims)
                n_evals += C.size
                Cm = C.reshape(-1, C.shape[2])
                Q = _rank_revealing_basis(Cm, rel_cut)
                if cap:
                    Q = Q[:, :cap]
                rows = maxvol(Q, cfg.delta)
                cores[k] = (Q @ np.linalg.inv(Q[rows])).reshape(C.shape[0], dims[k], -1)
                a, i = np.divmod(rows, dims[k])
                left[k] = np.column_stack([L[a], i]).astype(np.intp)
            C = _fibers(fun, left[d - 2], empty(), d - 1, dims)
            n_evals += C.size
            cores[d - 1] = C
        else:
            for k in range(d - 1, 0, -1):
                R_ = empty() if k == d - 1 else right[k]
                C = _fibers(fun, left[k - 1], R_, k, dims)
                n_evals += C.size
                Cm = C.reshape(C.shape[0], -1).T
                Q = _rank_revealing_basis(Cm, rel_cut)
                if cap:
                    Q = Q[:, :cap]
                cols = maxvol(Q, cfg.delta)
                core = (Q @ np.linalg.inv(Q[cols])).T  # (r_new, n_k * r_right)
                cores[k] = core.reshape(-1, dims[k], C.shape[2])
                i, b = np.divmod(cols, C.shape[2])
                right[k - 1] = np.column_stack([i, R_[b]]).astype(np.intp)
            C = _fibers(fun, empty(), right[0], 0, dims)
            n_evals += C.size
            cores[0] = C
        tt = TTVector(cores)
        approx = tt.evaluate(check)
        err = np.linalg.norm(approx - check_vals)
        err = err / check_norm if check_norm > 0 else err
        if prev is not None and prev.dims == tt.dims:
            diff = tt_norm(tt - prev)
            base = tt_norm(tt)
            change = diff / base if base > 0 else diff
        else:
            change = np.inf
        history.append((sweep, err, change, tt.ranks))
        logger.debug("cross sweep %d: held-out %.3e change %.3e ranks %s", sweep, err, change, tt.ranks)
        if best is None or err < best[1]:
            best = (tt, err)
        if err <= cfg.tol and change <= cfg.tol:
            converged = True
            break
        stalled = prev_err is not None and err > 0.5 * prev_err
        if err > cfg.tol and stalled and cfg.kickrank > 0:
            # held-out error stopped improving: add random indices on every bond
            for k in range(d - 1):
                sets, modes = (left, dims[: k + 1]) if forward else (right, dims[k + 1 :])
                target = sets[k].shape[0] + cfg.kickrank
                if cap:
                    target = min(target, cap)
                sets[k] = _pad_random(rng, sets[k], modes, target)
        prev_err = err
        prev = tt
    tt_best, err_best = best
    if converged:
        tt_best, err_best = tt, err
    return tt_best, CrossInfo(converged, sweep, float(err_best), n_evals, history)


def tt_cross(f: GridFunction, cfg: CrossConfig | None = None) -> TTVector:
    """TT approximation of a grid function by cross interpolation.

    Emits a ``RuntimeWarning`` and returns the best iterate when the run
    does not converge within ``cfg.max_sweeps``; use
    :func:`cross_interpolate` to get the convergence record.
    """
    if not isinstance(f, GridFunction):
        raise TypeError("tt_cross expects a GridFunction")
    tt, info = cross_interpolate(f, f.dims, cfg)
    tt.converged = info.converged
    tt.cross_info = info
    if not info.converged:
        warnings.warn(
            f"tt_cross did not converge in {info.sweeps} sweeps "
            f"(held-out error {info.held_out_error:.2e})",
            RuntimeWarning,
            stacklevel=2,
        )
    return tt
