"""Alternating linear solver for ``A x = b`` with ``A``, ``x``, ``b`` in TT format.

The solver sweeps over the cores of ``x``. With all other cores fixed and
orthonormal, the core being updated solves a small Galerkin-projected
system; its unfolding is then truncated by SVD and enriched with a
projection of the current residual (AMEn-style basis enrichment), which is
what lets the ranks grow to those of the solution. Sweep directions
alternate; a right-to-left sweep is run as a left-to-right sweep on the
axis-reversed system.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from ._validation import check_positive_int, check_tolerance
from .tt import TTMatrix, TTVector, _right_orthogonalize, _truncation_rank, tt_matvec, tt_norm, tt_random, tt_round, tt_zeros

__all__ = ["SolveOptions", "SolveReport", "amen_solve", "tt_residual_norm"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveOptions:
    """Settings of :func:`amen_solve`.

    ``local_solver`` is ``"direct"``, ``"iterative"`` or ``"auto"``; with
    ``"auto"`` local systems up to ``local_direct_max`` unknowns are solved
    by dense LU and larger ones by restarted GMRES with diagonal scaling.
    ``trunc_tol`` is the relative SVD truncation applied to each updated
    core; by default it is ``tol / 100``.
    """

    tol: float = 1e-10
    max_sweeps: int = 30
    local_solver: str = "auto"
    local_direct_max: int = 2000
    local_maxit: int = 500
    local_tol: float | None = None
    kickrank: int = 4
    max_rank: int | None = None
    trunc_tol: float | None = None
    seed: int = 20230067

    def __post_init__(self):
        check_tolerance(self.tol, "tol", allow_zero=False)
        check_positive_int(self.max_sweeps, "max_sweeps")
        check_positive_int(self.kickrank, "kickrank", minimum=0)
        if self.local_solver not in ("auto", "direct", "iterative"):
            raise ValueError(f"unknown local_solver {self.local_solver!r}")

    @property
    def truncation(self) -> float:
        return self.trunc_tol if self.trunc_tol is not None else self.tol * 1e-2

    @property
    def local_rtol(self) -> float:
        return self.local_tol if self.local_tol is not None else self.tol * 1e-2


@dataclass
class SolveReport:
    converged: bool = False
    sweeps: int = 0
    residual_history: list = field(default_factory=list)
    final_ranks: list = field(default_factory=list)
    failure: str | None = None
    options: SolveOptions | None = None

    @property
    def residual(self) -> float:
        """Relative residual of the returned (best) iterate."""
        return min(self.residual_history) if self.residual_history else np.inf


class LocalSolveError(np.linalg.LinAlgError):
    """A projected local system could not be solved."""


# -- interface contractions --------------------------------------------------
# Operator interfaces have axes (test rank, operator rank, trial rank).


def _left_op(phi, X, A, Y):
    return np.einsum("apc,aiq,pijs,cjr->qsr", phi, X, A, Y, optimize=True)


def _left_vec(phi, X, B):
    return np.einsum("ag,aiq,git->qt", phi, X, B, optimize=True)


def _right_op(phi, X, A, Y):
    return np.einsum("aiq,pijs,cjr,qsr->apc", X, A, Y, phi, optimize=True)


def _right_vec(phi, X, B):
    return np.einsum("aiq,git,qt->ag", X, B, phi, optimize=True)


def _local_matvec(PL, Ak, PR, v):
    t = np.einsum("apc,cjr->apjr", PL, v, optimize=True)
    t = np.einsum("apjr,pijs->aisr", t, Ak, optimize=True)
    return np.einsum("aisr,qsr->aiq", t, PR, optimize=True)


def _solve_local(PL, Ak, PR, rhs, x0, opts: SolveOptions):
    shape = rhs.shape
    size = rhs.size
    direct = opts.local_solver == "direct" or (
        opts.local_solver == "auto" and size <= opts.local_direct_max
    )
    if direct:
        M = np.einsum("apc,pijs,qsr->aiqcjr", PL, Ak, PR, optimize=True).reshape(size, size)
        try:
            with warnings.catch_warnings():
                # exact singularity is detected below and reported as LocalSolveError
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu = scipy.linalg.lu_factor(M, check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise LocalSolveError(str(exc)) from exc
        if np.any(np.diag(lu[0]) == 0.0):
            raise LocalSolveError("singular local system")
        return scipy.linalg.lu_solve(lu, rhs.ravel()).reshape(shape)

    diag = np.einsum("apa,piis,qsq->aiq", PL, Ak, PR, optimize=True).ravel()
    if np.any(diag == 0.0):
        diag = np.where(diag == 0.0, 1.0, diag)
    op = spla.LinearOperator(
        (size, size), matvec=lambda v: _local_matvec(PL, Ak, PR, v.reshape(shape)).ravel(), dtype=float
    )
    prec = spla.LinearOperator((size, size), matvec=lambda v: v / diag, dtype=float)
    sol, info = spla.gmres(
        op, rhs.ravel(), x0=x0.ravel(), rtol=opts.local_rtol, atol=0.0,
        restart=min(size, 60), maxiter=opts.local_maxit, M=prec,
    )
    if info < 0 or not np.all(np.isfinite(sol)):
        raise LocalSolveError(f"GMRES breakdown (info={info})")
    return sol.reshape(shape)


def _sweep(A: TTMatrix, b: TTVector, x: TTVector, z: TTVector | None, opts: SolveOptions):
    """One left-to-right sweep; returns the updated cores of x."""
    d = A.d
    X = _right_orthogonalize(x.cores)
    Ac, Bc = A.cores, b.cores
    Z = _right_orthogonalize(z.cores) if z is not None else None

    PhiRA = [None] * (d + 1)
    PhiRb = [None] * (d + 1)
    PsiRA = [None] * (d + 1)
    PsiRb = [None] * (d + 1)
    PhiRA[d] = np.ones((1, 1, 1))
    PhiRb[d] = np.ones((1, 1))
    PsiRA[d] = np.ones((1, 1, 1))
    PsiRb[d] = np.ones((1, 1))
    for k in range(d - 1, 0, -1):
        PhiRA[k] = _right_op(PhiRA[k + 1], X[k], Ac[k], X[k])
        PhiRb[k] = _right_vec(PhiRb[k + 1], X[k], Bc[k])
        if Z is not None:
            PsiRA[k] = _right_op(PsiRA[k + 1], Z[k], Ac[k], X[k])
            PsiRb[k] = _right_vec(PsiRb[k + 1], Z[k], Bc[k])

    PhiLA = np.ones((1, 1, 1))
    PhiLb = np.ones((1, 1))
    trunc = opts.truncation / np.sqrt(max(d - 1, 1))
    for k in range(d):
        rhs = np.einsum("ag,git,qt->aiq", PhiLb, Bc[k], PhiRb[k + 1], optimize=True)
        y = _solve_local(PhiLA, Ac[k], PhiRA[k + 1], rhs, X[k], opts)
        if k == d - 1:
            X[k] = y
            break
        r0, n, r1 = y.shape
        U, s, Vt = np.linalg.svd(y.reshape(r0 * n, r1), full_matrices=False)
        rank = _truncation_rank(s, trunc * np.linalg.norm(s), opts.max_rank)
        U = U[:, :rank]
        V = s[:rank, None] * Vt[:rank]
        if Z is not None:
            E = np.einsum("ag,git,wt->aiw", PhiLb, Bc[k], PsiRb[k + 1], optimize=True)
            Ay = np.einsum("apc,pijs,cjr->aisr", PhiLA, Ac[k], y, optimize=True)
            E -= np.einsum("aisr,wsr->aiw", Ay, PsiRA[k + 1], optimize=True)
            E = E.reshape(r0 * n, -1)
            E -= U @ (U.T @ E)
            Q, R = np.linalg.qr(np.hstack([U, E]))
            carry = R[:, :rank] @ V
        else:
            Q, carry = U, V
        X[k] = Q.reshape(r0, n, Q.shape[1])
        X[k + 1] = np.tensordot(carry, X[k + 1], axes=(1, 0))
        PhiLA = _left_op(PhiLA, X[k], Ac[k], X[k])
        PhiLb = _left_vec(PhiLb, X[k], Bc[k])
    return X


def tt_residual_norm(A: TTMatrix, x: TTVector, b: TTVector) -> float:
    """``||A x - b||`` computed in TT format without cancellation."""
    return tt_norm(tt_matvec(A, x) - b)


def amen_solve(A: TTMatrix, b: TTVector, opts: SolveOptions | None = None, x0: TTVector | None = None):
    """Solve ``A x = b`` in TT format.

    Parameters
    ----------
    A : TTMatrix
        Square operator (row dims equal column dims).
    b : TTVector
    opts : SolveOptions, optional
    x0 : TTVector, optional
        Initial guess; by default a seeded random TT of rank ``kickrank``.

    Returns
    -------
    x : TTVector
        The iterate with the smallest relative residual.
    report : SolveReport
        ``residual_history`` holds the relative residual after every sweep.
    """
    opts = opts or SolveOptions()
    if A.row_dims != A.col_dims:
        raise ValueError("amen_solve needs a square operator")
    if A.col_dims != b.dims:
        raise ValueError(f"operator dims {A.col_dims} do not match rhs dims {b.dims}")
    report = SolveReport(options=opts)
    nb = tt_norm(b)
    if nb == 0.0:
        x = tt_zeros(b.dims)
        report.converged = True
        report.residual_history.append(0.0)
        report.final_ranks = x.ranks
        return x, report

    if x0 is None:
        x = tt_random(b.dims, max(opts.kickrank, 1), rng=opts.seed)
    else:
        if x0.dims != b.dims:
            raise ValueError("initial guess has wrong dims")
        x = x0.copy()

    def residual_of(x):
        r = tt_matvec(A, x) - b
        return r, tt_norm(r) / nb

    r, res = residual_of(x)
    best = (x, res)
    A_rev, b_rev = A.reversed(), b.reversed()
    for sweep in range(1, opts.max_sweeps + 1):
        z = tt_round(r, 0.0, max_rank=opts.kickrank) if opts.kickrank > 0 else None
        forward = sweep % 2 == 1
        try:
            if forward:
                x = TTVector(_sweep(A, b, x, z, opts))
            else:
                zr = z.reversed() if z is not None else None
                x = TTVector(_sweep(A_rev, b_rev, x.reversed(), zr, opts)).reversed()
        except LocalSolveError as exc:
            report.failure = f"local solve failed in sweep {sweep}: {exc}"
            logger.warning(report.failure)
            break
        r, res = residual_of(x)
        report.residual_history.append(res)
        report.sweeps = sweep
        logger.debug("sweep %d: residual %.3e ranks %s", sweep, res, x.ranks)
        if res < best[1]:
            best = (x, res)
        if res <= opts.tol:
            report.converged = True
            break
    x = best[0]
    report.final_ranks = x.ranks
    return x, report
