"""Full-grid oracle: dense, sparse and matrix-free solves, error norms.

Everything here works on plain arrays and shares only the operator
description (:func:`ttcdr.assembly.operator_terms`) with the TT path, so it
serves as an independent check of the TT assembly and solver.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._validation import MemoryGuardError, check_dense_size, check_tolerance
from .assembly import (
    SpaceTimeGrid,
    coefficient_function,
    operator_terms,
    restrict_factors,
)
from .cross import CrossConfig, GridFunction, tt_cross
from .problems import CdrProblem
from .solve import SolveOptions, amen_solve
from .tt import TTMatrix, TTVector, diag_lift, kron_to_ttmatrix, tt_matmat, tt_round, tt_svd

__all__ = [
    "ErrorReport",
    "KroneckerOperator",
    "KroneckerSumPreconditioner",
    "grid_mesh",
    "sample",
    "exact_interior",
    "boundary_array",
    "dense_reduced_system",
    "full_grid_solve",
    "backward_euler_march",
    "relative_l2_error",
    "compression_ratio",
    "storage_kb",
]

logger = logging.getLogger(__name__)

# Degree limits of the two full-grid paths.
DENSE_MAX_N = 8
ITERATIVE_MAX_N = 24


@dataclass
class ErrorReport:
    rel_l2: float
    N: int
    method: str
    elapsed_seconds: float = float("nan")
    compression_ratio: float = float("nan")
    max_rank: int = 0


def grid_mesh(nodes):
    return np.meshgrid(*nodes, indexing="ij")


def sample(fn, nodes) -> np.ndarray:
    """Evaluate ``fn`` on the tensor grid spanned by ``nodes``."""
    mesh = grid_mesh(nodes)
    return np.broadcast_to(np.asarray(fn(*mesh), dtype=float), mesh[0].shape).copy()


def exact_interior(problem: CdrProblem, grid: SpaceTimeGrid) -> np.ndarray:
    if problem.exact is None:
        raise ValueError("problem has no exact solution")
    return sample(problem.exact, grid.interior_nodes)


def _apply_axes(arr: np.ndarray, mats) -> np.ndarray:
    """Apply ``mats[k]`` along axis ``k`` of ``arr``."""
    for k, M in enumerate(mats):
        arr = np.moveaxis(np.tensordot(M, arr, axes=(1, k)), 0, k)
    return arr


class KroneckerOperator:
    """Matrix-free interior operator ``sum_j scale_j diag(c_j) kron(M_j)``.

    Parameters
    ----------
    problem : CdrProblem
    grid : SpaceTimeGrid
    """

    def __init__(self, problem: CdrProblem, grid: SpaceTimeGrid):
        self.problem = problem
        self.grid = grid
        self.terms = operator_terms(problem, grid)
        self.shape = (grid.n_interior, grid.n_interior)
        self._coef = {}
        for term in self.terms:
            key = term.coefficient
            if key is not None and key not in self._coef:
                self._coef[key] = sample(coefficient_function(problem, key), grid.interior_nodes)
        self._sub = [restrict_factors(t, grid, "interior") for t in self.terms]
        self._map = [restrict_factors(t, grid, "all") for t in self.terms]

    def _weight(self, term) -> np.ndarray | float:
        w = term.scale
        return w if term.coefficient is None else w * self._coef[term.coefficient]

    def matvec(self, u) -> np.ndarray:
        """``A u`` for interior values ``u`` (flat or shaped)."""
        shape = self.grid.interior_dims
        u = np.asarray(u, dtype=float).reshape(shape)
        out = np.zeros(shape)
        for term, mats in zip(self.terms, self._sub):
            out += self._weight(term) * _apply_axes(u, mats)
        return out

    def apply_map(self, G) -> np.ndarray:
        """Interior rows of the full operator applied to full-grid ``G``."""
        G = np.asarray(G, dtype=float).reshape(self.grid.full_dims)
        out = np.zeros(self.grid.interior_dims)
        for term, mats in zip(self.terms, self._map):
            out += self._weight(term) * _apply_axes(G, mats)
        return out

    def diagonal(self) -> np.ndarray:
        out = np.zeros(self.grid.interior_dims)
        for term, mats in zip(self.terms, self._sub):
            diag = np.ones(1)
            for M in mats:
                diag = np.multiply.outer(diag, np.diag(M))
            out += self._weight(term) * diag.reshape(out.shape)
        return out.ravel()

    def dense(self) -> np.ndarray:
        check_dense_size(self.shape, "dense reduced operator")
        A = np.zeros(self.shape)
        for term, mats in zip(self.terms, self._sub):
            K = mats[0]
            for M in mats[1:]:
                K = np.kron(K, M)
            w = self._weight(term)
            A += (np.ravel(w)[:, None] if np.ndim(w) else w) * K
        return A

    def sparse(self) -> sp.csr_matrix:
        """Sparse matrix; the identity factors keep it sparse."""
        A = None
        for term, mats in zip(self.terms, self._sub):
            K = sp.csr_matrix(mats[0])
            for M in mats[1:]:
                K = sp.kron(K, sp.csr_matrix(M), format="csr")
            w = self._weight(term)
            K = (sp.diags(np.ravel(w)) @ K) if np.ndim(w) else w * K
            A = K if A is None else A + K
        return A.tocsc()

    def as_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator(self.shape, matvec=lambda v: self.matvec(v).ravel(), dtype=float)


def boundary_array(problem: CdrProblem, grid: SpaceTimeGrid) -> np.ndarray:
    """Full-grid tensor with ``g`` on the spatial boundary, ``h`` at ``t=0``."""
    G = sample(problem.g, grid.axis_nodes)
    inner = tuple(slice(1, n - 1) for n in grid.full_dims[1:])
    G[(slice(1, None),) + inner] = 0.0
    G[(0,) + inner] = sample(problem.h, [g.nodes[1:-1] for g in grid.space])
    return G


def dense_reduced_system(problem: CdrProblem, grid: SpaceTimeGrid, operator: KroneckerOperator | None = None):
    """Dense ``A`` and ``F - F_bd`` of the interior system."""
    op = operator or KroneckerOperator(problem, grid)
    rhs = sample(problem.f, grid.interior_nodes) - op.apply_map(boundary_array(problem, grid))
    return op.dense(), rhs.ravel()


def _reduced_rhs(problem, grid, op):
    return (sample(problem.f, grid.interior_nodes) - op.apply_map(boundary_array(problem, grid))).ravel()


class KroneckerSumPreconditioner:
    """Exact inverse of a mean-coefficient Kronecker-sum operator.

    The coefficients are replaced by their means over the interior grid, so
    the spatial part becomes ``sum_a L_a`` with 1D matrices ``L_a``. Those are
    diagonalized (their eigenvector bases are well conditioned), which
    decouples the system into one small dense time system per spatial
    eigenvalue. For constant coefficients this is the exact inverse.
    """

    def __init__(self, op: KroneckerOperator):
        grid = op.grid
        self.grid = grid
        means = {k: float(np.mean(v)) for k, v in op._coef.items()}
        d_s = grid.space_dim
        interior = [grid.interior_index(k) for k in range(grid.d)]
        self.Dt = grid.time_matrix[np.ix_(interior[0], interior[0])]
        L = [np.zeros((n, n)) for n in grid.interior_dims[1:]]
        for term in op.terms:
            if term.part == "time":
                continue
            w = term.scale * (1.0 if term.coefficient is None else means[term.coefficient])
            if term.part == "reaction":
                for a in range(d_s):
                    L[a] += (w / d_s) * np.eye(L[a].shape[0])
                continue
            a = next(k for k in range(1, grid.d) if not _is_identity(term.factors[k]))
            L[a - 1] += w * term.factors[a][np.ix_(interior[a], interior[a])]
        self.V, self.Vinv, lam = [], [], 0.0
        for La in L:
            w, V = np.linalg.eig(La)
            self.V.append(V)
            self.Vinv.append(np.linalg.inv(V))
            lam = np.add.outer(lam, w) if np.ndim(lam) else w + lam
        self.lam = np.ravel(lam)
        nt = self.Dt.shape[0]
        shifted = self.Dt[None, :, :] + self.lam[:, None, None] * np.eye(nt)[None]
        self._inv = np.linalg.inv(shifted)  # (n_space, nt, nt)
        self.shape = op.shape

    def solve(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float).reshape(self.grid.interior_dims)
        rh = _apply_axes(r.astype(complex), [np.eye(r.shape[0])] + self.Vinv)
        rh = rh.reshape(r.shape[0], -1)  # (nt, n_space)
        uh = np.einsum("jts,sj->tj", self._inv, rh)
        u = _apply_axes(uh.reshape(r.shape), [np.eye(r.shape[0])] + self.V)
        return u.real.ravel()

    def as_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator(self.shape, matvec=self.solve, dtype=float)


def _is_identity(M) -> bool:
    return M.shape[0] == M.shape[1] and np.array_equal(M, np.eye(M.shape[0]))


def _iterative_solve(op: KroneckerOperator, rhs: np.ndarray, tol: float, maxiter: int) -> np.ndarray:
    A = op.as_linear_operator()
    M = KroneckerSumPreconditioner(op).as_linear_operator()
    nb = np.linalg.norm(rhs)
    x, info = spla.gmres(A, rhs, x0=M.matvec(rhs), rtol=tol, atol=0.0, restart=60, maxiter=maxiter, M=M)
    res = np.linalg.norm(op.matvec(x).ravel() - rhs)
    if res > 10 * tol * nb:
        raise RuntimeError(f"iterative full-grid solve did not converge (relative residual {res / nb:.2e}, info={info})")
    return x


def full_grid_solve(problem: CdrProblem, grid: SpaceTimeGrid, time_scheme: str | None = None,
                    method: str = "auto", tol: float = 1e-12, maxiter: int = 200) -> np.ndarray:
    """Solve the reduced full-grid system; returns interior values.

    ``method`` is ``"dense"`` (LU on the dense matrix, ``N <= 8``),
    ``"sparse"`` (sparse LU of the Kronecker-structured matrix),
    ``"iterative"`` (matrix-free restarted GMRES preconditioned by
    :class:`KroneckerSumPreconditioner`, ``N <= 24``) or ``"auto"`` (dense up
    to ``N = 8``, iterative above). Backward-Euler grids
    are solved by time marching.
    """
    if time_scheme is not None and time_scheme != grid.time_scheme:
        raise ValueError(f"grid uses {grid.time_scheme!r}, not {time_scheme!r}")
    if grid.N > ITERATIVE_MAX_N:
        raise MemoryGuardError(f"full-grid solves are limited to N <= {ITERATIVE_MAX_N}")
    if grid.time_scheme == "backward_euler":
        return backward_euler_march(problem, grid)
    check_tolerance(tol, "tol", allow_zero=False)
    if method == "auto":
        method = "dense" if grid.N <= DENSE_MAX_N else "iterative"
    if method == "dense" and grid.N > DENSE_MAX_N:
        raise MemoryGuardError(f"dense full-grid solves are limited to N <= {DENSE_MAX_N}")
    op = KroneckerOperator(problem, grid)
    rhs = _reduced_rhs(problem, grid, op)
    if method == "dense":
        u = np.linalg.solve(op.dense(), rhs)
    elif method == "sparse":
        u = spla.spsolve(op.sparse(), rhs)
    elif method == "iterative":
        u = _iterative_solve(op, rhs, tol, maxiter)
    else:
        raise ValueError(f"unknown method {method!r}")
    return u.reshape(grid.interior_dims)


# -- backward Euler -------------------------------------------------------------


def _spatial_terms(problem, grid):
    out = []
    for term in operator_terms(problem, grid):
        if term.part == "time":
            continue
        out.append((term, term.factors[1:]))
    return out


def _frozen(fn, t):
    return lambda *x: fn(np.full(np.shape(x[0]), t), *x)


def backward_euler_march(problem: CdrProblem, grid: SpaceTimeGrid, dt: float | None = None,
                         tt: bool = False, tol: float = 1e-12, solver: SolveOptions | None = None,
                         cross: CrossConfig | None = None):
    """Sequential backward-Euler solve.

    Each step solves ``(I/dt + S(t_k)) U_k = U_{k-1}/dt + F_k - B_k`` on
    the spatially interior nodes, where ``B_k`` carries the boundary values
    at ``t_k``. The dense path uses a sparse LU per step; the TT path
    (``tt=True``) uses :func:`ttcdr.solve.amen_solve` and rounds every
    iterate at ``tol``.

    Returns
    -------
    ndarray or list of TTVector
        Dense interior solution with axes ``(t_1..t_n, x, y, z)``, or the
        per-step TT iterates.
    """
    if grid.time_scheme != "backward_euler":
        raise ValueError("backward_euler_march needs a backward-Euler grid")
    n = grid.n_time
    step = grid.T / n
    if dt is not None and not np.isclose(dt, step):
        raise ValueError(f"dt={dt} does not match the grid step {step}")
    space_nodes = [g.nodes for g in grid.space]
    inner = [g.nodes[1:-1] for g in grid.space]
    inner_idx = tuple(slice(1, g.size - 1) for g in grid.space)
    sdims = [g.size - 2 for g in grid.space]
    terms = _spatial_terms(problem, grid)
    prev = sample(problem.h, inner)
    out = []
    prev_tt = None
    for k in range(1, n + 1):
        t = float(grid.t_nodes[k])
        Gk = sample(_frozen(problem.g, t), space_nodes)
        Gk[inner_idx] = 0.0
        Fk = sample(_frozen(problem.f, t), inner)
        try:
            if not tt:
                A = sp.identity(int(np.prod(sdims)), format="csc") / step
                bd = np.zeros(sdims)
                for term, factors in terms:
                    w = term.scale
                    if term.coefficient is not None:
                        w = w * sample(_frozen(coefficient_function(problem, term.coefficient), t), inner)
                    sub = [M[1:-1, 1:-1] for M in factors]
                    K = sp.csr_matrix(sub[0])
                    for M in sub[1:]:
                        K = sp.kron(K, sp.csr_matrix(M), format="csr")
                    A = A + ((sp.diags(np.ravel(w)) @ K) if np.ndim(w) else w * K)
                    bd += w * _apply_axes(Gk, [M[1:-1, :] for M in factors])
                rhs = prev / step + Fk - bd
                cur = spla.spsolve(A.tocsc(), rhs.ravel()).reshape(sdims)
                out.append(cur)
                prev = cur
            else:
                prev_tt = _tt_step(problem, grid, t, step, prev, prev_tt, Fk, Gk, terms, tol, solver, cross)
                out.append(prev_tt)
        except Exception as exc:  # noqa: BLE001 - re-raised with the step number
            raise RuntimeError(f"backward-Euler step {k} failed: {exc}") from exc
    if tt:
        return out
    return np.stack(out)


def _tt_step(problem, grid, t, step, prev, prev_tt, Fk, Gk, terms, tol, solver, cross):
    inner = [g.nodes[1:-1] for g in grid.space]
    sdims = [n.size for n in inner]
    cfg = cross or CrossConfig(tol=max(tol, 1e-14))
    A = kron_to_ttmatrix([np.eye(n) / (step if a == 0 else 1.0) for a, n in enumerate(sdims)])
    bd = np.zeros(sdims)
    for term, factors in terms:
        op = kron_to_ttmatrix([M[1:-1, 1:-1] for M in factors]) * term.scale
        w = term.scale
        if term.coefficient is not None:
            fn = coefficient_function(problem, term.coefficient)
            if hasattr(fn, "constant_value"):
                op = op * fn.constant_value
            else:
                coef = tt_cross(GridFunction(_frozen(fn, t), inner), cfg)
                op = tt_round(tt_matmat(diag_lift(coef), op), tol)
            w = w * sample(_frozen(fn, t), inner)
        A = tt_round(A + op, tol)
        bd += w * _apply_axes(Gk, [M[1:-1, :] for M in factors])
    # The right-hand side only has spatial size, so it is formed densely.
    prev_dense = prev if prev_tt is None else prev_tt.full()
    rhs = tt_svd(prev_dense / step + Fk - bd, tol)
    x, report = amen_solve(A, rhs, solver or SolveOptions(), x0=prev_tt)
    if not report.converged:
        raise RuntimeError(f"TT solve did not converge (residual {report.residual:.2e})")
    return tt_round(x, tol)


# -- error measures -------------------------------------------------------------


def relative_l2_error(u_h, u_exact) -> float:
    """``||u_h - u_exact|| / ||u_exact||`` in the plain discrete 2-norm.

    Falls back to the absolute error (with a warning) when ``u_exact`` is
    zero.
    """
    if isinstance(u_h, TTVector):
        u_h = u_h.full()
    if isinstance(u_exact, TTVector):
        u_exact = u_exact.full()
    u_h = np.asarray(u_h, dtype=float)
    u_exact = np.asarray(u_exact, dtype=float)
    if u_h.size != u_exact.size:
        raise ValueError(f"size mismatch: {u_h.shape} vs {u_exact.shape}")
    diff = np.linalg.norm(u_h.ravel() - u_exact.ravel())
    ref = np.linalg.norm(u_exact)
    if ref == 0.0:
        warnings.warn("exact solution is zero; reporting the absolute error", RuntimeWarning, stacklevel=2)
        return float(diff)
    return float(diff / ref)


def compression_ratio(tt_object, dense_dims=None) -> float:
    """TT element count over the dense element count.

    For a :class:`TTMatrix` the dense count is ``rows * cols``.
    """
    if isinstance(tt_object, TTMatrix):
        if dense_dims is None:
            rows, cols = tt_object.shape
            dense = float(rows) * float(cols)
        else:
            dense = float(np.prod(np.asarray(dense_dims, dtype=float))) ** 2
    else:
        dims = tt_object.dims if dense_dims is None else dense_dims
        dense = float(np.prod(np.asarray(dims, dtype=float)))
    return tt_object.n_elements / dense


def storage_kb(tt_object) -> float:
    """TT storage in KiB of float64 (1 KB = 1024 bytes)."""
    return tt_object.n_elements * 8 / 1024.0
