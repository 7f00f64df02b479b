"""scikit-learn style front end.

:class:`SpaceTimeCdrSolver` wraps a single run: ``fit`` takes a
:class:`~ttcdr.problems.CdrProblem` (in place of a design matrix) and
``predict`` evaluates the discrete solution at arbitrary space-time points.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_is_fitted

from .chebyshev import cgl_nodes, interpolation_matrix
from .cross import CrossConfig
from .experiment import METHODS, solve_case
from .problems import CdrProblem
from .reference import boundary_array
from .solve import SolveOptions
from .tt import TTVector

__all__ = ["SpaceTimeCdrSolver"]


def _linear_weights(nodes: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Hat-function weights on ascending ``nodes``."""
    W = np.zeros((points.size, nodes.size))
    j = np.clip(np.searchsorted(nodes, points, side="right") - 1, 0, nodes.size - 2)
    lam = (points - nodes[j]) / (nodes[j + 1] - nodes[j])
    rows = np.arange(points.size)
    W[rows, j] = 1.0 - lam
    W[rows, j + 1] = lam
    return W


class SpaceTimeCdrSolver(BaseEstimator):
    """Solve a CDR problem on a space-time grid.

    Parameters
    ----------
    N : int
        Polynomial degree in space (and number of time intervals).
    method : {"sp-sp-tt", "sp-sp-full", "fd-fd-tt", "fd-fd-full"}
    tt_tol : float
        Rounding tolerance of the TT assembly.
    solver_tol : float
        Relative residual target of the TT solver.
    kickrank : int
        Enrichment rank of the TT solver.
    max_sweeps : int
    seed : int

    Attributes
    ----------
    grid_ : SpaceTimeGrid
    solution_ : ndarray
        Interior solution with axes ``(t, x, y, z)``.
    solution_tt_ : TTVector or None
        The TT solution for TT methods.
    values_ : ndarray
        Solution on the full grid (interior plus boundary and initial data).
    result_ : RunResult
    """

    def __init__(self, N=8, method="sp-sp-tt", tt_tol=1e-12, solver_tol=1e-10, kickrank=4,
                 max_sweeps=30, seed=20230067):
        self.N = N
        self.method = method
        self.tt_tol = tt_tol
        self.solver_tol = solver_tol
        self.kickrank = kickrank
        self.max_sweeps = max_sweeps
        self.seed = seed

    def fit(self, problem: CdrProblem, y=None):
        if not isinstance(problem, CdrProblem):
            raise TypeError("fit expects a CdrProblem")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        opts = SolveOptions(tol=self.solver_tol, kickrank=self.kickrank, max_sweeps=self.max_sweeps, seed=self.seed)
        result = solve_case(problem, self.method, self.N, opts, CrossConfig(seed=self.seed), self.tt_tol)
        self.problem_ = problem
        self.result_ = result
        self.grid_ = result.grid
        sol = result.solution
        self.solution_tt_ = sol if isinstance(sol, TTVector) else None
        self.solution_ = sol.full() if isinstance(sol, TTVector) else np.asarray(sol)
        values = boundary_array(problem, self.grid_)
        values[(slice(1, None),) + tuple(slice(1, -1) for _ in self.grid_.space)] = self.solution_
        self.values_ = values
        return self

    def _weights(self, axis: int, coords: np.ndarray) -> np.ndarray:
        grid = self.grid_
        if axis == 0:
            if grid.time_scheme == "backward_euler":
                return _linear_weights(grid.t_nodes, coords)
            return interpolation_matrix(cgl_nodes(grid.n_time, (0.0, grid.T)), coords)
        return interpolation_matrix(grid.space[axis - 1], coords)

    def predict(self, X) -> np.ndarray:
        """Interpolated solution at points ``X`` of shape ``(m, 1 + dim)``.

        Columns are ``t`` followed by the spatial coordinates. Spatial (and
        spectral-in-time) interpolation is barycentric; backward-Euler
        solutions are interpolated linearly in time.
        """
        check_is_fitted(self, "values_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.grid_.d:
            raise ValueError(f"expected {self.grid_.d} columns (t and space), got {X.shape[1]}")
        res = self.values_
        out = None
        # Contract one axis at a time, keeping the point index in front.
        W0 = self._weights(0, X[:, 0])
        out = np.tensordot(W0, res, axes=(1, 0))  # (m, n1, ...)
        for axis in range(1, self.grid_.d):
            W = self._weights(axis, X[:, axis])
            out = np.einsum("mj,mj...->m...", W, out)
        return out

    def error(self) -> float:
        """Relative discrete L2 error on the interior (needs an exact solution)."""
        if not hasattr(self, "result_"):
            raise NotFittedError("call fit first")
        return self.result_.rel_l2
