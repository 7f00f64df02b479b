"""Chebyshev-Gauss-Lobatto grids and spectral differentiation matrices.

Nodes are stored in ascending order, so index 0 is the left end of the
interval (the initial time for a temporal grid).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_interval, check_positive_int

__all__ = [
    "ChebGrid1D",
    "DiffMatrix",
    "cgl_nodes",
    "barycentric_weights",
    "diff_matrix",
    "second_diff_matrix",
    "interpolation_matrix",
]


@dataclass(frozen=True)
class ChebGrid1D:
    """Collocation nodes of one coordinate.

    Parameters
    ----------
    n_intervals : int
        Polynomial degree ``N``; the grid has ``N + 1`` nodes.
    interval : tuple of float
        ``(a, b)`` with ``a < b``.
    nodes : ndarray
        Ascending nodes with ``nodes[0] == a`` and ``nodes[-1] == b``.
    """

    n_intervals: int
    interval: tuple[float, float]
    nodes: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.n_intervals + 1

    @property
    def interior(self) -> np.ndarray:
        """Indices of the nodes strictly inside the interval."""
        return np.arange(1, self.n_intervals)


@dataclass(frozen=True)
class DiffMatrix:
    """Dense differentiation matrix of a given order on a grid."""

    order: int
    matrix: np.ndarray = field(repr=False)
    grid: ChebGrid1D | None = None

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, other):
        return self.matrix @ np.asarray(other)


def cgl_nodes(N: int, interval: tuple[float, float] = (-1.0, 1.0)) -> ChebGrid1D:
    """Chebyshev-Gauss-Lobatto nodes of degree ``N`` mapped to ``interval``.

    ``nodes[k] = (a+b)/2 - (b-a)/2 * cos(k*pi/N)``. The cosine is evaluated
    through the sine identity so that the grid is exactly symmetric.
    """
    N = check_positive_int(N, "N")
    a, b = check_interval(interval)
    k = np.arange(N + 1)
    # cos(k pi / N) == sin(pi (N - 2k) / (2N)), antisymmetric in k -> N - k
    ref = -np.sin(np.pi * (N - 2 * k) / (2.0 * N))
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * ref
    nodes[0], nodes[-1] = a, b
    return ChebGrid1D(n_intervals=N, interval=(a, b), nodes=nodes)


def barycentric_weights(grid: ChebGrid1D) -> np.ndarray:
    """Barycentric weights of the CGL nodes, up to a common factor."""
    N = grid.n_intervals
    w = (-1.0) ** np.arange(N + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def diff_matrix(grid: ChebGrid1D) -> DiffMatrix:
    """First-derivative collocation matrix ``S[i, j] = l_j'(x_i)``.

    Off-diagonal entries use the barycentric formula
    ``(w_j / w_i) / (x_i - x_j)``; the diagonal is the negative row sum, which
    keeps ``S @ ones == 0`` to rounding error. The interval scaling is carried
    by the mapped nodes themselves.
    """
    if not isinstance(grid, ChebGrid1D):
        raise TypeError("diff_matrix expects a ChebGrid1D")
    x = grid.nodes
    w = barycentric_weights(grid)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    S = (w[None, :] / w[:, None]) / dx
    np.fill_diagonal(S, 0.0)
    np.fill_diagonal(S, -S.sum(axis=1))
    return DiffMatrix(order=1, matrix=S, grid=grid)


def second_diff_matrix(S: DiffMatrix) -> DiffMatrix:
    """Second-derivative matrix as the square of the first-derivative one."""
    if not isinstance(S, DiffMatrix) or S.order != 1:
        raise ValueError("second_diff_matrix needs an order-1 DiffMatrix")
    return DiffMatrix(order=2, matrix=S.matrix @ S.matrix, grid=S.grid)


def interpolation_matrix(grid: ChebGrid1D, points) -> np.ndarray:
    """Rows of cardinal-function values ``l_j(points[m])``.

    Returns an array of shape ``(len(points), N + 1)``; multiplying it with
    nodal values evaluates the interpolating polynomial at ``points``.
    """
    points = np.atleast_1d(np.asarray(points, dtype=float))
    x = grid.nodes
    w = barycentric_weights(grid)
    diff = points[:, None] - x[None, :]
    exact = diff == 0.0
    diff[exact] = 1.0
    L = w[None, :] / diff
    L /= L.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    if hit.any():
        L[hit] = exact[hit].astype(float)
    return L
