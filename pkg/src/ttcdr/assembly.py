"""Assembly of the space-time CDR system in TT format.

The unknowns live on the interior nodes: time indices ``1..n_t`` (the
initial time is known) and spatial indices ``1..N-1`` per axis. The full
operator is the sum

    A = D_t (x) I (x) I (x) I                       (time derivative)
        - diag(K) (sum_a I (x) .. S_aa .. (x) I)    (diffusion, -kappa lap)
        + sum_a diag(B_a) (I (x) .. S_a .. (x) I)   (convection)
        + diag(C)                                   (reaction)

where ``D_t`` is the Chebyshev differentiation matrix in time (space-time
spectral scheme) or the backward-Euler difference matrix. Known boundary and
initial values enter through ``F_bd = A_map G_bd``: ``A_map`` keeps the
interior rows of every factor but all columns, and ``G_bd`` holds ``g`` on
spatial-boundary nodes, ``h`` on the spatially interior nodes at ``t = 0``
and zero elsewhere. The reduced system is ``A u = F - F_bd``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._validation import check_positive_int, check_tolerance
from .chebyshev import ChebGrid1D, cgl_nodes, diff_matrix
from .cross import CrossConfig, GridFunction, tt_cross
from .problems import CdrProblem
from .tt import TTMatrix, TTVector, diag_lift, kron_to_ttmatrix, tt_matmat, tt_matvec, tt_round, tt_zeros

__all__ = [
    "TIME_SCHEMES",
    "SpaceTimeGrid",
    "DiscreteSystem",
    "OperatorTerm",
    "build_grid",
    "backward_euler_matrix",
    "operator_terms",
    "CdrAssembler",
    "assemble_time_spectral",
    "assemble_time_backward_euler",
    "assemble_diffusion",
    "assemble_convection",
    "assemble_reaction",
    "assemble_rhs",
    "assemble_boundary",
    "assemble_system",
]

logger = logging.getLogger(__name__)

TIME_SCHEMES = ("spectral", "backward_euler")


def backward_euler_matrix(n_steps: int, T: float) -> np.ndarray:
    """``(n+1) x (n+1)`` backward-difference matrix on uniform time nodes.

    ``1/dt`` on the diagonal and ``-1/dt`` on the subdiagonal; the first row
    belongs to the (known) initial time and only has its diagonal entry.
    """
    n = check_positive_int(n_steps, "n_steps")
    dt = float(T) / n
    return (np.eye(n + 1) - np.eye(n + 1, k=-1)) / dt


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Tensor grid of the space-time domain.

    Attributes
    ----------
    N : int
        Polynomial degree in space (``N + 1`` nodes per spatial axis).
    time_scheme : {"spectral", "backward_euler"}
    t_nodes : ndarray
        ``n_t + 1`` time nodes, Chebyshev (spectral) or uniform.
    space : tuple of ChebGrid1D
    """

    N: int
    time_scheme: str
    t_nodes: np.ndarray = field(repr=False)
    space: tuple = field(repr=False)
    T: float = 1.0

    @property
    def n_time(self) -> int:
        return len(self.t_nodes) - 1

    @property
    def space_dim(self) -> int:
        return len(self.space)

    @property
    def d(self) -> int:
        return 1 + self.space_dim

    @property
    def full_dims(self) -> list[int]:
        return [self.n_time + 1] + [g.size for g in self.space]

    @property
    def interior_dims(self) -> list[int]:
        return [self.n_time] + [g.size - 2 for g in self.space]

    def interior_index(self, axis: int) -> np.ndarray:
        """``I_t = 1..n_t`` for time, ``I_s = 1..N-1`` for space."""
        if axis == 0:
            return np.arange(1, self.n_time + 1)
        return self.space[axis - 1].interior

    @property
    def axis_nodes(self) -> list[np.ndarray]:
        return [self.t_nodes] + [g.nodes for g in self.space]

    @property
    def interior_nodes(self) -> list[np.ndarray]:
        return [nodes[self.interior_index(k)] for k, nodes in enumerate(self.axis_nodes)]

    @property
    def n_interior(self) -> int:
        return int(np.prod(self.interior_dims))

    @cached_property
    def time_matrix(self) -> np.ndarray:
        if self.time_scheme == "spectral":
            return diff_matrix(cgl_nodes(self.n_time, (0.0, self.T))).matrix
        return backward_euler_matrix(self.n_time, self.T)

    @cached_property
    def first_derivatives(self) -> list[np.ndarray]:
        return [diff_matrix(g).matrix for g in self.space]

    @cached_property
    def second_derivatives(self) -> list[np.ndarray]:
        return [S @ S for S in self.first_derivatives]


def build_grid(problem: CdrProblem, N: int, time_scheme: str = "spectral", n_time: int | None = None) -> SpaceTimeGrid:
    """Grid of degree ``N`` in space and ``n_time`` (default ``N``) intervals in time."""
    N = check_positive_int(N, "N", minimum=2)
    n_time = N if n_time is None else check_positive_int(n_time, "n_time")
    if time_scheme not in TIME_SCHEMES:
        raise ValueError(f"time_scheme must be one of {TIME_SCHEMES}, got {time_scheme!r}")
    if time_scheme == "spectral":
        t_nodes = cgl_nodes(n_time, (0.0, problem.T)).nodes
    else:
        t_nodes = np.linspace(0.0, problem.T, n_time + 1)
    space = tuple(cgl_nodes(N, iv) for iv in problem.domain)
    return SpaceTimeGrid(N=N, time_scheme=time_scheme, t_nodes=t_nodes, space=space, T=problem.T)


@dataclass
class DiscreteSystem:
    """Reduced TT system ``A u = rhs`` on the interior nodes."""

    A: TTMatrix
    rhs: TTVector
    grid: SpaceTimeGrid
    assembly_tol: float
    F: TTVector | None = None
    F_bd: TTVector | None = None

    def dense(self):
        """Dense mirror ``(A, rhs)`` of the reduced system."""
        return self.A.full(), self.rhs.full().ravel()


# -- operator description ------------------------------------------------------


@dataclass(frozen=True)
class OperatorTerm:
    """``scale * diag(coef) * kron(factors)`` with full-grid 1D factors.

    ``coefficient`` names the problem field (``"kappa"``, ``"c"``, ``"b0"``,
    ...) or is ``None`` for an unweighted term.
    """

    coefficient: str | None
    factors: tuple
    scale: float = 1.0
    part: str = ""


def coefficient_function(problem: CdrProblem, key: str):
    if key.startswith("b"):
        return problem.b[int(key[1:])]
    return getattr(problem, key)


def _is_zero(fn) -> bool:
    return getattr(fn, "constant_value", None) == 0.0


def operator_terms(problem: CdrProblem, grid: SpaceTimeGrid) -> list[OperatorTerm]:
    """All Kronecker terms of the full-grid operator.

    Terms whose coefficient is the constant zero are dropped.
    """
    if problem.space_dim != grid.space_dim:
        raise ValueError("problem and grid have different space dimensions")
    eyes = [np.eye(n) for n in grid.full_dims]

    def with_factor(axis, M):
        factors = list(eyes)
        factors[axis] = M
        return tuple(factors)

    terms = [OperatorTerm(None, with_factor(0, grid.time_matrix), 1.0, "time")]
    if not _is_zero(problem.kappa):
        for a, S2 in enumerate(grid.second_derivatives):
            terms.append(OperatorTerm("kappa", with_factor(a + 1, S2), -1.0, "diffusion"))
    for a, S in enumerate(grid.first_derivatives):
        if not _is_zero(problem.b[a]):
            terms.append(OperatorTerm(f"b{a}", with_factor(a + 1, S), 1.0, "convection"))
    if not _is_zero(problem.c):
        terms.append(OperatorTerm("c", tuple(eyes), 1.0, "reaction"))
    return terms


def restrict_factors(term: OperatorTerm, grid: SpaceTimeGrid, columns: str = "interior") -> list[np.ndarray]:
    """Interior rows and interior (or all) columns of every factor."""
    out = []
    for k, M in enumerate(term.factors):
        rows = grid.interior_index(k)
        cols = rows if columns == "interior" else np.arange(M.shape[1])
        out.append(M[np.ix_(rows, cols)])
    return out


# -- TT assembly -------------------------------------------------------------------


class CdrAssembler:
    """Builds and caches the TT pieces of one discrete problem.

    Parameters
    ----------
    problem : CdrProblem
    grid : SpaceTimeGrid
    tol : float
        Relative rounding tolerance applied after every sum and product.
    cross : CrossConfig, optional
        Settings of the cross interpolations of coefficients and data.
    """

    def __init__(self, problem: CdrProblem, grid: SpaceTimeGrid, tol: float = 1e-12, cross: CrossConfig | None = None):
        self.problem = problem
        self.grid = grid
        self.tol = check_tolerance(tol, "tol")
        self.cross = cross or CrossConfig(tol=max(tol, 1e-14))
        self.terms = operator_terms(problem, grid)
        self._coef_cache: dict[str, TTVector] = {}

    # coefficient and data samples
    def _cross(self, fn, nodes, what: str) -> TTVector:
        tt = tt_cross(GridFunction(fn, nodes), self.cross)
        logger.debug("cross of %s: ranks %s, held-out error %.2e", what, tt.ranks, tt.cross_info.held_out_error)
        return tt

    def coefficient_tt(self, key: str) -> TTVector:
        if key not in self._coef_cache:
            fn = coefficient_function(self.problem, key)
            self._coef_cache[key] = self._cross(fn, self.grid.interior_nodes, key)
        return self._coef_cache[key]

    def _group(self, parts, columns="interior") -> TTMatrix | None:
        """Sum of the selected terms, grouped by coefficient."""
        groups: dict = {}
        for term in self.terms:
            if term.part in parts:
                groups.setdefault(term.coefficient, []).append(term)
        total = None
        for key, terms in groups.items():
            base = None
            for term in terms:
                op = kron_to_ttmatrix(restrict_factors(term, self.grid, columns)) * term.scale
                base = op if base is None else base + op
            base = tt_round(base, self.tol)
            if key is not None:
                fn = coefficient_function(self.problem, key)
                if hasattr(fn, "constant_value"):
                    base = base * fn.constant_value
                else:
                    base = tt_round(tt_matmat(diag_lift(self.coefficient_tt(key)), base), self.tol)
            total = base if total is None else tt_round(total + base, self.tol)
        return total

    def _zero_operator(self, columns="interior") -> TTMatrix:
        rows = self.grid.interior_dims
        cols = rows if columns == "interior" else self.grid.full_dims
        return kron_to_ttmatrix([np.zeros((rows[0], cols[0]))] + [np.eye(r, c) for r, c in zip(rows[1:], cols[1:])])

    def _part(self, part: str) -> TTMatrix:
        op = self._group({part})
        return op if op is not None else self._zero_operator()

    def time_operator(self) -> TTMatrix:
        return self._part("time")

    def diffusion(self) -> TTMatrix:
        """TT-matrix of ``-diag(K) lap`` on the interior."""
        return self._part("diffusion")

    def convection(self) -> TTMatrix:
        return self._part("convection")

    def reaction(self) -> TTMatrix:
        return self._part("reaction")

    @cached_property
    def operator(self) -> TTMatrix:
        return self._group({"time", "diffusion", "convection", "reaction"})

    @cached_property
    def map_operator(self) -> TTMatrix:
        """Interior rows, all columns."""
        return self._group({"time", "diffusion", "convection", "reaction"}, columns="all")

    @cached_property
    def forcing(self) -> TTVector:
        return self._cross(self.problem.f, self.grid.interior_nodes, "f")

    def check_compatibility(self, atol: float = 1e-10) -> float:
        """Max mismatch of ``g(0, x)`` and ``h(x)`` on the spatial boundary.

        Warns when the mismatch exceeds ``atol``.
        """
        grids = [g.nodes for g in self.grid.space]
        mesh = np.meshgrid(*grids, indexing="ij")
        on_bd = np.zeros(mesh[0].shape, dtype=bool)
        for a, g in enumerate(self.grid.space):
            idx = [slice(None)] * len(grids)
            for end in (0, g.size - 1):
                idx[a] = end
                on_bd[tuple(idx)] = True
        pts = [m[on_bd] for m in mesh]
        gv = np.asarray(self.problem.g(np.zeros_like(pts[0]), *pts), dtype=float)
        hv = np.asarray(self.problem.h(*pts), dtype=float)
        gap = float(np.max(np.abs(gv - hv))) if gv.size else 0.0
        if gap > atol:
            warnings.warn(
                f"boundary and initial data disagree at t=0 on the spatial boundary (max gap {gap:.2e})",
                RuntimeWarning,
                stacklevel=3,
            )
        return gap

    @cached_property
    def boundary_tensor(self) -> TTVector:
        """``G_bd`` on the full grid.

        Built exactly from TT approximations of ``g`` (full space-time grid)
        and ``h`` (full spatial grid) with rank-one indicator masks:
        ``G = g - (1 (x) P) * g + e_0 (x) (P * h)`` where ``P`` marks the
        spatially interior nodes and ``e_0`` the initial time.
        """
        grid = self.grid
        dims = grid.full_dims
        if _is_zero(self.problem.g) and _is_zero(self.problem.h):
            return tt_zeros(dims)
        masks = [np.zeros(n) for n in dims[1:]]
        for m, g in zip(masks, grid.space):
            m[g.interior] = 1.0
        parts = []
        if not _is_zero(self.problem.g):
            gt = self._cross(self.problem.g, grid.axis_nodes, "g")
            cores = [gt.cores[0].copy()] + [c * m[None, :, None] for c, m in zip(gt.cores[1:], masks)]
            parts += [gt, -TTVector(cores)]
        if not _is_zero(self.problem.h):
            ht = self._cross(self.problem.h, [g.nodes for g in grid.space], "h")
            e0 = np.zeros((1, dims[0], 1))
            e0[0, 0, 0] = 1.0
            cores = [e0] + [c * m[None, :, None] for c, m in zip(ht.cores, masks)]
            parts.append(TTVector(cores))
        G = parts[0]
        for p in parts[1:]:
            G = G + p
        return tt_round(G, self.tol)

    @cached_property
    def boundary(self) -> TTVector:
        """``F_bd = A_map G_bd`` on the interior grid."""
        self.check_compatibility()
        G = self.boundary_tensor
        if G.norm() == 0.0:
            return tt_zeros(self.grid.interior_dims)
        return tt_round(tt_matvec(self.map_operator, G), self.tol)

    def system(self) -> DiscreteSystem:
        F, Fbd = self.forcing, self.boundary
        rhs = tt_round(F - Fbd, self.tol)
        return DiscreteSystem(A=self.operator, rhs=rhs, grid=self.grid, assembly_tol=self.tol, F=F, F_bd=Fbd)


# -- functional interface ------------------------------------------------------------


def assemble_time_spectral(grid: SpaceTimeGrid) -> TTMatrix:
    """``S_t(I_t, I_t) (x) I (x) ... (x) I`` with unit TT ranks."""
    St = diff_matrix(cgl_nodes(grid.n_time, (0.0, grid.T))).matrix
    It = grid.interior_index(0)
    return kron_to_ttmatrix([St[np.ix_(It, It)]] + [np.eye(n) for n in grid.interior_dims[1:]])


def assemble_time_backward_euler(n_steps: int, T: float, space_dims=()):
    """Backward-Euler matrix and its interior TT lift.

    Returns ``(T_BE, lift)`` where ``lift = T_BE[1:, 1:] (x) I ... (x) I``
    over ``space_dims`` identity factors.
    """
    TBE = backward_euler_matrix(n_steps, T)
    lift = kron_to_ttmatrix([TBE[1:, 1:]] + [np.eye(int(n)) for n in space_dims])
    return TBE, lift


def assemble_diffusion(problem, grid, tol=1e-12, cross=None) -> TTMatrix:
    """TT-matrix of ``-diag(K) lap`` restricted to the interior."""
    return CdrAssembler(problem, grid, tol, cross).diffusion()


def assemble_convection(problem, grid, tol=1e-12, cross=None) -> TTMatrix:
    return CdrAssembler(problem, grid, tol, cross).convection()


def assemble_reaction(problem, grid, tol=1e-12, cross=None) -> TTMatrix:
    return CdrAssembler(problem, grid, tol, cross).reaction()


def assemble_rhs(problem, grid, tol=1e-12, cross=None) -> TTVector:
    return CdrAssembler(problem, grid, tol, cross).forcing


def assemble_boundary(problem, grid, tol=1e-12, cross=None) -> TTVector:
    return CdrAssembler(problem, grid, tol, cross).boundary


def assemble_system(problem, grid, time_scheme: str | None = None, tol: float = 1e-12, cross=None) -> DiscreteSystem:
    """Assemble ``A`` and ``rhs = F - F_bd``.

    ``grid`` is either a :class:`SpaceTimeGrid` or the degree ``N``; in the
    latter case ``time_scheme`` selects the time discretization.
    """
    if not isinstance(grid, SpaceTimeGrid):
        grid = build_grid(problem, grid, time_scheme or "spectral")
    elif time_scheme is not None and time_scheme != grid.time_scheme:
        raise ValueError(f"grid uses {grid.time_scheme!r}, not {time_scheme!r}")
    return CdrAssembler(problem, grid, tol, cross).system()
