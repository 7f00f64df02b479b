"""Space-time spectral collocation for convection-diffusion-reaction problems
in tensor-train format.

Layers, bottom up: Chebyshev collocation (:mod:`ttcdr.chebyshev`), dense
tensor helpers (:mod:`ttcdr.tensor`), tensor trains (:mod:`ttcdr.tt`),
cross interpolation (:mod:`ttcdr.cross`), the TT linear solver
(:mod:`ttcdr.solve`), system assembly (:mod:`ttcdr.assembly`), the
full-grid oracle (:mod:`ttcdr.reference`) and the experiment driver
(:mod:`ttcdr.experiment`, :mod:`ttcdr.cli`).
"""

from ._validation import MemoryGuardError
from .assembly import (
    CdrAssembler,
    DiscreteSystem,
    SpaceTimeGrid,
    assemble_boundary,
    assemble_convection,
    assemble_diffusion,
    assemble_reaction,
    assemble_rhs,
    assemble_system,
    assemble_time_backward_euler,
    assemble_time_spectral,
    backward_euler_matrix,
    build_grid,
)
from .chebyshev import ChebGrid1D, DiffMatrix, cgl_nodes, diff_matrix, interpolation_matrix, second_diff_matrix
from .cross import CrossConfig, GridFunction, cross_interpolate, maxvol, tt_cross
from .estimators import SpaceTimeCdrSolver
from .experiment import ExperimentConfig, emit_report, parse_config, run_experiment, solve_case
from .problems import CdrProblem, get_case
from .reference import (
    backward_euler_march,
    compression_ratio,
    full_grid_solve,
    relative_l2_error,
    storage_kb,
)
from .solve import SolveOptions, SolveReport, amen_solve
from .tt import (
    TTMatrix,
    TTVector,
    diag_lift,
    kron_to_ttmatrix,
    load_tt,
    save_tt,
    tt_matmat,
    tt_matvec,
    tt_round,
    tt_svd,
)

__version__ = "0.1.0"
