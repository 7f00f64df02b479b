"""Experiment driver: configs, single runs and report files.

A run solves one case with one method at one degree ``N`` and records the
error against the exact solution together with TT statistics. Methods:

``sp-sp-tt``
    Chebyshev collocation in space and time, TT assembly, TT solve.
``sp-sp-full``
    The same discretization solved on the full grid.
``fd-fd-tt``
    Backward Euler in time (``N`` uniform steps), Chebyshev collocation in
    space; the whole space-time system is solved in TT format.
``fd-fd-full``
    The same discretization solved by dense time marching.
"""

from __future__ import annotations

import ast
import csv
import io
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from ._validation import MemoryGuardError, check_interval, check_positive_int, check_tolerance
from .assembly import CdrAssembler, build_grid
from .cross import CrossConfig
from .problems import CdrProblem, get_case
from .reference import compression_ratio, exact_interior, full_grid_solve, relative_l2_error
from .solve import SolveOptions, amen_solve

__all__ = [
    "METHODS",
    "REPORT_COLUMNS",
    "SEED_ENV",
    "ConfigError",
    "ExperimentConfig",
    "RunResult",
    "parse_config",
    "load_config",
    "make_problem",
    "solve_case",
    "run_experiment",
    "emit_report",
]

logger = logging.getLogger(__name__)

METHODS = ("sp-sp-tt", "sp-sp-full", "fd-fd-tt", "fd-fd-full")
REPORT_COLUMNS = ("case", "method", "N", "rel_l2", "elapsed_s", "cr_solution", "cr_operator", "max_rank", "sweeps", "converged")
SEED_ENV = "TTCDR_SEED"
CASES = ("test1", "test2", "test3", "smooth_time", "custom")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    """Settings of an experiment; see :func:`parse_config` for the file format."""

    case: str = "test1"
    methods: list = field(default_factory=lambda: ["sp-sp-tt"])
    N_list: list = field(default_factory=lambda: [4, 8])
    tt_tol: float = 1e-12
    solver_tol: float = 1e-10
    kickrank: int = 4
    max_sweeps: int = 30
    cross_tol: float = 1e-12
    seed: int = 20230067
    domain: tuple = ((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0))
    T: float = 1.0
    out: str | None = None
    format: str = "csv"
    expressions: dict = field(default_factory=dict)

    def validate(self) -> "ExperimentConfig":
        if self.case not in CASES:
            raise ConfigError(f"case: unknown case {self.case!r} (known: {', '.join(CASES)})")
        if not self.methods:
            raise ConfigError("methods: at least one method is required")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"methods: unknown method(s) {bad} (known: {', '.join(METHODS)})")
        if not self.N_list:
            raise ConfigError("N_list: at least one N is required")
        if any(n < 2 for n in self.N_list) or any(b <= a for a, b in zip(self.N_list, self.N_list[1:])):
            raise ConfigError(f"N_list: must be ascending integers >= 2, got {self.N_list}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format: must be csv or json, got {self.format!r}")
        try:
            check_tolerance(self.tt_tol, "tt_tol")
            check_tolerance(self.solver_tol, "solver_tol", allow_zero=False)
            check_tolerance(self.cross_tol, "cross_tol", allow_zero=False)
            check_positive_int(self.kickrank, "kickrank", minimum=0)
            check_positive_int(self.max_sweeps, "max_sweeps")
            self.domain = tuple(check_interval(iv) for iv in self.domain)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.case == "custom":
            missing = {"f"} - set(self.expressions)
            if missing:
                raise ConfigError(f"case custom needs expressions for {sorted(missing)}")
        return self

    @property
    def solve_options(self) -> SolveOptions:
        return SolveOptions(tol=self.solver_tol, kickrank=self.kickrank, max_sweeps=self.max_sweeps, seed=self.seed)

    @property
    def cross_config(self) -> CrossConfig:
        return CrossConfig(tol=self.cross_tol, seed=self.seed)


# -- config file ---------------------------------------------------------------------

_EXPR_KEYS = ("kappa", "bx", "by", "bz", "c", "f", "g", "h", "exact")


def _parse_list(text, conv):
    return [conv(v.strip()) for v in text.replace(";", ",").split(",") if v.strip()]


def _parse_domain(text):
    parts = [p for p in text.split(";") if p.strip()]
    return tuple(tuple(float(v) for v in p.split(",")) for p in parts)


_PARSERS = {
    "case": str,
    "methods": lambda s: _parse_list(s, str.lower),
    "N_list": lambda s: _parse_list(s, int),
    "tt_tol": float,
    "solver_tol": float,
    "kickrank": int,
    "max_sweeps": int,
    "cross_tol": float,
    "seed": int,
    "domain": _parse_domain,
    "T": float,
    "out": str,
    "format": str.lower,
}


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse the flat ``key = value`` config format.

    Blank lines and ``#`` comments are ignored. Lists are comma separated;
    ``domain`` is ``a,b; a,b; a,b``. With ``case = custom`` the keys
    ``kappa, bx, by, bz, c, f, g, h, exact`` hold expressions in
    ``t, x, y, z`` (numpy functions ``sin, cos, exp, ...`` and ``pi``).
    """
    values = {}
    expressions = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in _EXPR_KEYS:
            try:
                _compile_expression(value)
            except (SyntaxError, ValueError) as exc:
                raise ConfigError(f"{source}:{lineno}: field {key}: {exc}") from None
            expressions[key] = value
            continue
        if key not in _PARSERS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: field {key}: cannot parse {value!r} ({exc})") from None
    cfg = ExperimentConfig(**values, expressions=expressions)
    env_seed = os.environ.get(SEED_ENV)
    if env_seed:
        try:
            cfg.seed = int(env_seed)
        except ValueError:
            raise ConfigError(f"environment {SEED_ENV}: not an integer: {env_seed!r}") from None
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


_ALLOWED_NAMES = {
    "t", "x", "y", "z", "pi", "e", "sin", "cos", "tan", "exp", "log", "sqrt", "abs",
    "sinh", "cosh", "tanh", "arctan", "minimum", "maximum",
}
_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd,
)


def _compile_expression(text: str):
    """Vectorized function of ``(t, x, y, z)`` from a whitelisted expression."""
    tree = ast.parse(text, mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ValueError(f"unsupported syntax {type(node).__name__}")
        if isinstance(node, ast.Name) and node.id not in _ALLOWED_NAMES:
            raise ValueError(f"unknown name {node.id!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ValueError("only numeric constants are allowed")
    code = compile(tree, "<expression>", "eval")
    namespace = {name: getattr(np, name) for name in _ALLOWED_NAMES - {"t", "x", "y", "z", "abs"}}
    namespace["abs"] = np.abs
    namespace["__builtins__"] = {}

    def fn(t, x, y=0.0, z=0.0):
        val = eval(code, namespace, {"t": t, "x": x, "y": y, "z": z})  # noqa: S307 - whitelisted AST
        return val + 0.0 * (np.asarray(t) + x + y + z)

    return fn


def make_problem(cfg: ExperimentConfig) -> CdrProblem:
    if cfg.case != "custom":
        return get_case(cfg.case, domain=cfg.domain, T=cfg.T)
    ex = {k: _compile_expression(v) for k, v in cfg.expressions.items()}
    zero = 0.0
    h = ex.get("h")
    return CdrProblem(
        domain=cfg.domain, T=cfg.T,
        kappa=ex.get("kappa", 1.0),
        b=tuple(ex.get(k, zero) for k in ("bx", "by", "bz")[: len(cfg.domain)]),
        c=ex.get("c", zero), f=ex["f"], g=ex.get("g", zero),
        h=(lambda *x: h(0.0, *x)) if h is not None else zero,
        exact=ex.get("exact"), name="custom",
    )


# -- single run ----------------------------------------------------------------------


@dataclass
class RunResult:
    """One row of the report plus the computed solution."""

    case: str
    method: str
    N: int
    rel_l2: float = math.nan
    elapsed_s: float = math.nan
    cr_solution: float | None = None
    cr_operator: float | None = None
    max_rank: int | None = None
    sweeps: int | None = None
    converged: bool = False
    status: str = "ok"
    note: str = ""
    solution: object = field(default=None, repr=False)
    grid: object = field(default=None, repr=False)

    def row(self) -> dict:
        return {k: getattr(self, k) for k in REPORT_COLUMNS}


def solve_case(problem: CdrProblem, method: str, N: int, solver: SolveOptions | None = None,
               cross: CrossConfig | None = None, tt_tol: float = 1e-12, n_time: int | None = None) -> RunResult:
    """Discretize and solve ``problem`` with ``method`` at degree ``N``.

    The elapsed time covers assembly and solve only. Returns a
    :class:`RunResult` whose ``solution`` holds the interior values (a
    ``TTVector`` for TT methods, an ndarray otherwise).
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    solver = solver or SolveOptions()
    scheme = "spectral" if method.startswith("sp") else "backward_euler"
    grid = build_grid(problem, N, scheme, n_time=n_time)
    res = RunResult(case=problem.name, method=method, N=N, grid=grid)
    start = time.perf_counter()
    if method.endswith("-tt"):
        system = CdrAssembler(problem, grid, tt_tol, cross).system()
        x, report = amen_solve(system.A, system.rhs, solver)
        res.elapsed_s = time.perf_counter() - start
        res.solution = x
        res.cr_solution = compression_ratio(x)
        res.cr_operator = compression_ratio(system.A)
        res.max_rank = x.max_rank
        res.sweeps = report.sweeps
        res.converged = report.converged
        if report.failure:
            res.note = report.failure
        elif not report.converged:
            res.note = f"solver stopped at relative residual {report.residual:.2e}"
        dense = x.full()
    else:
        dense = full_grid_solve(problem, grid)
        res.elapsed_s = time.perf_counter() - start
        res.solution = dense
        res.converged = True
    if problem.exact is not None:
        res.rel_l2 = relative_l2_error(dense, exact_interior(problem, grid))
    return res


# -- experiments ---------------------------------------------------------------------


def run_experiment(cfg: ExperimentConfig, log=None) -> list[RunResult]:
    """Run every ``(method, N)`` pair sequentially.

    Full-grid requests beyond the memory guard become ``skipped`` rows;
    exceptions become ``failed`` rows. Neither stops the experiment.
    """
    cfg.validate()
    problem = make_problem(cfg)
    rows = []
    for method in cfg.methods:
        for N in cfg.N_list:
            try:
                r = solve_case(problem, method, N, cfg.solve_options, cfg.cross_config, cfg.tt_tol)
                if not r.converged:
                    r.status = "failed"
            except MemoryGuardError as exc:
                r = RunResult(cfg.case, method, N, status="skipped", note=f"memory guard: {exc}")
            except Exception as exc:  # noqa: BLE001 - recorded per row
                logger.exception("run %s N=%d failed", method, N)
                r = RunResult(cfg.case, method, N, status="failed", note=f"{type(exc).__name__}: {exc}")
            r.case = cfg.case
            if log is not None:
                msg = f"{cfg.case} {method} N={N}: {r.status}"
                if r.status == "ok":
                    msg += f" rel_l2={r.rel_l2:.3e} elapsed={r.elapsed_s:.2f}s"
                if r.note:
                    msg += f" ({r.note})"
                print(msg, file=log)
            rows.append(r)
    return rows


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def emit_report(rows, format: str = "csv", file=None) -> str:
    """Serialize rows as CSV (columns :data:`REPORT_COLUMNS`) or JSON.

    The JSON document is a list of objects with the same keys plus
    ``status`` and ``note``. Writes to ``file`` (path or text stream) when
    given and returns the text.
    """
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for r in rows:
            row = r.row() if isinstance(r, RunResult) else r
            writer.writerow([_csv_value(row[k]) for k in REPORT_COLUMNS])
        text = buf.getvalue()
    elif format == "json":
        objs = []
        for r in rows:
            row = r.row() if isinstance(r, RunResult) else dict(r)
            obj = {k: _json_value(row.get(k)) for k in REPORT_COLUMNS}
            if isinstance(r, RunResult):
                obj["status"], obj["note"] = r.status, r.note
            objs.append(obj)
        text = json.dumps(objs, indent=2) + "\n"
    else:
        raise ValueError(f"unknown format {format!r}")
    if file is not None:
        if hasattr(file, "write"):
            file.write(text)
        else:
            with open(file, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    return text
