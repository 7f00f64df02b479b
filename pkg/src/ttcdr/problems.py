"""Convection-diffusion-reaction problems and manufactured solutions.

The PDE is ``u_t - kappa * lap(u) + b . grad(u) + c * u = f`` on
``(0, T] x Omega`` with ``u = g`` on the spatial boundary and ``u = h`` at
``t = 0``. All coefficient functions are vectorized and take ``(t, *x)``;
``h`` takes ``(*x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._validation import check_interval

__all__ = ["CdrProblem", "constant", "manufactured", "test1", "test2", "test3", "smooth_time_case", "get_case"]

TWO_PI = 2.0 * np.pi


def constant(value: float) -> Callable:
    """Vectorized constant function of any number of coordinates."""
    value = float(value)

    def fn(*coords):
        return np.full(np.broadcast(*coords).shape, value) if coords else value

    fn.constant_value = value
    return fn


def _as_function(value):
    if value is None:
        return None
    return value if callable(value) else constant(value)


@dataclass
class CdrProblem:
    """Data of a CDR problem on a box.

    Parameters
    ----------
    domain : sequence of (a, b)
        Spatial intervals, one per space dimension (three in the standard
        setting, fewer for lower-dimensional analogues).
    T : float
        Final time; the time interval is ``[0, T]``.
    kappa, c, f : callable or float
        Diffusion coefficient, reaction coefficient and source.
    b : sequence of callable or float
        Convection velocity components.
    g : callable or float
        Boundary values ``g(t, *x)``.
    h : callable or float
        Initial values ``h(*x)``.
    exact : callable, optional
        Exact solution ``u(t, *x)`` when known.
    """

    domain: tuple
    T: float
    kappa: Callable = 1.0
    b: tuple = ()
    c: Callable = 0.0
    f: Callable = 0.0
    g: Callable = 0.0
    h: Callable = 0.0
    exact: Callable | None = None
    name: str = "custom"

    def __post_init__(self):
        self.domain = tuple(check_interval(iv) for iv in self.domain)
        if not 1 <= len(self.domain) <= 3:
            raise ValueError("domain must have 1 to 3 spatial intervals")
        self.T = float(self.T)
        if not self.T > 0:
            raise ValueError("final time T must be positive")
        if not self.b:
            self.b = (0.0,) * self.space_dim
        if len(self.b) != self.space_dim:
            raise ValueError("need one convection component per space dimension")
        self.kappa = _as_function(self.kappa)
        self.b = tuple(_as_function(v) for v in self.b)
        self.c = _as_function(self.c)
        self.f = _as_function(self.f)
        self.g = _as_function(self.g)
        self.h = _as_function(self.h)

    @property
    def space_dim(self) -> int:
        return len(self.domain)

    @property
    def intervals(self) -> tuple:
        """Time interval followed by the spatial ones."""
        return ((0.0, self.T),) + self.domain

    def is_constant(self, name: str) -> bool:
        fn = getattr(self, name)
        return hasattr(fn, "constant_value")

    def with_domain(self, domain, T=None) -> "CdrProblem":
        """Copy with another box (only meaningful for formula-defined data)."""
        return CdrProblem(
            domain=domain, T=self.T if T is None else T, kappa=self.kappa, b=self.b,
            c=self.c, f=self.f, g=self.g, h=self.h, exact=self.exact, name=self.name,
        )


def manufactured(
    u, u_t, grad, lap, *, kappa=1.0, b=(1.0, 1.0, 1.0), c=1.0,
    domain=((-1.0, 1.0),) * 3, T=1.0, name="manufactured",
) -> CdrProblem:
    """Problem whose forcing, boundary and initial data come from ``u``.

    ``grad`` is a sequence of callables (one partial derivative per space
    dimension); the forcing is ``u_t - kappa*lap + b.grad + c*u``.
    """
    kappa, c = _as_function(kappa), _as_function(c)
    b = tuple(_as_function(v) for v in b)

    def f(t, *x):
        out = u_t(t, *x) - kappa(t, *x) * lap(t, *x) + c(t, *x) * u(t, *x)
        for bk, gk in zip(b, grad):
            out = out + bk(t, *x) * gk(t, *x)
        return out

    def h(*x):
        return u(np.zeros_like(np.asarray(x[0], dtype=float)), *x)

    return CdrProblem(domain=domain, T=T, kappa=kappa, b=b, c=c, f=f, g=u, h=h, exact=u, name=name)


def _sine_wave():
    # u = sin(2 pi (t + x + y + z))
    def u(t, x, y, z):
        return np.sin(TWO_PI * (t + x + y + z))

    def u_t(t, x, y, z):
        return TWO_PI * np.cos(TWO_PI * (t + x + y + z))

    grad = (u_t, u_t, u_t)

    def lap(t, x, y, z):
        return -3.0 * TWO_PI**2 * np.sin(TWO_PI * (t + x + y + z))

    return u, u_t, grad, lap


def test1(domain=((-1.0, 1.0),) * 3, T=1.0) -> CdrProblem:
    """Constant coefficients, smooth travelling sine."""
    u, u_t, grad, lap = _sine_wave()
    return manufactured(u, u_t, grad, lap, kappa=1.0, b=(1.0, 1.0, 1.0), c=1.0,
                        domain=domain, T=T, name="test1")


def test2(domain=((-1.0, 1.0),) * 3, T=1.0) -> CdrProblem:
    """Variable coefficients with the same exact solution as test1."""
    u, u_t, grad, lap = _sine_wave()
    return manufactured(
        u, u_t, grad, lap,
        kappa=lambda t, x, y, z: np.exp(-t * t) + 0.0 * x,
        b=(
            lambda t, x, y, z: np.sin(TWO_PI * x) + 0.0 * t,
            lambda t, x, y, z: np.cos(TWO_PI * y) + 0.0 * t,
            lambda t, x, y, z: np.sin(TWO_PI * z) + 0.0 * t,
        ),
        c=lambda t, x, y, z: np.cos(TWO_PI * (t + x + y + z)),
        domain=domain, T=T, name="test2",
    )


def test3(domain=((-1.0, 1.0),) * 3, T=1.0) -> CdrProblem:
    """Constant coefficients, exact solution with a |x|^3 kink at x = 0."""
    pi = np.pi

    def u(t, x, y, z):
        return np.sin(pi * x) * np.sin(pi * y) * np.sin(pi * z) + x * x * np.abs(x) + 0.0 * t

    def u_t(t, x, y, z):
        return np.zeros(np.broadcast(t, x, y, z).shape)

    def ux(t, x, y, z):
        return pi * np.cos(pi * x) * np.sin(pi * y) * np.sin(pi * z) + 3.0 * x * np.abs(x)

    def uy(t, x, y, z):
        return pi * np.sin(pi * x) * np.cos(pi * y) * np.sin(pi * z)

    def uz(t, x, y, z):
        return pi * np.sin(pi * x) * np.sin(pi * y) * np.cos(pi * z)

    def lap(t, x, y, z):
        return -3.0 * pi**2 * np.sin(pi * x) * np.sin(pi * y) * np.sin(pi * z) + 6.0 * np.abs(x)

    return manufactured(u, u_t, (ux, uy, uz), lap, kappa=1.0, b=(1.0, 1.0, 1.0), c=1.0,
                        domain=domain, T=T, name="test3")


def smooth_time_case(domain=((-1.0, 1.0),) * 3, T=1.0) -> CdrProblem:
    """Smooth in time, quadratic in space.

    Any spatial Chebyshev grid with ``N >= 2`` represents the solution
    exactly, so the only discretization error left is the temporal one.
    """

    def p(x, y, z):
        return 1.0 + x * x + y * z + 0.5 * z * z

    def u(t, x, y, z):
        return np.sin(2.0 * t + 1.0) * p(x, y, z)

    def u_t(t, x, y, z):
        return 2.0 * np.cos(2.0 * t + 1.0) * p(x, y, z)

    def ux(t, x, y, z):
        return np.sin(2.0 * t + 1.0) * 2.0 * x

    def uy(t, x, y, z):
        return np.sin(2.0 * t + 1.0) * z

    def uz(t, x, y, z):
        return np.sin(2.0 * t + 1.0) * (y + z)

    def lap(t, x, y, z):
        return np.sin(2.0 * t + 1.0) * 3.0 + 0.0 * (x + y + z)

    return manufactured(u, u_t, (ux, uy, uz), lap, kappa=1.0, b=(1.0, 1.0, 1.0), c=1.0,
                        domain=domain, T=T, name="smooth_time")


_CASES = {"test1": test1, "test2": test2, "test3": test3, "smooth_time": smooth_time_case}


def get_case(name: str, **kwargs) -> CdrProblem:
    try:
        return _CASES[name](**kwargs)
    except KeyError:
        raise ValueError(f"unknown case {name!r}; known: {sorted(_CASES)}") from None
