import numpy as np
import pytest
import sympy as sp

from ttcdr import problems
from ttcdr.problems import CdrProblem, constant, get_case

t, x, y, z = sp.symbols("t x y z", real=True)
X = (x, y, z)

# Independent symbolic statements of the manufactured cases.
SINE = sp.sin(2 * sp.pi * (t + x + y + z))
SYMBOLIC = {
    "test1": dict(u=SINE, kappa=1, b=(1, 1, 1), c=1),
    "test2": dict(
        u=SINE,
        kappa=sp.exp(-t**2),
        b=(sp.sin(2 * sp.pi * x), sp.cos(2 * sp.pi * y), sp.sin(2 * sp.pi * z)),
        c=sp.cos(2 * sp.pi * (t + x + y + z)),
    ),
    "test3": dict(u=sp.sin(sp.pi * x) * sp.sin(sp.pi * y) * sp.sin(sp.pi * z) + x**2 * sp.Abs(x), kappa=1, b=(1, 1, 1), c=1),
    "smooth_time": dict(u=sp.sin(2 * t + 1) * (1 + x**2 + y * z + z**2 / 2), kappa=1, b=(1, 1, 1), c=1),
}


def symbolic_forcing(case):
    u, kappa, b, c = case["u"], case["kappa"], case["b"], case["c"]
    lap = sum(sp.diff(u, v, 2) for v in X)
    f = sp.diff(u, t) - kappa * lap + sum(bk * sp.diff(u, v) for bk, v in zip(b, X)) + c * u
    # d^2/dx^2 (x^2 |x|) produces x^2 * DiracDelta(x) terms, which vanish
    return f.replace(sp.DiracDelta, lambda *args: sp.S.Zero)


@pytest.mark.parametrize("name", sorted(SYMBOLIC))
def test_forcing_matches_symbolic_derivation(name):
    case = SYMBOLIC[name]
    problem = get_case(name)
    f_sym = sp.lambdify((t, x, y, z), symbolic_forcing(case), "numpy")
    u_sym = sp.lambdify((t, x, y, z), case["u"], "numpy")
    rng = np.random.default_rng(7)
    # avoid x = 0 exactly, where |x| is not differentiable twice symbolically
    pts = [rng.uniform(0, 1, 300)] + [rng.uniform(-1, 1, 300) for _ in range(3)]
    scale = np.abs(f_sym(*pts)).max()
    np.testing.assert_allclose(problem.f(*pts), f_sym(*pts), atol=1e-12 * scale)
    np.testing.assert_allclose(problem.exact(*pts), u_sym(*pts), atol=1e-14)
    np.testing.assert_allclose(problem.g(*pts), u_sym(*pts), atol=1e-14)
    np.testing.assert_allclose(problem.h(*pts[1:]), u_sym(0 * pts[0], *pts[1:]), atol=1e-14)


def test_kink_forcing_on_both_sides():
    # With y = z = 0 the sine product vanishes and u = x^2 |x|:
    # f = -6|x| + 3 x |x| + x^2 |x|.
    p = problems.test3()
    xs = np.array([-0.5, 0.0, 0.5])
    zero = np.zeros(3)
    expected = -6 * np.abs(xs) + 3 * xs * np.abs(xs) + xs**2 * np.abs(xs)
    np.testing.assert_allclose(p.f(zero, xs, zero, zero), expected, atol=1e-15)


def test_coefficients_of_cases():
    assert problems.test1().is_constant("kappa") and problems.test1().is_constant("c")
    p2 = problems.test2()
    assert not p2.is_constant("kappa")
    assert p2.kappa(np.array(1.0), 0.3, 0.1, 0.2) == pytest.approx(np.exp(-1.0))
    assert p2.b[1](0.0, 0.0, 0.25, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_problem_validation():
    with pytest.raises(ValueError):
        CdrProblem(domain=((0, 1),), T=0.0)
    with pytest.raises(ValueError):
        CdrProblem(domain=((0, 1), (0, 1)), T=1.0, b=(1.0,))
    with pytest.raises(ValueError):
        CdrProblem(domain=((1, 0),), T=1.0)
    with pytest.raises(ValueError):
        get_case("test9")


def test_constant_broadcasts():
    c = constant(2.5)
    assert c(np.zeros((2, 3)), 1.0).shape == (2, 3)
    assert c.constant_value == 2.5


def test_domain_override():
    p = problems.smooth_time_case(domain=((0, 2),) * 3, T=0.5)
    assert p.domain == ((0.0, 2.0),) * 3 and p.T == 0.5
