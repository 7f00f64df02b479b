import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ttcdr import problems
from ttcdr.estimators import SpaceTimeCdrSolver

from test_reference import polynomial_case


def test_params_round_trip_and_clone():
    est = SpaceTimeCdrSolver(N=6, method="sp-sp-full", tt_tol=1e-10)
    params = est.get_params()
    assert params["N"] == 6 and params["method"] == "sp-sp-full"
    other = clone(est).set_params(N=4)
    assert other.N == 4 and est.N == 6


def test_not_fitted():
    est = SpaceTimeCdrSolver()
    with pytest.raises(NotFittedError):
        est.predict(np.zeros((1, 4)))
    with pytest.raises(NotFittedError):
        est.error()


def test_rejects_bad_input():
    with pytest.raises(TypeError):
        SpaceTimeCdrSolver().fit(np.zeros((3, 4)))
    with pytest.raises(ValueError):
        SpaceTimeCdrSolver(method="spectral").fit(problems.test1())


@pytest.mark.parametrize("method", ["sp-sp-full", "sp-sp-tt"])
def test_predict_reproduces_polynomial(method, rng):
    p = polynomial_case()
    est = SpaceTimeCdrSolver(N=4, method=method).fit(p)
    assert est.error() <= 1e-9
    assert est.values_.shape == tuple(est.grid_.full_dims)
    X = np.column_stack([rng.uniform(0, 1, 50)] + [rng.uniform(-1, 1, 50) for _ in range(3)])
    np.testing.assert_allclose(est.predict(X), p.exact(*X.T), atol=1e-9)
    if method == "sp-sp-tt":
        assert est.solution_tt_ is not None
        np.testing.assert_allclose(est.solution_tt_.full(), est.solution_, atol=0)
    with pytest.raises(ValueError):
        est.predict(X[:, :3])


def test_backward_euler_predict_at_nodes():
    p = problems.smooth_time_case()
    est = SpaceTimeCdrSolver(N=4, method="fd-fd-full").fit(p)
    g = est.grid_
    tt, xx, yy, zz = np.meshgrid(g.t_nodes, *[s.nodes for s in g.space], indexing="ij")
    X = np.column_stack([a.ravel() for a in (tt, xx, yy, zz)])
    np.testing.assert_allclose(est.predict(X), est.values_.ravel(), atol=1e-12)
    # linear in time between steps
    mid = X.copy()
    mid[:, 0] = 0.5 * (g.t_nodes[0] + g.t_nodes[1])
    sel = tt.ravel() == g.t_nodes[0]
    v0 = est.values_[0].ravel()
    v1 = est.values_[1].ravel()
    np.testing.assert_allclose(est.predict(mid[sel]), 0.5 * (v0 + v1), atol=1e-12)
