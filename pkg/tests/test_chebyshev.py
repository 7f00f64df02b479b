import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ttcdr.chebyshev import barycentric_weights, cgl_nodes, diff_matrix, interpolation_matrix, second_diff_matrix


def test_nodes_match_cosine_formula():
    for N in (1, 2, 5, 16):
        g = cgl_nodes(N)
        k = np.arange(N + 1)
        np.testing.assert_allclose(g.nodes, -np.cos(k * np.pi / N), atol=1e-15)
        assert g.size == N + 1
        np.testing.assert_array_equal(g.interior, np.arange(1, N))


def test_nodes_on_interval_are_ascending_and_symmetric():
    g = cgl_nodes(7, (0.0, 2.0))
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 2.0
    assert np.all(np.diff(g.nodes) > 0)
    np.testing.assert_allclose(g.nodes + g.nodes[::-1], 2.0, atol=1e-15)


def test_degree_one_matrix():
    D = diff_matrix(cgl_nodes(1)).matrix
    np.testing.assert_allclose(D, [[-0.5, 0.5], [-0.5, 0.5]])


def test_known_degree_two_matrix():
    # Nodes -1, 0, 1: derivative of the quadratic interpolant.
    D = diff_matrix(cgl_nodes(2)).matrix
    expected = np.array([[-1.5, 2.0, -0.5], [-0.5, 0.0, 0.5], [0.5, -2.0, 1.5]])
    np.testing.assert_allclose(D, expected, atol=1e-14)


@given(st.integers(1, 24), st.floats(-3, 3), st.floats(0.1, 5))
def test_rows_sum_to_zero(N, a, length):
    D = diff_matrix(cgl_nodes(N, (a, a + length))).matrix
    np.testing.assert_allclose(D.sum(axis=1), 0.0, atol=1e-10 * N**2 / length)


@pytest.mark.parametrize("interval", [(-1.0, 1.0), (0.0, 1.0), (-3.0, 7.0)])
def test_exact_on_polynomials(interval):
    N = 8
    g = cgl_nodes(N, interval)
    x = g.nodes
    D = diff_matrix(g)
    D2 = second_diff_matrix(D)
    for p in range(N + 1):
        np.testing.assert_allclose(D @ x**p, p * x ** max(p - 1, 0) * (p > 0), atol=1e-9 * max(1, np.abs(x).max()) ** p)
        if p >= 2:
            np.testing.assert_allclose(D2 @ x**p, p * (p - 1) * x ** (p - 2), rtol=1e-8, atol=1e-8 * np.abs(x).max() ** p)


def test_spectral_accuracy_for_smooth_function():
    g = cgl_nodes(24)
    D = diff_matrix(g).matrix
    err = np.abs(D @ np.sin(np.pi * g.nodes) - np.pi * np.cos(np.pi * g.nodes)).max()
    assert err < 1e-10


def test_second_diff_requires_first_order():
    S = diff_matrix(cgl_nodes(4))
    with pytest.raises(ValueError):
        second_diff_matrix(second_diff_matrix(S))


def test_barycentric_weights_alternate():
    w = barycentric_weights(cgl_nodes(4))
    np.testing.assert_allclose(w, [0.5, -1, 1, -1, 0.5])


def test_interpolation_reproduces_polynomials_and_nodes():
    g = cgl_nodes(6, (0.0, 3.0))
    pts = np.array([0.0, 0.3, 1.7, 3.0, g.nodes[2]])
    L = interpolation_matrix(g, pts)
    f = lambda x: 1 + x - 2 * x**3 + x**6
    np.testing.assert_allclose(L @ f(g.nodes), f(pts), rtol=1e-12, atol=1e-10)
    np.testing.assert_allclose(L[-1], np.eye(7)[2])


@pytest.mark.parametrize("bad", [0, -1, 2.5, True])
def test_rejects_bad_degree(bad):
    with pytest.raises(ValueError):
        cgl_nodes(bad)


def test_rejects_bad_interval():
    with pytest.raises(ValueError):
        cgl_nodes(4, (1.0, 1.0))
