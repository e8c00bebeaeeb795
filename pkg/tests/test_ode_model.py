import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from pararealkit import Mesh, NonFiniteStateError, OdeProblem, builtin_problem, grid_sup_error, sup_norm
from pararealkit.ode_model import CATALOG_NAMES, as_state


@pytest.mark.parametrize("x, expected", [
    ((0.0, 0.0, 0.0), 0.0),
    ((-3.0, 2.0), 3.0),
    ((1.5,), 1.5),
])
def test_sup_norm(x, expected):
    assert sup_norm(np.array(x)) == expected


def test_sup_norm_rejects_non_finite():
    with pytest.raises(NonFiniteStateError, match="non-finite state"):
        sup_norm(np.array([1.0, np.nan]))
    with pytest.raises(NonFiniteStateError):
        as_state([np.inf])


finite = st.floats(-1e6, 1e6, allow_nan=False)
vec3 = arrays(np.float64, 3, elements=finite)


@given(vec3, vec3, finite)
def test_sup_norm_is_a_norm(x, y, c):
    assert sup_norm(x + y) <= (sup_norm(x) + sup_norm(y)) * (1 + 1e-15)
    assert sup_norm(c * x) == pytest.approx(abs(c) * sup_norm(x), rel=1e-15, abs=0)
    assert (sup_norm(x) == 0) == (not np.any(x))


def test_grid_sup_error():
    a = [np.array([1.0]), np.array([2.0])]
    assert grid_sup_error(a, a) == 0.0
    assert grid_sup_error(a, [np.array([1.0]), np.array([2.5])]) == 0.5
    assert grid_sup_error([np.array([0.0, 0.0]), np.array([1.0, 0.0])],
                          [np.array([0.0, 1.0]), np.array([1.0, 2.0])]) == 2.0
    with pytest.raises(ValueError, match="length"):
        grid_sup_error(a, a[:1])


def test_catalog_rhs_values():
    assert builtin_problem("zero-rhs").f(0.3, np.array([1.0])).tolist() == [0.0]
    assert builtin_problem("linear-scalar").f(0.0, np.array([2.0])).tolist() == [2.0]
    assert builtin_problem("nonautonomous").f(math.pi / 2, np.array([0.0])).tolist() == [1.0]


def test_unknown_problem_lists_catalog():
    with pytest.raises(KeyError) as exc:
        builtin_problem("lorenz")
    for name in CATALOG_NAMES:
        assert name in str(exc.value)


@pytest.mark.parametrize("name", ["linear-scalar", "linear-decay", "nonautonomous"])
def test_exact_solutions_satisfy_ode(name):
    p = builtin_problem(name)
    assert np.allclose(p.exact(p.t0), p.x0, atol=1e-15)
    eps = 1e-6
    for t in (0.1, 0.5, 0.9):
        deriv = (p.exact(t + eps) - p.exact(t - eps)) / (2 * eps)
        assert np.allclose(deriv, p.f(t, p.exact(t)), atol=1e-8)


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_lipschitz_witness(name):
    p = builtin_problem(name)
    rng = np.random.default_rng(0)
    for _ in range(100):
        t = rng.uniform(p.t0, p.T)
        x = rng.uniform(-5, 5, p.dim)
        y = x + rng.uniform(-1, 1, p.dim)
        lhs = sup_norm(p.f(t, x) - p.f(t, y))
        assert lhs <= p.lipschitz_L * sup_norm(x - y) * (1 + 1e-12)


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_rhs_is_deterministic(name):
    p = builtin_problem(name)
    x = np.array([0.37])
    first = p.f(0.2, x)
    for _ in range(5):
        assert np.array_equal(p.f(0.2, x), first)


def test_problem_validation():
    rhs = lambda t, x: x
    with pytest.raises(ValueError, match="T > t0"):
        OdeProblem(rhs, 1.0, 0.0, [1.0], 1.0)
    with pytest.raises(ValueError, match="lipschitz_L"):
        OdeProblem(rhs, 0.0, 1.0, [1.0], 0.0)
    with pytest.raises(ValueError, match="shape"):
        OdeProblem(lambda t, x: np.zeros(2), 0.0, 1.0, [1.0], 1.0)
    with pytest.raises(ValueError, match="autonomous"):
        OdeProblem(lambda t, x: x + t, 0.0, 1.0, [1.0], 1.0, autonomous=True)


def test_problem_x0_is_read_only(linear):
    with pytest.raises(ValueError):
        linear.x0[0] = 3.0


def test_mesh_geometry():
    mesh = Mesh(0.0, 1.0, 10, 4)
    assert mesh.h == 0.1
    assert abs(mesh.h - mesh.fine_substeps * mesh.tau) <= math.ulp(mesh.h)
    nodes = mesh.nodes()
    assert np.all(np.diff(nodes) > 0)
    assert abs(mesh.node(10) - 1.0) <= 4 * math.ulp(1.0)
    for n in range(1, 11):
        assert abs(mesh.subnode(n, 4) - mesh.node(n)) <= 4 * math.ulp(mesh.node(n))


@pytest.mark.parametrize("t0, T, N, m", [(0.0, 1.0, 7, 3), (-2.0, 3.5, 33, 5), (1.0, 2.0, 256, 1)])
def test_mesh_end_node(t0, T, N, m):
    mesh = Mesh(t0, T, N, m)
    assert abs(mesh.node(N) - T) <= 4 * math.ulp(T)
    assert abs(mesh.subnode(N, m) - T) <= 4 * math.ulp(T)


def test_mesh_validation():
    with pytest.raises(ValueError):
        Mesh(0.0, 1.0, 0)
    with pytest.raises(ValueError):
        Mesh(0.0, 1.0, 3, 0)
    with pytest.raises(IndexError):
        Mesh(0.0, 1.0, 3).subnode(0, 0)
