import pytest

from pararealkit import Mesh, builtin_problem


@pytest.fixture
def linear():
    return builtin_problem("linear-scalar")


@pytest.fixture
def decay():
    return builtin_problem("linear-decay")


@pytest.fixture
def nonauto():
    return builtin_problem("nonautonomous")


@pytest.fixture
def zero():
    return builtin_problem("zero-rhs")


def mesh_of(problem, N, m=1):
    return Mesh.for_problem(problem, N, m)
