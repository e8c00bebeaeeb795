"""Initial value problems, uniform meshes, norms and the built-in problem catalog.

States are 1-D ``float64`` numpy arrays. All error measurements use the max
norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import NonFiniteStateError

Rhs = Callable[[float, np.ndarray], np.ndarray]


def as_state(x) -> np.ndarray:
    """Coerce ``x`` to a finite 1-D float64 state vector."""
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"state must be a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteStateError("non-finite state")
    return arr


def sup_norm(x) -> float:
    """Max norm ``max_i |x_i|``."""
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if not np.all(np.isfinite(arr)):
        raise NonFiniteStateError("non-finite state")
    if arr.size == 0:
        return 0.0
    return float(np.max(np.abs(arr)))


def grid_sup_error(a: Sequence, b: Sequence) -> float:
    """Grid norm of the difference: ``max_n sup_norm(a[n] - b[n])``."""
    if len(a) != len(b):
        raise ValueError(f"sequence length mismatch: {len(a)} != {len(b)}")
    worst = 0.0
    for x, y in zip(a, b):
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        if x.shape != y.shape:
            raise ValueError(f"state dimension mismatch: {x.shape} != {y.shape}")
        worst = max(worst, sup_norm(x - y))
    return worst


@dataclass(frozen=True)
class OdeProblem:
    """``x'(t) = rhs(t, x)`` on ``[t0, T]`` with ``x(t0) = x0``.

    ``lipschitz_L`` is the user-supplied Lipschitz constant of ``rhs`` in its
    state argument (max norm). ``exact`` is an optional closed-form solution
    ``t -> x(t)`` used by the order studies.
    """

    rhs: Rhs
    t0: float
    T: float
    x0: np.ndarray
    lipschitz_L: float
    autonomous: bool = False
    name: str = "custom"
    exact: Optional[Callable[[float], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "lipschitz_L", float(self.lipschitz_L))
        x0 = as_state(self.x0).copy()
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        if not self.T > self.t0:
            raise ValueError(f"need T > t0, got t0={self.t0}, T={self.T}")
        if not (self.lipschitz_L > 0 and math.isfinite(self.lipschitz_L)):
            raise ValueError(f"lipschitz_L must be positive and finite, got {self.lipschitz_L}")
        f0 = self.f(self.t0, x0)
        if f0.shape != x0.shape:
            raise ValueError(f"rhs returns shape {f0.shape}, expected {x0.shape}")
        if self.autonomous:
            self._probe_autonomy(x0)

    @property
    def dim(self) -> int:
        return self.x0.size

    @property
    def horizon(self) -> float:
        return self.T - self.t0

    def f(self, t: float, x: np.ndarray) -> np.ndarray:
        """Evaluate the right-hand side as a float64 vector."""
        return np.atleast_1d(np.asarray(self.rhs(t, x), dtype=np.float64))

    def _probe_autonomy(self, x0):
        probes = (x0, x0 + 0.5, x0 - 1.0)
        times = (self.t0, 0.5 * (self.t0 + self.T), self.T)
        for x in probes:
            ref = self.f(times[0], x)
            for t in times[1:]:
                if not np.array_equal(self.f(t, x), ref):
                    raise ValueError(
                        f"problem {self.name!r} is flagged autonomous but rhs depends on t"
                    )


@dataclass(frozen=True)
class Mesh:
    """Uniform coarse grid ``t_n = t0 + n*h`` with ``m`` fine substeps per interval."""

    t0: float
    T: float
    n_intervals: int
    fine_substeps: int = 1

    def __post_init__(self):
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "T", float(self.T))
        if not self.T > self.t0:
            raise ValueError(f"need T > t0, got t0={self.t0}, T={self.T}")
        if int(self.n_intervals) != self.n_intervals or self.n_intervals < 1:
            raise ValueError(f"n_intervals must be a positive integer, got {self.n_intervals}")
        if int(self.fine_substeps) != self.fine_substeps or self.fine_substeps < 1:
            raise ValueError(f"fine_substeps must be a positive integer, got {self.fine_substeps}")
        object.__setattr__(self, "n_intervals", int(self.n_intervals))
        object.__setattr__(self, "fine_substeps", int(self.fine_substeps))

    @classmethod
    def for_problem(cls, problem: OdeProblem, n_intervals: int, fine_substeps: int = 1) -> "Mesh":
        return cls(problem.t0, problem.T, n_intervals, fine_substeps)

    @property
    def N(self) -> int:
        return self.n_intervals

    @property
    def h(self) -> float:
        return (self.T - self.t0) / self.n_intervals

    @property
    def tau(self) -> float:
        return self.h / self.fine_substeps

    def node(self, n: int) -> float:
        if not 0 <= n <= self.n_intervals:
            raise IndexError(f"node index {n} outside 0..{self.n_intervals}")
        return self.t0 + n * self.h

    def nodes(self) -> np.ndarray:
        return np.array([self.node(n) for n in range(self.n_intervals + 1)])

    def subnode(self, n: int, j: int) -> float:
        """Fine node ``t_{n,j} = t_{n-1} + j*tau`` inside interval ``n`` (1-based)."""
        if not 1 <= n <= self.n_intervals:
            raise IndexError(f"interval index {n} outside 1..{self.n_intervals}")
        if not 0 <= j <= self.fine_substeps:
            raise IndexError(f"substep index {j} outside 0..{self.fine_substeps}")
        return self.node(n - 1) + j * self.tau


# -- built-in catalog -------------------------------------------------------


def _linear_scalar():
    return OdeProblem(
        rhs=lambda t, x: x,
        t0=0.0, T=1.0, x0=[1.0], lipschitz_L=1.0, autonomous=True,
        name="linear-scalar",
        exact=lambda t: np.array([math.exp(t)]),
    )


def _linear_decay():
    return OdeProblem(
        rhs=lambda t, x: -x,
        t0=0.0, T=1.0, x0=[1.0], lipschitz_L=1.0, autonomous=True,
        name="linear-decay",
        exact=lambda t: np.array([math.exp(-t)]),
    )


def _nonautonomous():
    # x' = x + sin t, x(0) = 0  =>  x(t) = (e^t - sin t - cos t) / 2
    return OdeProblem(
        rhs=lambda t, x: x + math.sin(t),
        t0=0.0, T=1.0, x0=[0.0], lipschitz_L=1.0, autonomous=False,
        name="nonautonomous",
        exact=lambda t: np.array([0.5 * (math.exp(t) - math.sin(t) - math.cos(t))]),
    )


def _zero_rhs():
    return OdeProblem(
        rhs=lambda t, x: np.zeros_like(x),
        t0=0.0, T=1.0, x0=[1.0], lipschitz_L=1.0, autonomous=True,
        name="zero-rhs",
        exact=lambda t: np.array([1.0]),
    )


_CATALOG = {
    "linear-scalar": _linear_scalar,
    "linear-decay": _linear_decay,
    "nonautonomous": _nonautonomous,
    "zero-rhs": _zero_rhs,
}

CATALOG_NAMES = tuple(_CATALOG)


def builtin_problem(name: str) -> OdeProblem:
    """Return a catalog problem by name."""
    try:
        factory = _CATALOG[name]
    except KeyError:
        raise KeyError(
            f"unknown problem {name!r}; catalog: {', '.join(CATALOG_NAMES)}"
        ) from None
    return factory()
