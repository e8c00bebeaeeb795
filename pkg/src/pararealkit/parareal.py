"""The parareal iteration with a parallel defect sweep.

Each iteration evaluates the fine-minus-coarse defects of the previous row
concurrently, then runs the cheap sequential coarse correction. The update is
applied at every node ``n >= 1``; agreement with the serial fine solution on
already-converged nodes is checked by the tests rather than imposed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, TypeVar

import numpy as np

from .exceptions import ContractionError
from .integrators import (
    FORWARD_EULER,
    CoarseMethod,
    coarse_propagate,
    fine_propagate,
    serial_fine_solve,
)
from .ode_model import Mesh, OdeProblem, grid_sup_error, sup_norm

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> list[R]:
    """Ordered map over ``items``; results never depend on ``workers``."""
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    items = list(items)
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class PararealConfig:
    coarse: CoarseMethod = FORWARD_EULER
    max_iterations: int = 5
    stop_tolerance: Optional[float] = None

    def __post_init__(self):
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 0:
            raise ValueError(f"max_iterations must be a non-negative integer, got {self.max_iterations}")
        if self.stop_tolerance is not None and not self.stop_tolerance > 0:
            raise ValueError(f"stop_tolerance must be positive, got {self.stop_tolerance}")

    def check_against(self, mesh: Mesh):
        if self.max_iterations > mesh.N:
            raise ValueError(f"K exceeds N: K={self.max_iterations}, N={mesh.N}")


@dataclass(frozen=True)
class PararealRun:
    """Result of :func:`parareal_run`.

    ``iterates`` has shape ``(K+1, N+1, d)``, ``errors[k, n]`` is the max-norm
    distance of ``u_n^(k)`` from the serial fine solution ``reference[n]``.
    """

    iterates: np.ndarray
    reference: np.ndarray
    errors: np.ndarray
    sup_errors: np.ndarray
    iterations_performed: int

    def row(self, k: int) -> np.ndarray:
        return self.iterates[k]


def _check_backward_euler(problem: OdeProblem, mesh: Mesh, coarse: CoarseMethod):
    if coarse.is_implicit and mesh.h * problem.lipschitz_L >= 1.0:
        raise ContractionError(
            f"contraction violated: h*L = {mesh.h * problem.lipschitz_L:g} >= 1"
        )


def parareal_init(problem: OdeProblem, mesh: Mesh,
                  coarse: CoarseMethod = FORWARD_EULER) -> list[np.ndarray]:
    """Row ``k = 0``: a sequential coarse sweep from ``x0``."""
    _check_backward_euler(problem, mesh, coarse)
    row = [np.array(problem.x0)]
    for n in range(1, mesh.N + 1):
        row.append(coarse_propagate(problem, mesh, n, row[-1], coarse))
    return row


def defect_sweep(problem: OdeProblem, mesh: Mesh, row: Sequence,
                 coarse: CoarseMethod = FORWARD_EULER, workers: int = 1) -> list[np.ndarray]:
    """Defects ``F_n(row[n-1]) - C_n(row[n-1])`` for ``n = 1..N``, in order."""
    if len(row) != mesh.N + 1:
        raise ValueError(f"row has {len(row)} entries, expected {mesh.N + 1}")

    def defect(n):
        u = row[n - 1]
        return fine_propagate(problem, mesh, n, u) - coarse_propagate(problem, mesh, n, u, coarse)

    return parallel_map(defect, range(1, mesh.N + 1), workers)


def parareal_iterate(problem: OdeProblem, mesh: Mesh, prev_row: Sequence,
                     coarse: CoarseMethod = FORWARD_EULER, workers: int = 1) -> list[np.ndarray]:
    """One parareal correction: ``u_n = C_n(u_{n-1}) + xi_n`` with defects from ``prev_row``."""
    xi = defect_sweep(problem, mesh, prev_row, coarse, workers)
    row = [np.array(prev_row[0])]
    for n in range(1, mesh.N + 1):
        row.append(coarse_propagate(problem, mesh, n, row[-1], coarse) + xi[n - 1])
    return row


def parareal_run(problem: OdeProblem, mesh: Mesh, cfg: PararealConfig = PararealConfig(),
                 workers: int = 1) -> PararealRun:
    """Initialization plus up to ``cfg.max_iterations`` corrections, with error history."""
    cfg.check_against(mesh)
    rows = [parareal_init(problem, mesh, cfg.coarse)]
    for _ in range(cfg.max_iterations):
        rows.append(parareal_iterate(problem, mesh, rows[-1], cfg.coarse, workers))
        if cfg.stop_tolerance is not None:
            if grid_sup_error(rows[-1], rows[-2]) <= cfg.stop_tolerance:
                break

    reference = np.array(serial_fine_solve(problem, mesh))
    iterates = np.array(rows)
    errors = np.array([[sup_norm(u - r) for u, r in zip(row, reference)] for row in iterates])
    for arr in (iterates, reference, errors):
        arr.setflags(write=False)
    sup_errors = errors.max(axis=1)
    sup_errors.setflags(write=False)
    return PararealRun(
        iterates=iterates,
        reference=reference,
        errors=errors,
        sup_errors=sup_errors,
        iterations_performed=len(rows) - 1,
    )
