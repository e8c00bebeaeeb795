"""Empirical checks of the convergence hypotheses and observed-order regressions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .bounds import rk4_lipschitz_M, substep_c3
from .integrators import (
    FORWARD_EULER,
    CoarseMethod,
    coarse_propagate,
    fine_propagate,
    rk4_increment,
    serial_coarse_solve,
    serial_fine_solve,
)
from .ode_model import Mesh, OdeProblem, grid_sup_error, sup_norm
from .parareal import PararealConfig, PararealRun, parallel_map, parareal_init, parareal_run

DEFAULT_SEED = 42


@dataclass(frozen=True)
class OrderFit:
    """Least-squares fit of ``log(error) = slope * log(h) + intercept``.

    ``h_values``/``errors`` hold the points used in the fit; ``excluded``
    lists the ``h`` values dropped because their error was exactly zero.
    """

    h_values: np.ndarray
    errors: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    excluded: tuple = ()


def fit_order(h_values: Sequence[float], errors: Sequence[float]) -> OrderFit:
    h = np.asarray(h_values, dtype=np.float64)
    e = np.asarray(errors, dtype=np.float64)
    if h.shape != e.shape or h.ndim != 1:
        raise ValueError(f"h_values and errors must be matching 1-D sequences, got {h.shape}, {e.shape}")
    if np.any(h <= 0) or np.any(np.diff(h) >= 0):
        raise ValueError("h_values must be positive and strictly decreasing")
    if np.any(e < 0) or not np.all(np.isfinite(e)):
        raise ValueError("errors must be finite and non-negative")
    keep = e > 0
    excluded = tuple(float(x) for x in h[~keep])
    h, e = h[keep], e[keep]
    if h.size < 3:
        raise ValueError(f"need at least 3 nonzero errors for an order fit, got {h.size}")

    x, y = np.log(h), np.log(e)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return OrderFit(h, e, float(slope), float(intercept), min(max(r2, 0.0), 1.0), excluded)


def mesh_for_step(problem: OdeProblem, h: float, m: int = 1) -> Mesh:
    """Uniform mesh on the problem horizon whose step is ``h``."""
    N = int(round(problem.horizon / h))
    if N < 1 or not math.isclose(N * h, problem.horizon, rel_tol=1e-12):
        raise ValueError(f"h={h} does not divide the horizon {problem.horizon}")
    return Mesh.for_problem(problem, N, m)


# -- defect (condition 2) ------------------------------------------------------


@dataclass(frozen=True)
class DefectMeasurement:
    defects: np.ndarray
    h: float
    alpha: float

    @property
    def max_defect(self) -> float:
        return float(self.defects.max()) if self.defects.size else 0.0

    @property
    def c2(self) -> float:
        """Smallest ``c2`` with ``defect <= h**(1+alpha) c2`` on the sampled states."""
        return self.max_defect / self.h ** (1.0 + self.alpha)


def _defect_norm(problem, mesh, n, u, coarse):
    return sup_norm(fine_propagate(problem, mesh, n, u) - coarse_propagate(problem, mesh, n, u, coarse))


def measure_defect(problem: OdeProblem, mesh: Mesh, coarse: CoarseMethod = FORWARD_EULER,
                   alpha: float = 1.0, states: Optional[Sequence] = None,
                   workers: int = 1) -> DefectMeasurement:
    """``||F_n(u) - C_n(u)||`` per interval at ``u = states[n-1]``.

    ``states`` defaults to the coarse sweep from ``x0``.
    """
    if states is None:
        states = parareal_init(problem, mesh, coarse)
    defects = parallel_map(lambda n: _defect_norm(problem, mesh, n, states[n - 1], coarse),
                           range(1, mesh.N + 1), workers)
    return DefectMeasurement(np.array(defects), mesh.h, alpha)


def calibrate_c2(problem: OdeProblem, mesh: Mesh, run: PararealRun,
                 coarse: CoarseMethod = FORWARD_EULER, alpha: float = 1.0,
                 workers: int = 1) -> float:
    """Calibrated ``c2`` over every state a run visits (all iterate rows and the reference)."""
    rows = list(run.iterates) + [run.reference]
    best = 0.0
    for row in rows:
        best = max(best, measure_defect(problem, mesh, coarse, alpha, row, workers).c2)
    return best


def defect_order_study(problem: OdeProblem, coarse: CoarseMethod, h_grid: Sequence[float],
                       m: int = 1, workers: int = 1) -> OrderFit:
    """Max defect along the coarse trajectory per ``h``; expected slope about 2."""
    if len(h_grid) < 4:
        raise ValueError("defect order study needs at least 4 step sizes")
    for h in h_grid:
        if h * problem.lipschitz_L >= 1.0:
            raise ValueError(f"h*L must be < 1, got h={h}")
    maxima = parallel_map(
        lambda h: measure_defect(problem, mesh_for_step(problem, h, m), coarse).max_defect,
        h_grid, workers)
    return fit_order(h_grid, maxima)


# -- global error and h-refinement -------------------------------------------


def global_error(problem: OdeProblem, mesh: Mesh, method: Union[str, CoarseMethod] = "rk4") -> float:
    """Grid max-norm error of a serial solve against ``problem.exact``."""
    if problem.exact is None:
        raise ValueError(f"problem {problem.name!r} has no exact solution")
    if method == "rk4":
        sol = serial_fine_solve(problem, mesh)
    elif isinstance(method, CoarseMethod):
        sol = serial_coarse_solve(problem, mesh, method)
    else:
        raise ValueError(f"unknown method {method!r}")
    exact = [problem.exact(t) for t in mesh.nodes()]
    return grid_sup_error(sol, exact)


def global_error_study(problem: OdeProblem, h_grid: Sequence[float],
                       method: Union[str, CoarseMethod] = "rk4", m: int = 1,
                       workers: int = 1) -> OrderFit:
    errs = parallel_map(lambda h: global_error(problem, mesh_for_step(problem, h, m), method),
                        h_grid, workers)
    return fit_order(h_grid, errs)


def refinement_study(problem: OdeProblem, coarse: CoarseMethod, h_grid: Sequence[float],
                     m: int = 4, k: int = 2, workers: int = 1) -> OrderFit:
    """Sup error of parareal iteration ``k`` against the fine solution, per ``h``."""
    def sup_err(h):
        mesh = mesh_for_step(problem, h, m)
        run = parareal_run(problem, mesh, PararealConfig(coarse, k), workers)
        return float(run.sup_errors[k])

    return fit_order(h_grid, [sup_err(h) for h in h_grid])


# -- leading defect coefficient ---------------------------------------------


def phi1_reference(problem: OdeProblem, t: float, u) -> np.ndarray:
    """``(f f_x + f_t) / 2`` at ``(t, u)`` by central differences.

    The Jacobian enters only through the directional derivative along ``f``.
    """
    u = np.asarray(u, dtype=np.float64)
    f0 = problem.f(t, u)
    dx = 1e-6 * (1.0 + sup_norm(u))
    jf = (problem.f(t, u + dx * f0) - problem.f(t, u - dx * f0)) / (2 * dx)
    dt = 1e-6 * (1.0 + abs(t))
    ft = (problem.f(t + dt, u) - problem.f(t - dt, u)) / (2 * dt)
    return 0.5 * (jf + ft)


@dataclass(frozen=True)
class Phi1Report:
    h_values: np.ndarray
    quotients: np.ndarray
    deviations: np.ndarray
    phi1: np.ndarray
    fit: Optional[OrderFit]

    @property
    def limit(self) -> np.ndarray:
        """``(F4 - f)/h`` at the smallest step."""
        return self.quotients[-1]


def phi1_convergence_check(problem: OdeProblem, t: float, u, h_grid: Sequence[float],
                           phi1=None) -> Phi1Report:
    """Deviation of ``(F4(h) - f)/h`` from ``phi1`` over ``h_grid``; expected order 1."""
    u = np.asarray(u, dtype=np.float64)
    target = phi1_reference(problem, t, u) if phi1 is None else np.atleast_1d(
        np.asarray(phi1, dtype=np.float64))
    f0 = problem.f(t, u)
    quotients = np.array([(rk4_increment(problem, t, u, h) - f0) / h for h in h_grid])
    deviations = np.array([sup_norm(q - target) for q in quotients])
    try:
        fit = fit_order(h_grid, deviations)
    except ValueError:
        fit = None
    return Phi1Report(np.asarray(h_grid, dtype=np.float64), quotients, deviations, target, fit)


# -- Lipschitz conditions 1 and 3 --------------------------------------------


@dataclass(frozen=True)
class LipschitzReport:
    """Sampled Lipschitz ratios of the coarse map (condition 1) and of ``F - C`` (condition 3).

    ``cond3_bound`` is ``None`` where no proven constant applies; then
    ``cond3_passed`` is ``None`` too and the ratio is informational.
    """

    seed: int
    sample_count: int
    cond1_max: float
    cond1_min: float
    cond1_bound: float
    cond1_passed: bool
    cond3_max: float
    cond3_min: float
    cond3_bound: Optional[float]
    cond3_passed: Optional[bool]
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.cond1_passed and self.cond3_passed is not False


def condition1_bound(problem: OdeProblem, h: float, coarse: CoarseMethod) -> float:
    L = problem.lipschitz_L
    if not coarse.is_implicit:
        return 1.0 + h * L
    if h <= 1.0 / (2.0 * L):
        return 1.0 + 2.0 * h * L
    return 1.0 / (1.0 - h * L)


def condition3_bound(problem: OdeProblem, mesh: Mesh, coarse: CoarseMethod) -> Optional[float]:
    if coarse.is_implicit:
        return None
    L, h, m = problem.lipschitz_L, mesh.h, mesh.fine_substeps
    if m == 1:
        return L + rk4_lipschitz_M(L, h)
    if problem.autonomous:
        return substep_c3(L, h, m)[0]
    return None


def lipschitz_condition_check(problem: OdeProblem, mesh: Mesh,
                              coarse: CoarseMethod = FORWARD_EULER, sample_count: int = 1000,
                              seed: int = DEFAULT_SEED, rtol: float = 1e-10,
                              workers: int = 1) -> LipschitzReport:
    """Sample pairs in a max-norm tube of radius 1 around the coarse trajectory."""
    if coarse.is_implicit:
        # tighter solves so the ratios are not polluted by the fixed-point residual
        coarse = CoarseMethod.backward_euler(min(coarse.fp_tolerance, 1e-14), max(coarse.fp_max_iters, 200))
    rng = np.random.default_rng(seed)
    centers = parareal_init(problem, mesh, coarse)
    d = problem.dim
    samples = []
    for _ in range(sample_count):
        n = int(rng.integers(1, mesh.N + 1))
        u1 = centers[n - 1] + rng.uniform(-1.0, 1.0, d)
        u2 = centers[n - 1] + rng.uniform(-1.0, 1.0, d)
        samples.append((n, u1, u2))

    h = mesh.h

    def ratios(sample):
        n, u1, u2 = sample
        du = sup_norm(u1 - u2)
        if du == 0.0:
            return 0.0, 0.0
        c1 = coarse_propagate(problem, mesh, n, u1, coarse)
        c2 = coarse_propagate(problem, mesh, n, u2, coarse)
        g1 = fine_propagate(problem, mesh, n, u1) - c1
        g2 = fine_propagate(problem, mesh, n, u2) - c2
        return sup_norm(c1 - c2) / du, sup_norm(g1 - g2) / (h * du)

    r = np.array(parallel_map(ratios, samples, workers))
    b1 = condition1_bound(problem, h, coarse)
    b3 = condition3_bound(problem, mesh, coarse)
    violations = []
    ok1 = r[:, 0] <= b1 * (1 + rtol)
    for i in np.flatnonzero(~ok1):
        violations.append(("condition-1", samples[i][0], float(r[i, 0])))
    ok3 = None
    if b3 is not None:
        mask = r[:, 1] <= b3 * (1 + rtol)
        ok3 = bool(mask.all())
        for i in np.flatnonzero(~mask):
            violations.append(("condition-3", samples[i][0], float(r[i, 1])))
    return LipschitzReport(
        seed=seed,
        sample_count=len(r),
        cond1_max=float(r[:, 0].max()),
        cond1_min=float(r[:, 0].min()),
        cond1_bound=b1,
        cond1_passed=bool(ok1.all()),
        cond3_max=float(r[:, 1].max()),
        cond3_min=float(r[:, 1].min()),
        cond3_bound=b3,
        cond3_passed=ok3,
        violations=violations,
    )
