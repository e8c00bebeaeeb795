"""Coarse (forward/backward Euler) and fine (m-substep classical RK4) propagators."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import ContractionError, FixedPointError, IntegrationError
from .ode_model import Mesh, OdeProblem, sup_norm


class CoarseKind(enum.Enum):
    FORWARD_EULER = "forward-euler"
    BACKWARD_EULER = "backward-euler"


@dataclass(frozen=True)
class CoarseMethod:
    """Coarse propagator choice.

    ``fp_tolerance`` and ``fp_max_iters`` only matter for backward Euler, where
    they control the fixed-point solve of ``z = u + h f(t_next, z)``.
    """

    kind: CoarseKind = CoarseKind.FORWARD_EULER
    fp_tolerance: float = 1e-14
    fp_max_iters: int = 100

    def __post_init__(self):
        object.__setattr__(self, "kind", CoarseKind(self.kind))
        if not self.fp_tolerance > 0:
            raise ValueError(f"fp_tolerance must be positive, got {self.fp_tolerance}")
        if int(self.fp_max_iters) != self.fp_max_iters or self.fp_max_iters < 1:
            raise ValueError(f"fp_max_iters must be a positive integer, got {self.fp_max_iters}")

    @classmethod
    def forward_euler(cls) -> "CoarseMethod":
        return cls(CoarseKind.FORWARD_EULER)

    @classmethod
    def backward_euler(cls, fp_tolerance: float = 1e-14, fp_max_iters: int = 100) -> "CoarseMethod":
        return cls(CoarseKind.BACKWARD_EULER, fp_tolerance, fp_max_iters)

    @property
    def is_implicit(self) -> bool:
        return self.kind is CoarseKind.BACKWARD_EULER


FORWARD_EULER = CoarseMethod.forward_euler()
BACKWARD_EULER = CoarseMethod.backward_euler()


def _finite(x: np.ndarray, what: str = "integration blow-up") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise IntegrationError(what)
    return x


def euler_step(problem: OdeProblem, t: float, u, h: float) -> np.ndarray:
    """One explicit Euler step ``u + h f(t, u)``."""
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    u = np.asarray(u, dtype=np.float64)
    return _finite(u + h * problem.f(t, u))


def backward_euler_step(problem: OdeProblem, t_next: float, u, h: float,
                        cfg: CoarseMethod = BACKWARD_EULER) -> np.ndarray:
    """Solve ``z = u + h f(t_next, z)`` by fixed-point iteration from ``z = u``.

    The iteration contracts with rate ``h*L``; we refuse to start when that is
    not below one.
    """
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    if h * problem.lipschitz_L >= 1.0:
        raise ContractionError(
            f"contraction violated: h*L = {h * problem.lipschitz_L:g} >= 1"
        )
    u = np.asarray(u, dtype=np.float64)
    z = u
    for _ in range(cfg.fp_max_iters):
        z_next = _finite(u + h * problem.f(t_next, z))
        # residual of z: z - (u + h f(t_next, z))
        if sup_norm(z - z_next) <= cfg.fp_tolerance:
            return z
        z = z_next
    if sup_norm(z - _finite(u + h * problem.f(t_next, z))) <= cfg.fp_tolerance:
        return z
    raise FixedPointError(
        f"fixed point did not converge in {cfg.fp_max_iters} iterations"
    )


def rk4_increment(problem: OdeProblem, t: float, u, h: float) -> np.ndarray:
    """Classical RK4 increment ``(k1 + 2 k2 + 2 k3 + k4) / 6``."""
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    u = np.asarray(u, dtype=np.float64)
    k1 = _finite(problem.f(t, u), "non-finite RK stage")
    k2 = _finite(problem.f(t + h / 2, u + (h / 2) * k1), "non-finite RK stage")
    k3 = _finite(problem.f(t + h / 2, u + (h / 2) * k2), "non-finite RK stage")
    k4 = _finite(problem.f(t + h, u + h * k3), "non-finite RK stage")
    return (k1 + 2 * k2 + 2 * k3 + k4) / 6


def rk4_step(problem: OdeProblem, t: float, u, h: float) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    return _finite(u + h * rk4_increment(problem, t, u, h))


def coarse_propagate(problem: OdeProblem, mesh: Mesh, n: int, u,
                     method: CoarseMethod = FORWARD_EULER) -> np.ndarray:
    """Coarse propagator over interval ``n`` (1-based)."""
    if not 1 <= n <= mesh.N:
        raise IndexError(f"interval index {n} outside 1..{mesh.N}")
    if method.kind is CoarseKind.FORWARD_EULER:
        return euler_step(problem, mesh.node(n - 1), u, mesh.h)
    return backward_euler_step(problem, mesh.node(n), u, mesh.h, method)


def fine_propagate(problem: OdeProblem, mesh: Mesh, n: int, u) -> np.ndarray:
    """``m`` RK4 steps of width ``tau`` across interval ``n`` (1-based)."""
    if not 1 <= n <= mesh.N:
        raise IndexError(f"interval index {n} outside 1..{mesh.N}")
    tau = mesh.tau
    x = np.asarray(u, dtype=np.float64)
    for j in range(mesh.fine_substeps):
        x = rk4_step(problem, mesh.subnode(n, j), x, tau)
    return x


def serial_fine_solve(problem: OdeProblem, mesh: Mesh) -> list[np.ndarray]:
    """Reference sequence ``u_0 = x0``, ``u_n = F_n(u_{n-1})``, computed sequentially."""
    out = [np.array(problem.x0)]
    for n in range(1, mesh.N + 1):
        out.append(fine_propagate(problem, mesh, n, out[-1]))
    return out


def serial_coarse_solve(problem: OdeProblem, mesh: Mesh,
                        method: CoarseMethod = FORWARD_EULER) -> list[np.ndarray]:
    out = [np.array(problem.x0)]
    for n in range(1, mesh.N + 1):
        out.append(coarse_propagate(problem, mesh, n, out[-1], method))
    return out
