"""Convergence constants, the error majorant and the closed-form parareal bounds.

The majorant ``z[k, n]`` solves

    z[k, 0] = 0
    z[0, n] = b z[0, n-1] + gamma
    z[k, n] = b z[k, n-1] + a z[k-1, n-1]        (k >= 1)

with ``b = 1 + h c1``, ``a = h c3`` and ``gamma = h**(1+alpha) c2``. The
closed form ``gamma a**k b**(n-k-1) C(n, k+1)`` is the coefficient of an
upper bound on the generating function of ``z[k, :]``; it coincides with
``z`` exactly when ``b == 1`` and dominates it otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np


class Recurrence(NamedTuple):
    """Bare recurrence coefficients, for exercising the majorant directly."""

    a: float
    b: float
    gamma: float


def _positive(name, value, allow_zero=False):
    if value is None:
        return
    ok = value >= 0 if allow_zero else value > 0
    if not (ok and math.isfinite(value)):
        kind = "non-negative" if allow_zero else "positive"
        raise ValueError(f"{name} must be finite and {kind}, got {value}")


@dataclass(frozen=True)
class BoundConstants:
    """Every constant entering the two convergence theorems.

    ``c3`` is absent for the backward Euler setting, which only needs the
    two-condition theorem. ``c2`` may be zero (e.g. a zero right-hand side has
    no defect); all other present constants must be positive.
    """

    alpha: float
    c1: float
    c2: float
    h: float
    horizon: float
    c3: Optional[float] = None
    M: Optional[float] = None
    c_tilde2: Optional[float] = None
    c_tilde3: Optional[float] = None
    lambda_cap: Optional[float] = None
    lambda_tilde: Optional[float] = None
    c4: Optional[float] = None
    c5: Optional[float] = None
    c6: Optional[float] = None

    def __post_init__(self):
        for name in ("alpha", "c1", "h", "horizon", "c3", "M", "c_tilde2", "c_tilde3",
                     "lambda_cap", "lambda_tilde", "c4", "c5", "c6"):
            _positive(name, getattr(self, name))
        _positive("c2", self.c2, allow_zero=True)

    @property
    def b(self) -> float:
        return 1.0 + self.h * self.c1

    @property
    def a(self) -> float:
        if self.c3 is None:
            raise ValueError("c3 is not set; the three-condition bound is unavailable")
        return self.h * self.c3

    @property
    def gamma(self) -> float:
        return self.h ** (1.0 + self.alpha) * self.c2

    @property
    def recurrence(self) -> Recurrence:
        return Recurrence(self.a, self.b, self.gamma)


def rk4_lipschitz_M(L: float, h: float) -> float:
    """Lipschitz constant of the RK4 increment: ``L (1 + hL/2 + (hL)^2/6 + (hL)^3/24)``."""
    hl = h * L
    return L * (1.0 + hl / 2.0 + hl * hl / 6.0 + hl * hl * hl / 24.0)


def substep_c3(L: float, h: float, m: int) -> tuple[float, float]:
    """``(c3_tilde, c6)`` for ``m`` RK4 substeps of width ``h/m``.

    ``c6 = (exp(h M_tau) - 1) / h`` where ``M_tau`` is the increment constant at
    width ``tau``; it bounds ``((1 + tau M_tau)**m - 1) / h``.
    """
    m_tau = rk4_lipschitz_M(L, h / m)
    c6 = math.expm1(h * m_tau) / h
    return c6 + L, c6


def lambda_tilde(L: float, h: float, m: int, lambda_cap: float, c4: float, c5: float) -> float:
    """Defect constant for ``m`` substeps: ``lambda_cap/m + L c4 h^3/m^4 + L c5``."""
    return lambda_cap / m + L * c4 * h ** 3 / m ** 4 + L * c5


def forward_euler_constants(L: float, h: float, c2: float, alpha: float = 1.0,
                            horizon: float = 1.0) -> BoundConstants:
    """Constants for forward Euler coarse / single-step RK4 fine: ``c1 = L``, ``c3 = L + M``."""
    M = rk4_lipschitz_M(L, h)
    assert M >= L
    return BoundConstants(alpha=alpha, c1=L, c2=c2, c3=L + M, M=M, h=h, horizon=horizon)


def backward_euler_constants(L: float, h: float, c_tilde2: float, alpha: float = 1.0,
                             horizon: float = 1.0) -> BoundConstants:
    """Constants for backward Euler coarse: ``c1 = 2L``, valid for ``h <= 1/(2L)``."""
    if h > 1.0 / (2.0 * L):
        raise ValueError(
            f"step too large for backward-Euler constant: h={h} > 1/(2L)={1.0 / (2.0 * L)}"
        )
    return BoundConstants(alpha=alpha, c1=2.0 * L, c2=c_tilde2, c_tilde2=c_tilde2,
                          M=rk4_lipschitz_M(L, h), h=h, horizon=horizon)


def z_triangle(constants, N: int, K: int) -> np.ndarray:
    """Majorant ``z[k, n]`` for ``0 <= k <= K``, ``0 <= n <= N`` by direct recursion.

    ``constants`` is anything with ``a``, ``b`` and ``gamma`` attributes.
    """
    if N < 1 or K < 0:
        raise ValueError(f"need N >= 1 and K >= 0, got N={N}, K={K}")
    b, gamma = constants.b, constants.gamma
    a = constants.a if K > 0 else 0.0
    z = np.zeros((K + 1, N + 1))
    for n in range(1, N + 1):
        z[0, n] = b * z[0, n - 1] + gamma
    for k in range(1, K + 1):
        for n in range(1, N + 1):
            z[k, n] = b * z[k, n - 1] + a * z[k - 1, n - 1]
    return z


def z_closed_form(constants, n: int, k: int) -> float:
    """``gamma a**k b**(n-k-1) n(n-1)...(n-k)/(k+1)!``; zero when ``n <= k``."""
    if k < 0 or n < 0:
        raise ValueError(f"need n, k >= 0, got n={n}, k={k}")
    if n <= k:
        return 0.0
    binom = 1.0
    for i in range(k + 1):
        binom *= n - i
    binom /= math.factorial(k + 1)
    a = constants.a if k > 0 else 1.0
    return constants.gamma * a ** k * constants.b ** (n - k - 1) * binom


def theorem1_bound(constants: BoundConstants, k: int) -> float:
    """Uniform bound ``h^alpha c2 c3^k H^(k+1) exp(c1 H) / (k+1)!`` on iteration ``k``."""
    c = constants
    if c.c3 is None:
        raise ValueError("c3 is not set; the three-condition bound is unavailable")
    H = c.horizon
    return (c.h ** c.alpha * c.c2 * c.c3 ** k * H ** (k + 1) * math.exp(c.c1 * H)
            / math.factorial(k + 1))


def theorem2_bound(constants: BoundConstants) -> float:
    """Iteration-independent bound ``2 h^alpha exp(c1 H) c2 / c1``."""
    c = constants
    return 2.0 * c.h ** c.alpha * math.exp(c.horizon * c.c1) * c.c2 / c.c1


@dataclass(frozen=True)
class DominanceReport:
    """Per-entry outcome of the bound chain ``E <= z <= closed form`` and ``sup E <= bound``.

    ``worst_ratio`` is the largest ``E / z`` seen (``inf`` when a positive
    error faces a zero majorant); ``worst_index`` is its ``(k, n)``.
    """

    error_le_z: np.ndarray
    z_le_closed: np.ndarray
    sup_le_bound: np.ndarray
    z: np.ndarray
    closed_form: np.ndarray
    bounds: np.ndarray
    worst_ratio: float
    worst_index: tuple[int, int]
    worst_bound_ratio: float

    @property
    def passed(self) -> bool:
        return bool(self.error_le_z.all() and self.z_le_closed.all() and self.sup_le_bound.all())

    def first_failure(self) -> Optional[tuple[str, tuple]]:
        for name, arr in (("E<=z", self.error_le_z), ("z<=closed", self.z_le_closed),
                          ("sup<=bound", self.sup_le_bound)):
            bad = np.argwhere(~arr)
            if bad.size:
                return name, tuple(int(i) for i in bad[0])
        return None


def _ratio(num, den):
    if num == 0.0:
        return 0.0
    return math.inf if den == 0.0 else num / den


def verify_dominance(run, constants: BoundConstants, rtol: float = 1e-9) -> DominanceReport:
    """Check measured parareal errors against the majorant chain and the final bound."""
    errors = np.asarray(run.errors)
    K, N = errors.shape[0] - 1, errors.shape[1] - 1
    if N < 1:
        raise ValueError("run has no intervals")
    z = z_triangle(constants, N, K)
    if z.shape != errors.shape:
        raise ValueError(f"shape mismatch: errors {errors.shape} vs majorant {z.shape}")
    closed = np.array([[z_closed_form(constants, n, k) for n in range(N + 1)]
                       for k in range(K + 1)])
    bounds = np.array([theorem1_bound(constants, k) for k in range(K + 1)])
    sup = errors.max(axis=1)

    slack = 1.0 + rtol
    error_le_z = errors <= z * slack
    z_le_closed = z <= closed * slack
    sup_le_bound = sup <= bounds * slack

    ratios = np.array([[_ratio(errors[k, n], z[k, n]) for n in range(N + 1)]
                       for k in range(K + 1)])
    idx = np.unravel_index(int(np.argmax(ratios)), ratios.shape)
    bound_ratio = max(_ratio(s, bd) for s, bd in zip(sup, bounds))
    return DominanceReport(
        error_le_z=error_le_z,
        z_le_closed=z_le_closed,
        sup_le_bound=sup_le_bound,
        z=z,
        closed_form=closed,
        bounds=bounds,
        worst_ratio=float(ratios[idx]),
        worst_index=(int(idx[0]), int(idx[1])),
        worst_bound_ratio=float(bound_ratio),
    )


@dataclass(frozen=True)
class Theorem2Report:
    sup_errors: np.ndarray
    bound: float
    passed_per_k: np.ndarray
    worst_ratio: float

    @property
    def passed(self) -> bool:
        return bool(self.passed_per_k.all())


def verify_theorem2(run, constants: BoundConstants, rtol: float = 1e-9) -> Theorem2Report:
    """Check ``sup_n E[k, n] <= theorem2_bound`` at every iteration."""
    sup = np.asarray(run.errors).max(axis=1)
    bound = theorem2_bound(constants)
    return Theorem2Report(
        sup_errors=sup,
        bound=bound,
        passed_per_k=sup <= bound * (1.0 + rtol),
        worst_ratio=float(max(_ratio(s, bound) for s in sup)),
    )
