"""Acceptance criteria. Each test prints one ``ACCEPTANCE <id> PASS|FAIL`` line.

Run with ``pytest tests/test_acceptance.py -s`` (or ``-rA``) to see the lines.
"""

import itertools

import numpy as np
import pytest

from pararealkit import (
    BACKWARD_EULER,
    FORWARD_EULER,
    Mesh,
    PararealConfig,
    builtin_problem,
    parareal_run,
)
from pararealkit.analysis import (
    calibrate_c2,
    defect_order_study,
    global_error_study,
    lipschitz_condition_check,
    phi1_convergence_check,
    refinement_study,
)
from pararealkit.bounds import (
    Recurrence,
    backward_euler_constants,
    forward_euler_constants,
    rk4_lipschitz_M,
    verify_dominance,
    verify_theorem2,
    z_closed_form,
    z_triangle,
)
from pararealkit.cli import main
from pararealkit.ode_model import sup_norm

H_GRID = [2.0 ** -i for i in range(3, 9)]
RK4_GRID = [2.0 ** -i for i in range(3, 8)]
LIPSCHITZ_PROBLEMS = ["linear-scalar", "linear-decay", "nonautonomous"]


def verdict(capsys, crit, ok, detail):
    with capsys.disabled():
        print(f"\nACCEPTANCE {crit} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {crit}: {detail}"


def linear_run(coarse=FORWARD_EULER, m=4, K=5, workers=1):
    p = builtin_problem("linear-scalar")
    mesh = Mesh.for_problem(p, 10, m)
    return p, mesh, parareal_run(p, mesh, PararealConfig(coarse, K), workers)


def test_c1_exactness_ladder(capsys):
    _, _, run = linear_run(K=10)
    ref = run.reference
    ladder = max(run.errors[k, n] / (1 + sup_norm(ref[n])) for k in range(11) for n in range(k + 1))
    final = run.sup_errors[10] / (1 + max(sup_norm(u) for u in ref))
    verdict(capsys, "1", ladder <= 1e-12 and final <= 1e-12,
            f"max rel E_n^(k) (n<=k) = {ladder:.2e}, K=N grid rel error = {final:.2e} (tol 1e-12)")


def test_c2_defect_order_forward_euler(capsys):
    slopes = {(name, m): defect_order_study(builtin_problem(name), FORWARD_EULER, H_GRID, m).slope
              for name in ("linear-scalar", "nonautonomous") for m in (1, 4)}
    ok = all(1.9 <= s <= 2.1 for s in slopes.values())
    verdict(capsys, "2", ok, ", ".join(f"{n}/m={m}: {s:.4f}" for (n, m), s in slopes.items())
            + " (want [1.9, 2.1])")


def test_c3_defect_order_backward_euler(capsys):
    assert all(h <= 0.5 for h in H_GRID)  # h <= 1/(2L) with L = 1
    slopes = {(name, m): defect_order_study(builtin_problem(name), BACKWARD_EULER, H_GRID, m).slope
              for name in ("linear-scalar", "nonautonomous") for m in (1, 4)}
    ok = all(1.9 <= s <= 2.1 for s in slopes.values())
    verdict(capsys, "3", ok, ", ".join(f"{n}/m={m}: {s:.4f}" for (n, m), s in slopes.items())
            + " (want [1.9, 2.1])")


def test_c4_integrator_baselines(capsys):
    p = builtin_problem("linear-scalar")
    rk4 = global_error_study(p, RK4_GRID, "rk4").slope
    fe = global_error_study(p, H_GRID, FORWARD_EULER).slope
    verdict(capsys, "4", 3.8 <= rk4 <= 4.2 and 0.9 <= fe <= 1.1,
            f"RK4 order {rk4:.4f} (want [3.8, 4.2]), forward Euler order {fe:.4f} (want [0.9, 1.1])")


def test_c5a_closed_form_equals_recursion(capsys):
    worst, worst_at, bad = 0.0, None, 0
    total = 0
    for a, b, g in itertools.product((0.01, 0.1, 1.0), (1.01, 1.5, 2.0), (1e-4, 1e-2, 1.0)):
        r = Recurrence(a, b, g)
        z = z_triangle(r, 30, 10)
        for n in range(1, 31):
            for k in range(min(n, 10) + 1):
                if z[k, n] <= 0:
                    continue
                total += 1
                rel = abs(z_closed_form(r, n, k) - z[k, n]) / z[k, n]
                if rel > 1e-10:
                    bad += 1
                if rel > worst:
                    worst, worst_at = rel, (a, b, g, n, k)
    verdict(capsys, "5a", bad == 0,
            f"{bad}/{total} grid points exceed 1e-10 relative; worst {worst:.3e} at (a,b,gamma,n,k)={worst_at}")


def test_c5b_majorant_dominates_errors(capsys):
    p, mesh, run = linear_run()
    c2 = calibrate_c2(p, mesh, run)
    const = forward_euler_constants(p.lipschitz_L, mesh.h, c2)
    assert const.c1 == 1.0 and const.c3 == 1.0 + rk4_lipschitz_M(1.0, 0.1)
    rep = verify_dominance(run, const, rtol=1e-9)
    ok = bool(rep.error_le_z.all())
    verdict(capsys, "5b", ok,
            f"c2={c2:.6g}, c3={const.c3:.6g}; worst E/z = {rep.worst_ratio:.3e} at (k,n)={rep.worst_index}")


def test_c6_final_bounds(capsys):
    p, mesh, run = linear_run()
    const = forward_euler_constants(1.0, mesh.h, calibrate_c2(p, mesh, run))
    rep = verify_dominance(run, const, rtol=1e-9)
    thm1 = bool(rep.sup_le_bound.all())

    _, _, brun = linear_run(BACKWARD_EULER)
    bconst = backward_euler_constants(1.0, mesh.h, calibrate_c2(p, mesh, brun, BACKWARD_EULER))
    t2 = verify_theorem2(brun, bconst, rtol=1e-9)
    verdict(capsys, "6", thm1 and t2.passed and len(t2.passed_per_k) == 6,
            f"theorem-1 worst sup/bound {rep.worst_bound_ratio:.3e} over k<=5; "
            f"theorem-2 (backward Euler) worst sup/bound {t2.worst_ratio:.3e}")


def test_c7_lipschitz_conditions(capsys):
    parts, ok = [], True
    for name in LIPSCHITZ_PROBLEMS:
        p = builtin_problem(name)
        mesh = Mesh.for_problem(p, 10, 1)
        assert mesh.h <= 1 / (2 * p.lipschitz_L)
        fe = lipschitz_condition_check(p, mesh, FORWARD_EULER, 1000, seed=42, rtol=1e-10)
        be = lipschitz_condition_check(p, mesh, BACKWARD_EULER, 1000, seed=42, rtol=1e-10)
        ok &= fe.cond1_bound == 1 + mesh.h * p.lipschitz_L and fe.cond1_passed
        ok &= be.cond1_bound == 1 + 2 * mesh.h * p.lipschitz_L and be.cond1_passed
        ok &= fe.cond3_bound == p.lipschitz_L + rk4_lipschitz_M(p.lipschitz_L, mesh.h)
        ok &= bool(fe.cond3_passed)
        parts.append(f"{name}: c1-FE {fe.cond1_max:.6f}/{fe.cond1_bound:.3f}, "
                     f"c1-BE {be.cond1_max:.6f}/{be.cond1_bound:.3f}, "
                     f"c3 {fe.cond3_max:.5f}/{fe.cond3_bound:.5f}")
    verdict(capsys, "7", ok, "; ".join(parts))


def test_c8_phi1(capsys):
    parts, ok = [], True
    for name, t, u in (("linear-scalar", 0.0, [1.0]), ("nonautonomous", 0.0, [0.0])):
        rep = phi1_convergence_check(builtin_problem(name), t, u, H_GRID, phi1=0.5)
        gap = abs(rep.limit[0] - 0.5)
        ok &= rep.fit is not None and rep.fit.slope >= 0.9 and gap <= 1e-3
        ok &= bool(np.all(np.diff(rep.deviations) < 0))
        parts.append(f"{name}: order {rep.fit.slope:.4f}, |limit-0.5| = {gap:.2e}")
    verdict(capsys, "8", ok, "; ".join(parts) + " (want order >= 0.9, gap <= 1e-3)")


def test_c9_h_refinement(capsys):
    p = builtin_problem("linear-scalar")
    fits = {c.kind.value: refinement_study(p, c, H_GRID, m=4, k=2) for c in (FORWARD_EULER, BACKWARD_EULER)}
    ok = all(f.slope >= 0.9 and np.all(np.diff(f.errors) < 0) for f in fits.values())
    verdict(capsys, "9", ok, ", ".join(f"{k}: order {f.slope:.4f}" for k, f in fits.items())
            + " (want >= 0.9)")


def test_c10_determinism_across_workers(capsys, tmp_path):
    mismatches = []
    for coarse in (FORWARD_EULER, BACKWARD_EULER):
        for K in (5, 10):
            a = linear_run(coarse, K=K, workers=1)[2]
            b = linear_run(coarse, K=K, workers=4)[2]
            if a.iterates.tobytes() != b.iterates.tobytes() or a.errors.tobytes() != b.errors.tobytes():
                mismatches.append(f"run {coarse.kind.value} K={K}")
    p = builtin_problem("nonautonomous")
    for coarse in (FORWARD_EULER, BACKWARD_EULER):
        s1 = defect_order_study(p, coarse, H_GRID, 4, workers=1)
        s4 = defect_order_study(p, coarse, H_GRID, 4, workers=4)
        if s1.errors.tobytes() != s4.errors.tobytes() or s1.slope != s4.slope:
            mismatches.append(f"defect-order {coarse.kind.value}")
        r1 = refinement_study(p, coarse, H_GRID, 4, 2, workers=1)
        r4 = refinement_study(p, coarse, H_GRID, 4, 2, workers=4)
        if r1.errors.tobytes() != r4.errors.tobytes():
            mismatches.append(f"refinement {coarse.kind.value}")
    l1 = lipschitz_condition_check(p, Mesh.for_problem(p, 10, 1), FORWARD_EULER, 1000, workers=1)
    l4 = lipschitz_condition_check(p, Mesh.for_problem(p, 10, 1), FORWARD_EULER, 1000, workers=4)
    if (l1.cond1_max, l1.cond3_max, l1.cond3_min) != (l4.cond1_max, l4.cond3_max, l4.cond3_min):
        mismatches.append("conditions")
    for coarse in ("forward-euler", "backward-euler"):
        dirs = []
        for workers in ("1", "4"):
            out = tmp_path / f"{coarse}-{workers}"
            code = main(["--study", "all", "--problem", "linear-scalar", "--coarse", coarse,
                         "--workers", workers, "--output-dir", str(out)])
            assert code == 0
            dirs.append({f.name: f.read_bytes() for f in sorted(out.glob("*.csv"))})
        if dirs[0] != dirs[1]:
            mismatches.append(f"cli csv {coarse}")
    verdict(capsys, "10", not mismatches,
            "byte-identical for workers 1 vs 4" if not mismatches else f"differences: {mismatches}")
