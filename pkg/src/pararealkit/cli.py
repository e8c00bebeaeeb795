"""Command-line experiment runner writing CSV reports.

Exit codes: 0 when every check passes, 1 on usage or runtime errors, 2 when a
verification check fails.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    DEFAULT_SEED,
    defect_order_study,
    global_error_study,
    lipschitz_condition_check,
    phi1_convergence_check,
    calibrate_c2,
    refinement_study,
)
from .bounds import (
    backward_euler_constants,
    forward_euler_constants,
    theorem2_bound,
    verify_dominance,
    verify_theorem2,
)
from .exceptions import ConfigError, PararealError
from .integrators import CoarseKind, CoarseMethod
from .ode_model import CATALOG_NAMES, Mesh, builtin_problem, sup_norm
from .parareal import PararealConfig, parareal_run

log = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "PARAREALKIT_OUTPUT_DIR"
STUDIES = ("run", "bounds", "defect-order", "integrator-order", "conditions", "phi1", "all")
COARSE_CHOICES = tuple(k.value for k in CoarseKind)

DEFECT_GRID = tuple(2.0 ** -i for i in range(3, 9))
RK4_GRID = tuple(2.0 ** -i for i in range(3, 8))
EXACTNESS_RTOL = 1e-12


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "linear-scalar"
    N: int = 10
    m: int = 4
    K: int = 5
    coarse: str = "forward-euler"
    workers: int = 1
    study: str = "run"
    seed: int = DEFAULT_SEED
    output_dir: str = ""

    def __post_init__(self):
        if self.problem not in CATALOG_NAMES:
            raise ConfigError(f"unknown problem {self.problem!r}; catalog: {', '.join(CATALOG_NAMES)}",
                              "problem")
        if self.coarse not in COARSE_CHOICES:
            raise ConfigError(f"coarse must be one of {COARSE_CHOICES}, got {self.coarse!r}", "coarse")
        if self.study not in STUDIES:
            raise ConfigError(f"study must be one of {STUDIES}, got {self.study!r}", "study")
        for key, low in (("N", 1), ("m", 1), ("K", 0), ("workers", 1)):
            value = getattr(self, key)
            if not isinstance(value, int) or isinstance(value, bool) or value < low:
                raise ConfigError(f"{key} must be an integer >= {low}, got {value!r}", key)
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}", "seed")
        if self.K > self.N:
            raise ConfigError(f"K exceeds N: K={self.K}, N={self.N}", "K")

    @property
    def coarse_method(self) -> CoarseMethod:
        return CoarseMethod(CoarseKind(self.coarse))


CONFIG_KEYS = tuple(f.name for f in fields(ExperimentConfig))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pararealkit",
                description="Run parareal experiments and verify the convergence bounds.")
    p.add_argument("--config", help="JSON file with configuration keys; flags override it")
    p.add_argument("--problem", choices=CATALOG_NAMES)
    p.add_argument("--N", type=int, help="number of coarse intervals (default 10)")
    p.add_argument("--m", type=int, help="RK4 substeps per interval (default 4)")
    p.add_argument("--K", type=int, help="parareal iterations (default 5)")
    p.add_argument("--coarse", choices=COARSE_CHOICES)
    p.add_argument("--workers", type=int, help="threads for the defect sweep (default 1)")
    p.add_argument("--study", choices=STUDIES)
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir", dest="output_dir",
                   help=f"report directory (default ${OUTPUT_DIR_ENV} or ./pararealkit-output)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def parse_config(argv=None) -> ExperimentConfig:
    """Resolve defaults, then the JSON file, then explicit flags."""
    args = build_parser().parse_args(argv)
    values = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}", "config") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object", "config")
        for key in data:
            if key not in CONFIG_KEYS:
                raise ConfigError(f"unknown config key {key!r}", key)
        values.update(data)
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            values[key] = value
    if not values.get("output_dir"):
        values["output_dir"] = os.environ.get(OUTPUT_DIR_ENV) or "pararealkit-output"
    return ExperimentConfig(**values)


# -- reports ----------------------------------------------------------------------


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


@dataclass
class Table:
    header: list
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        for row in self.rows:
            writer.writerow([format_cell(v) for v in row])
        return buf.getvalue()


@dataclass(frozen=True)
class Check:
    name: str
    status: str  # PASS, FAIL or SKIP
    detail: str = ""

    def line(self) -> str:
        return f"{self.status} {self.name}: {self.detail}"


@dataclass
class ExperimentReport:
    metadata: dict
    tables: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return any(c.status == "FAIL" for c in self.checks)

    def table(self, name, header) -> Table:
        return self.tables.setdefault(name, Table(list(header)))

    def check(self, name, ok, detail=""):
        self.checks.append(Check(name, "PASS" if ok else "FAIL", detail))

    def skip(self, name, detail=""):
        self.checks.append(Check(name, "SKIP", detail))

    def write(self, output_dir) -> Path:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, table in self.tables.items():
            (out / f"{name}.csv").write_text(table.to_csv())
        manifest = dict(self.metadata)
        manifest["tables"] = sorted(f"{n}.csv" for n in self.tables)
        manifest["checks"] = [asdict(c) for c in self.checks]
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
        return out


# -- studies --------------------------------------------------------------------


def _in_range(value, lo, hi):
    return lo <= value <= hi


def _order_rows(report, study, fit):
    tab = report.table("order_fits", ["study", "h", "error", "slope", "r_squared"])
    for h, e in zip(fit.h_values, fit.errors):
        tab.rows.append([study, h, e, fit.slope, fit.r_squared])


def study_run(cfg, report, problem, mesh):
    coarse = cfg.coarse_method
    run = parareal_run(problem, mesh, PararealConfig(coarse, cfg.K), cfg.workers)
    nodes = mesh.nodes()
    errs = report.table("errors", ["k", "n", "t_n", "error"])
    for k in range(run.iterations_performed + 1):
        for n in range(mesh.N + 1):
            errs.rows.append([k, n, nodes[n], run.errors[k, n]])
    sups = report.table("sup_errors", ["k", "sup_error"])
    for k, s in enumerate(run.sup_errors):
        sups.rows.append([k, s])

    ladder = max((run.errors[k, n] / (1 + sup_norm(run.reference[n]))
                  for k in range(run.iterations_performed + 1) for n in range(k + 1)), default=0.0)
    report.check("exactness-ladder", ladder <= EXACTNESS_RTOL,
                 f"max relative E_n^(k) for n<=k = {ladder:.3e} (tol {EXACTNESS_RTOL:g})")
    if run.iterations_performed == mesh.N:
        scale = 1 + max(sup_norm(u) for u in run.reference)
        final = run.sup_errors[-1] / scale
        report.check("finalization-K=N", final <= EXACTNESS_RTOL, f"relative grid error {final:.3e}")
    if mesh.h * problem.lipschitz_L < 1:
        s = run.sup_errors
        bad = [k for k in range(1, len(s)) if s[k] > s[k - 1] and s[k] > 1e-12]
        report.check("monotone-improvement", not bad,
                     "sup errors non-increasing to the 1e-12 floor" if not bad else f"increase at k={bad}")
    return run


def study_bounds(cfg, report, problem, mesh):
    coarse = cfg.coarse_method
    run = study_run(cfg, report, problem, mesh)
    L, h, H = problem.lipschitz_L, mesh.h, problem.horizon
    c2 = calibrate_c2(problem, mesh, run, coarse, workers=cfg.workers)
    K = run.iterations_performed
    bnd = report.table("bounds", ["k", "sup_error", "z_sup", "closed_form_sup",
                                  "theorem1_bound", "theorem2_bound_if_applicable"])
    if coarse.is_implicit:
        const = backward_euler_constants(L, h, c2, horizon=H)
        thm2 = verify_theorem2(run, const)
        for k in range(K + 1):
            bnd.rows.append([k, run.sup_errors[k], None, None, None, thm2.bound])
        report.check("theorem2-bound", thm2.passed,
                     f"c2={c2:.6g}, bound={thm2.bound:.6g}, worst sup/bound={thm2.worst_ratio:.3e}")
        return

    const = forward_euler_constants(L, h, c2, horizon=H)
    dom = verify_dominance(run, const)
    t2 = theorem2_bound(const)
    for k in range(K + 1):
        bnd.rows.append([k, run.sup_errors[k], dom.z[k].max(), dom.closed_form[k].max(),
                         dom.bounds[k], t2])
    zt = report.table("z_triangle", ["k", "n", "z"])
    dm = report.table("dominance", ["k", "n", "error", "z", "closed_form", "error_le_z", "z_le_closed"])
    for k in range(K + 1):
        for n in range(mesh.N + 1):
            zt.rows.append([k, n, dom.z[k, n]])
            dm.rows.append([k, n, run.errors[k, n], dom.z[k, n], dom.closed_form[k, n],
                            dom.error_le_z[k, n], dom.z_le_closed[k, n]])
    fail = dom.first_failure()
    report.check("majorant-dominance", dom.error_le_z.all() and dom.z_le_closed.all(),
                 f"c2={c2:.6g}, c3={const.c3:.6g}, worst E/z={dom.worst_ratio:.3e} at (k,n)={dom.worst_index}"
                 + (f"; first failure {fail}" if fail else ""))
    report.check("theorem1-bound", bool(dom.sup_le_bound.all()),
                 f"worst sup/bound={dom.worst_bound_ratio:.3e}")
    worst2 = max((s / t2 for s in run.sup_errors), default=0.0) if t2 > 0 else (
        0.0 if not run.sup_errors.any() else float("inf"))
    report.check("theorem2-bound", worst2 <= 1 + 1e-9, f"worst sup/bound={worst2:.3e}")


def _fit_or_skip(report, name, fn):
    try:
        return fn()
    except ValueError as exc:
        report.skip(name, str(exc))
        return None


def study_defect_order(cfg, report, problem, mesh):
    coarse = cfg.coarse_method
    name = f"defect-order[{cfg.coarse},m={cfg.m}]"
    fit = _fit_or_skip(report, name,
                       lambda: defect_order_study(problem, coarse, DEFECT_GRID, cfg.m, cfg.workers))
    if fit is not None:
        _order_rows(report, name, fit)
        report.check(name, _in_range(fit.slope, 1.9, 2.1), f"slope={fit.slope:.4f} (want [1.9, 2.1])")


def study_integrator_order(cfg, report, problem, mesh):
    coarse = cfg.coarse_method
    fit = _fit_or_skip(report, "rk4-global-order",
                       lambda: global_error_study(problem, RK4_GRID, "rk4", 1, cfg.workers))
    if fit is not None:
        _order_rows(report, "rk4-global-order", fit)
        report.check("rk4-global-order", _in_range(fit.slope, 3.8, 4.2),
                     f"slope={fit.slope:.4f} (want [3.8, 4.2])")
    name = f"{cfg.coarse}-global-order"
    fit = _fit_or_skip(report, name,
                       lambda: global_error_study(problem, DEFECT_GRID, coarse, 1, cfg.workers))
    if fit is not None:
        _order_rows(report, name, fit)
        report.check(name, _in_range(fit.slope, 0.9, 1.1), f"slope={fit.slope:.4f} (want [0.9, 1.1])")
    name = f"parareal-refinement-k2[{cfg.coarse}]"
    fit = _fit_or_skip(report, name,
                       lambda: refinement_study(problem, coarse, DEFECT_GRID, cfg.m, 2, cfg.workers))
    if fit is not None:
        _order_rows(report, name, fit)
        report.check(name, fit.slope >= 0.9, f"slope={fit.slope:.4f} (want >= 0.9)")


def study_conditions(cfg, report, problem, mesh):
    rep = lipschitz_condition_check(problem, mesh, cfg.coarse_method, 1000, cfg.seed,
                                    workers=cfg.workers)
    tab = report.table("conditions", ["condition", "ratio_max", "ratio_min", "bound", "passed",
                                      "seed", "samples"])
    tab.rows.append(["condition-1", rep.cond1_max, rep.cond1_min, rep.cond1_bound, rep.cond1_passed,
                     rep.seed, rep.sample_count])
    tab.rows.append(["condition-3", rep.cond3_max, rep.cond3_min, rep.cond3_bound, rep.cond3_passed,
                     rep.seed, rep.sample_count])
    report.check("condition-1", rep.cond1_passed,
                 f"max ratio {rep.cond1_max:.12g} <= {rep.cond1_bound:.12g}")
    if rep.cond3_bound is None:
        report.skip("condition-3", f"no proven constant here; measured max ratio {rep.cond3_max:.6g}")
    else:
        report.check("condition-3", rep.cond3_passed,
                     f"max ratio {rep.cond3_max:.12g} <= {rep.cond3_bound:.12g}")


def study_phi1(cfg, report, problem, mesh):
    rep = phi1_convergence_check(problem, problem.t0, problem.x0, DEFECT_GRID)
    d = problem.dim
    tab = report.table("phi1", ["h", "deviation"] + [f"quotient_{i}" for i in range(d)]
                       + [f"phi1_{i}" for i in range(d)])
    for h, dev, q in zip(rep.h_values, rep.deviations, rep.quotients):
        tab.rows.append([h, dev, *q, *rep.phi1])
    if rep.fit is None:
        report.skip("phi1-order", "deviations vanish; nothing to fit")
    else:
        _order_rows(report, "phi1-deviation", rep.fit)
        report.check("phi1-order", rep.fit.slope >= 0.9, f"slope={rep.fit.slope:.4f} (want >= 0.9)")
    gap = sup_norm(rep.limit - rep.phi1)
    report.check("phi1-limit", gap <= 1e-3, f"|(F4-f)/h - phi1| at h={rep.h_values[-1]:g} is {gap:.3e}")


STUDY_FUNCS = {
    "run": study_run,
    "bounds": study_bounds,
    "defect-order": study_defect_order,
    "integrator-order": study_integrator_order,
    "conditions": study_conditions,
    "phi1": study_phi1,
}


def run_experiment(cfg: ExperimentConfig) -> tuple[ExperimentReport, int]:
    """Execute the configured study; returns the report and the exit code."""
    problem = builtin_problem(cfg.problem)
    mesh = Mesh.for_problem(problem, cfg.N, cfg.m)
    meta = {
        "config": asdict(cfg),
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "h": mesh.h,
    }
    report = ExperimentReport(meta)
    studies = [s for s in STUDY_FUNCS if s != "run"] if cfg.study == "all" else [cfg.study]
    for study in studies:
        log.info("running study %s", study)
        STUDY_FUNCS[study](cfg, report, problem, mesh)
    return report, (2 if report.failed else 0)


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        print(f"error{key}: {exc}", file=sys.stderr)
        return 1
    args = sys.argv[1:] if argv is None else argv
    verbose = "-v" in args or "--verbose" in args
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING)
    try:
        report, code = run_experiment(cfg)
        out = report.write(cfg.output_dir)
    except (PararealError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for c in report.checks:
        print(c.line())
    print(f"reports written to {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
