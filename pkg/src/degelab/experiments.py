"""Solve-then-analyze pipelines: single runs, sweeps, refinement studies.

A run solves one problem by truncation continuation, attaches the regime
prediction, executes every enabled estimate checker, and fits the tail
exponents of the solution and its gradient.  Sweeps run the Cartesian
product of parameter axes with per-point failure isolation; output files
(records.csv, summary.md, plotdata/*.dat) are byte-deterministic apart
from a timestamp comment so repeated executions can be diffed.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .analysis import (
    EstimateReport,
    MarcinkiewiczLemmaReport,
    TailFit,
    check_bg_estimate,
    check_entropy_inequality,
    check_lemma_estimate,
    check_linfty_bound,
    check_truncation_energy,
    check_weighted_energy,
    distribution_function,
    tail_exponent_fit,
    verify_marcinkiewicz_lemma,
)
from .grid import (
    GridFunction,
    build_radial_grid,
    face_gradient,
    face_weights,
    grid_function,
    quadrature_weights,
)
from .problem import (
    PowerAbsorption,
    ProblemSpec,
    RadialPowerDatum,
    RegimeCase,
    RegimePrediction,
    SingularAbsorption,
    classify_regime,
    datum_eval,
)
from .solver import SolverConfig, manufactured_rhs, truncation_continuation

__all__ = [
    "MeshSpec",
    "CheckSettings",
    "RunRecord",
    "SweepSpec",
    "ConvergenceRow",
    "ConvergenceStudy",
    "ProbeRow",
    "ProbeTable",
    "ALL_CHECKS",
    "run_single",
    "run_sweep",
    "mesh_refinement_study",
    "exponent_probe",
    "emit_outputs",
    "emit_from_saved",
    "save_records",
    "load_records",
    "regime_label",
]

ALL_CHECKS = ("lemma", "bg", "weighted_energy", "truncation_energy",
              "linfty", "entropy", "marcinkiewicz")

CSV_COLUMNS = ("run_id", "gamma", "p", "m", "N", "delta", "M", "n_final",
               "converged", "check_name", "lhs", "rhs", "slack", "passed",
               "tail_u", "tail_grad", "predicted_grad")


@dataclass(frozen=True)
class MeshSpec:
    cells: int
    grading: float = 1.0


@dataclass(frozen=True)
class CheckSettings:
    """Tolerances and sampling families shared by the estimate checkers."""

    tolerance: float = 1e-4
    lambdas: tuple[float, ...] = (1.25, 2.0, 4.0)
    truncation_k_count: int = 8
    entropy_k_count: int = 4
    t_fractions: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75)
    tail_tolerance: float = 0.15


@dataclass(frozen=True, eq=False)
class RunRecord:
    """Everything measured about one solve; records are append-only."""

    run_id: str
    problem: ProblemSpec
    mesh: MeshSpec
    n_final: int
    converged: bool
    truncation_active: bool
    hit_iteration_cap: bool
    picard_iters: int
    newton_iters_total: int
    residual_inf: float
    prediction: RegimePrediction | None
    reports: dict[str, tuple[EstimateReport, ...]]
    skipped: dict[str, str]
    marcinkiewicz: MarcinkiewiczLemmaReport | None
    tail_u: TailFit | None
    tail_grad: TailFit | None
    dist_u: tuple[tuple[float, ...], tuple[float, ...]] | None
    dist_grad: tuple[tuple[float, ...], tuple[float, ...]] | None
    started_at: str
    duration_s: float
    failure: str | None = None
    solution: GridFunction | None = None  # kept in memory, never serialized

    @property
    def all_passed(self) -> bool:
        if not self.converged:
            return False
        for group in self.reports.values():
            if any(not rep.passed for rep in group):
                return False
        if self.marcinkiewicz is not None and self.marcinkiewicz.applicable:
            return self.marcinkiewicz.passed
        return True


def _problem_axes(spec: ProblemSpec) -> dict[str, float]:
    gamma = spec.coefficient.gamma
    p = spec.lower.p if isinstance(spec.lower, PowerAbsorption) else math.nan
    m = spec.datum.m
    delta = (spec.datum.family.delta
             if isinstance(spec.datum.family, RadialPowerDatum) else math.nan)
    return {"gamma": gamma, "p": p, "m": m, "N": spec.dimension, "delta": delta}


def _checker_levels(u_max: float, count: int) -> np.ndarray:
    if u_max <= 0:
        return np.array([1.0])
    return np.geomspace(0.01 * u_max, 2.0 * u_max, count)


def run_single(spec: ProblemSpec, mesh: MeshSpec, cfg: SolverConfig,
               checks: Sequence[str] = ALL_CHECKS,
               settings: CheckSettings = CheckSettings(),
               run_id: str = "run_0000") -> RunRecord:
    """Solve one problem and execute every enabled, applicable checker."""
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    checks = tuple(checks)
    unknown = set(checks) - set(ALL_CHECKS)
    if unknown:
        raise ValueError(f"unknown checks: {sorted(unknown)}")

    grid = build_radial_grid(spec.dimension, spec.radius, mesh.cells, mesh.grading)
    w = quadrature_weights(grid)
    prediction = None
    if isinstance(spec.lower, PowerAbsorption):
        prediction = classify_regime(spec.coefficient.gamma, spec.lower.p, spec.datum.m)

    failure = None
    try:
        result = truncation_continuation(grid, spec, cfg)
    except Exception as err:  # isolate solver blowups for sweep robustness
        return RunRecord(
            run_id=run_id, problem=spec, mesh=mesh, n_final=0, converged=False,
            truncation_active=True, hit_iteration_cap=False, picard_iters=0,
            newton_iters_total=0, residual_inf=math.inf, prediction=prediction,
            reports={}, skipped={name: "solver failed" for name in checks},
            marcinkiewicz=None, tail_u=None, tail_grad=None, dist_u=None,
            dist_grad=None, started_at=started,
            duration_s=time.perf_counter() - t0, failure=f"{type(err).__name__}: {err}",
        )

    reports: dict[str, tuple[EstimateReport, ...]] = {}
    skipped: dict[str, str] = {}
    mk_report = None
    tail_u = tail_grad = None
    dist_u = dist_grad = None

    if result.flags.converged:
        u = result.u
        f_nodal = grid_function(grid, lambda r: datum_eval(spec.datum, r))
        u_max = u.max_abs()
        tol = settings.tolerance
        alpha = spec.coefficient.alpha
        gamma = spec.coefficient.gamma
        is_power = isinstance(spec.lower, PowerAbsorption)

        for name in checks:
            if name == "lemma":
                if not is_power:
                    skipped[name] = "needs a power absorption term"
                    continue
                reports[name] = (check_lemma_estimate(
                    u, f_nodal, spec.lower.p, spec.datum.m, w, tol),)
            elif name == "bg":
                if not is_power:
                    skipped[name] = "needs a power absorption term"
                    continue
                ts = np.array(settings.t_fractions) * u_max
                reports[name] = tuple(check_bg_estimate(u, f_nodal, spec.lower.p,
                                                        np.unique(ts), w, tol))
            elif name == "weighted_energy":
                reports[name] = tuple(
                    check_weighted_energy(u, f_nodal, gamma, lam, alpha, w, tol)
                    for lam in settings.lambdas)
            elif name == "truncation_energy":
                ks = _checker_levels(u_max, settings.truncation_k_count)
                reports[name] = tuple(check_truncation_energy(
                    u, f_nodal, gamma, alpha, ks, w, tol))
            elif name == "linfty":
                if not isinstance(spec.lower, SingularAbsorption):
                    skipped[name] = "needs a singular absorption term"
                    continue
                reports[name] = (check_linfty_bound(u, spec.lower, f_nodal),)
            elif name == "entropy":
                ks = _checker_levels(u_max, settings.entropy_k_count)
                reports[name] = tuple(check_entropy_inequality(
                    u, spec, None, ks, w, tol, f_values=f_nodal))
            elif name == "marcinkiewicz":
                mk_report = verify_marcinkiewicz_lemma(u, w, settings.tail_tolerance)
                if not mk_report.applicable:
                    skipped[name] = mk_report.reason
                else:
                    reports[name] = ()

        df_u = distribution_function(u, w)
        tail_u = tail_exponent_fit(df_u)
        dist_u = (tuple(map(float, df_u.k_levels)), tuple(map(float, df_u.measures)))
        grad = np.abs(face_gradient(u))
        df_g = distribution_function(grad, face_weights(grid))
        tail_grad = tail_exponent_fit(df_g)
        dist_grad = (tuple(map(float, df_g.k_levels)), tuple(map(float, df_g.measures)))
    else:
        skipped = {name: "solver did not converge" for name in checks}

    return RunRecord(
        run_id=run_id, problem=spec, mesh=mesh, n_final=result.n_final,
        converged=result.flags.converged,
        truncation_active=result.flags.truncation_active,
        hit_iteration_cap=result.flags.hit_iteration_cap,
        picard_iters=result.picard_iters,
        newton_iters_total=result.newton_iters_total,
        residual_inf=result.residual_inf, prediction=prediction,
        reports=reports, skipped=skipped, marcinkiewicz=mk_report,
        tail_u=tail_u, tail_grad=tail_grad, dist_u=dist_u, dist_grad=dist_grad,
        started_at=started, duration_s=time.perf_counter() - t0, failure=failure,
        solution=result.u if result.flags.converged else None,
    )


@dataclass(frozen=True)
class SweepSpec:
    """Cartesian sweep over problem and mesh axes around a base problem.

    Axis names: gamma, p, m, N, delta, M.  Every point yields a record,
    flagged rather than dropped on failure; the product size is capped.
    """

    base: ProblemSpec
    mesh: MeshSpec
    axes: dict[str, tuple[float, ...]] = field(default_factory=dict)
    cfg: SolverConfig = SolverConfig()
    checks: tuple[str, ...] = ALL_CHECKS
    settings: CheckSettings = CheckSettings()
    parallelism: int = 1
    cap: int = 4096


def _apply_axis_point(base: ProblemSpec, mesh: MeshSpec,
                      point: dict[str, float]) -> tuple[ProblemSpec, MeshSpec]:
    spec = base
    for key, val in point.items():
        if key == "gamma":
            spec = replace(spec, coefficient=replace(spec.coefficient, gamma=float(val)))
        elif key == "p":
            if not isinstance(spec.lower, PowerAbsorption):
                raise ValueError("axis 'p' requires a power absorption base problem")
            spec = replace(spec, lower=PowerAbsorption(float(val)))
        elif key == "m":
            spec = replace(spec, datum=replace(spec.datum, m=float(val)))
        elif key == "N":
            spec = replace(spec, dimension=int(val))
        elif key == "delta":
            if not isinstance(spec.datum.family, RadialPowerDatum):
                raise ValueError("axis 'delta' requires a radial power datum")
            spec = replace(spec, datum=replace(
                spec.datum, family=replace(spec.datum.family, delta=float(val))))
        elif key == "M":
            mesh = replace(mesh, cells=int(val))
        else:
            raise ValueError(f"unknown sweep axis {key!r}")
    return spec, mesh


def _sweep_point(args) -> RunRecord:
    sweep, idx, point = args
    run_id = f"run_{idx:04d}"
    started = datetime.now(timezone.utc).isoformat()
    try:
        spec, mesh = _apply_axis_point(sweep.base, sweep.mesh, point)
        return run_single(spec, mesh, sweep.cfg, sweep.checks, sweep.settings, run_id)
    except Exception as err:
        return RunRecord(
            run_id=run_id, problem=sweep.base, mesh=sweep.mesh, n_final=0,
            converged=False, truncation_active=True, hit_iteration_cap=False,
            picard_iters=0, newton_iters_total=0, residual_inf=math.inf,
            prediction=None, reports={},
            skipped={name: "point construction failed" for name in sweep.checks},
            marcinkiewicz=None, tail_u=None, tail_grad=None, dist_u=None,
            dist_grad=None, started_at=started, duration_s=0.0,
            failure=f"{type(err).__name__}: {err}",
        )


def run_sweep(sweep: SweepSpec) -> list[RunRecord]:
    """Run every point of the sweep in deterministic axis order."""
    names = list(sweep.axes.keys())
    values = [tuple(sweep.axes[name]) for name in names]
    combos = list(itertools.product(*values)) if names else [()]
    if len(combos) > sweep.cap:
        raise ValueError(f"sweep size {len(combos)} exceeds cap {sweep.cap}")
    tasks = [(sweep, idx, dict(zip(names, combo)))
             for idx, combo in enumerate(combos)]
    if sweep.parallelism > 1:
        with ProcessPoolExecutor(max_workers=sweep.parallelism) as pool:
            records = list(pool.map(_sweep_point, tasks))
    else:
        records = [_sweep_point(task) for task in tasks]
    return records


@dataclass(frozen=True)
class ConvergenceRow:
    cells: int
    error: float
    order: float  # vs the previous row; nan on the first


@dataclass(frozen=True)
class ConvergenceStudy:
    rows: tuple[ConvergenceRow, ...]

    @property
    def observed_orders(self) -> tuple[float, ...]:
        return tuple(row.order for row in self.rows[1:])


def mesh_refinement_study(spec: ProblemSpec, u_star: Callable[[np.ndarray], np.ndarray],
                          M_list: Sequence[int], cfg: SolverConfig,
                          rhs: Callable[[np.ndarray], np.ndarray] | None = None,
                          grading: float | None = None,
                          reference_factor: int = 8) -> ConvergenceStudy:
    """Max-norm errors against a manufactured field under mesh refinement.

    The datum is the continuum source for which u_star solves the
    equation: either the closed form ``rhs`` when available, or a
    high-resolution discrete surrogate (manufactured on a mesh
    ``reference_factor`` times finer than the largest study mesh and
    interpolated down, so its consistency error is negligible next to the
    study's own).
    """
    M_list = [int(m) for m in M_list]
    if rhs is None:
        fine = build_radial_grid(spec.dimension, spec.radius,
                                 reference_factor * max(M_list), grading)
        star_fine = grid_function(fine, u_star)
        level = _inactive_level(cfg, star_fine.values)
        f_fine = manufactured_rhs(fine, spec, star_fine, level, cfg.face_scheme)

        def rhs(r):
            return np.interp(r, fine.nodes, f_fine.values)

    rows: list[ConvergenceRow] = []
    prev: tuple[int, float] | None = None
    for M in M_list:
        grid = build_radial_grid(spec.dimension, spec.radius, M, grading)
        star = grid_function(grid, u_star)
        f_vals = grid_function(grid, rhs)
        result = truncation_continuation(grid, spec, cfg, f_values=f_vals)
        err = float(np.max(np.abs(result.u.values - star.values)))
        order = math.nan
        if prev is not None and err > 0 and prev[1] > 0:
            order = math.log(prev[1] / err) / math.log(M / prev[0])
        rows.append(ConvergenceRow(cells=M, error=err, order=order))
        prev = (M, err)
    return ConvergenceStudy(rows=tuple(rows))


def _inactive_level(cfg: SolverConfig, values: np.ndarray) -> int:
    """First schedule level that leaves the given values untouched."""
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    for level in cfg.n_schedule():
        if level > peak:
            return level
    return cfg.n_max


@dataclass(frozen=True)
class ProbeRow:
    delta: float
    lebesgue_exponent: float
    lebesgue_integral: float
    lebesgue_integral_refined: float
    refinement_change: float
    tail_u: float
    tail_grad: float
    predicted_grad: float
    on_boundary: bool
    insufficient: bool
    consistent: bool


@dataclass(frozen=True)
class ProbeTable:
    rows: tuple[ProbeRow, ...]

    @property
    def verdict(self) -> str:
        usable = [row for row in self.rows if not row.insufficient]
        if not usable:
            return "insufficient"
        return "consistent" if all(row.consistent for row in usable) else "inconsistent"


def exponent_probe(base: ProblemSpec, deltas: Sequence[float], mesh: MeshSpec,
                   cfg: SolverConfig, settings: CheckSettings = CheckSettings(),
                   tail_threshold: float = 0.85,
                   stability_threshold: float = 0.25) -> ProbeTable:
    """Sweep the datum singularity toward the integrability edge.

    For each delta the run is repeated on a mesh half as fine; a row is
    consistent when the absorption integral sum w |u|^(pm) is finite and
    stable under that refinement and the measured gradient tail exponent
    reaches ``tail_threshold`` of the predicted one.  Rows whose solution
    is too tame for a tail fit are only marked insufficient.  At points
    sitting exactly on a regime boundary both neighbouring cases predict
    the same gradient exponent; the row is flagged rather than judged.
    """
    if not isinstance(base.lower, PowerAbsorption):
        raise ValueError("exponent probe requires a power absorption term")
    if not isinstance(base.datum.family, RadialPowerDatum):
        raise ValueError("exponent probe requires a radial power datum")
    gamma = base.coefficient.gamma
    p = base.lower.p
    m = base.datum.m
    prediction = classify_regime(gamma, p, m)
    boundary = False
    if m > 1:
        boundary = math.isclose(p, gamma / (m - 1)) or math.isclose(p, (gamma + 1) / (m - 1))
    else:
        boundary = math.isclose(p, gamma + 1)

    pm = p * m
    rows = []
    for delta in deltas:
        spec = replace(base, datum=replace(
            base.datum, family=replace(base.datum.family, delta=float(delta))))
        fine = _probe_solve(spec, mesh, cfg)
        coarse = _probe_solve(spec, MeshSpec(max(mesh.cells // 2, 8), mesh.grading), cfg)

        integral = integral_coarse = math.nan
        tail_u_val = tail_grad_val = math.nan
        insufficient = True
        consistent = False
        if fine is not None and coarse is not None:
            (u, w), (uc, wc) = fine, coarse
            integral = float(np.dot(w.values, np.abs(u.values) ** pm))
            integral_coarse = float(np.dot(wc.values, np.abs(uc.values) ** pm))
            fit_u = tail_exponent_fit(distribution_function(u, w))
            grad = np.abs(face_gradient(u))
            fit_g = tail_exponent_fit(distribution_function(grad, face_weights(u.grid)))
            tail_u_val = fit_u.exponent if fit_u.sufficient else math.nan
            tail_grad_val = fit_g.exponent if fit_g.sufficient else math.nan
            insufficient = not (fit_u.sufficient and fit_g.sufficient)
            if not insufficient:
                change = abs(integral - integral_coarse) / max(abs(integral), 1e-300)
                consistent = (math.isfinite(integral)
                              and change <= stability_threshold
                              and tail_grad_val >= tail_threshold * prediction.gradient_exponent)
        change = (abs(integral - integral_coarse) / max(abs(integral), 1e-300)
                  if math.isfinite(integral) else math.nan)
        rows.append(ProbeRow(
            delta=float(delta), lebesgue_exponent=pm, lebesgue_integral=integral,
            lebesgue_integral_refined=integral_coarse, refinement_change=change,
            tail_u=tail_u_val, tail_grad=tail_grad_val,
            predicted_grad=prediction.gradient_exponent, on_boundary=boundary,
            insufficient=insufficient, consistent=consistent,
        ))
    return ProbeTable(rows=tuple(rows))


def _probe_solve(spec: ProblemSpec, mesh: MeshSpec, cfg: SolverConfig):
    grid = build_radial_grid(spec.dimension, spec.radius, mesh.cells, mesh.grading)
    result = truncation_continuation(grid, spec, cfg)
    if not result.flags.converged:
        return None
    return result.u, quadrature_weights(grid)


# --- output emission -------------------------------------------------------


def regime_label(prediction: RegimePrediction | None, m: float) -> str:
    if prediction is None:
        return "unclassified"
    bucket = "m=1" if m == 1 else "m>1"
    names = {
        RegimeCase.DISTRIBUTIONAL_SOBOLEV: "distributional",
        RegimeCase.ENTROPY: "entropy",
        RegimeCase.FINITE_ENERGY: "finite_energy",
    }
    return f"{bucket}:{names[prediction.case]}"


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _record_rows(rec: RunRecord) -> list[dict]:
    axes = _problem_axes(rec.problem)
    base = {
        "run_id": rec.run_id,
        "gamma": axes["gamma"], "p": axes["p"], "m": axes["m"],
        "N": int(axes["N"]), "delta": axes["delta"], "M": rec.mesh.cells,
        "n_final": rec.n_final, "converged": rec.converged,
        "tail_u": rec.tail_u.exponent if rec.tail_u and rec.tail_u.sufficient else math.nan,
        "tail_grad": (rec.tail_grad.exponent
                      if rec.tail_grad and rec.tail_grad.sufficient else math.nan),
        "predicted_grad": (rec.prediction.gradient_exponent
                           if rec.prediction else math.nan),
    }
    rows = []
    for name, group in rec.reports.items():
        if name == "marcinkiewicz" and rec.marcinkiewicz is not None:
            mk = rec.marcinkiewicz
            rows.append({**base, "check_name": "marcinkiewicz_lemma",
                         "lhs": mk.predicted, "rhs": mk.measured,
                         "slack": (mk.measured - mk.predicted) / max(abs(mk.predicted), 1e-300),
                         "passed": mk.passed})
            continue
        for rep in group:
            label = rep.name
            if rep.params:
                inner = ",".join(f"{k}={v:.6g}" for k, v in rep.params)
                label = f"{rep.name}({inner})"
            rows.append({**base, "check_name": label, "lhs": rep.lhs, "rhs": rep.rhs,
                         "slack": rep.relative_slack, "passed": rep.passed})
    if not rows:
        rows.append({**base, "check_name": "solve_failed" if not rec.converged else "solve",
                     "lhs": rec.residual_inf, "rhs": math.nan, "slack": math.nan,
                     "passed": rec.converged})
    return rows


def emit_outputs(records: Sequence[RunRecord], out_dir) -> dict[str, Path]:
    """Write records.csv, summary.md, and plotdata/*.dat under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plotdir = out / "plotdata"
    plotdir.mkdir(exist_ok=True)

    csv_path = out / "records.csv"
    lines = [f"# generated {datetime.now(timezone.utc).isoformat()}"]
    lines.append(",".join(CSV_COLUMNS))
    for rec in records:
        for row in _record_rows(rec):
            lines.append(",".join(_fmt(row[col]) for col in CSV_COLUMNS))
    csv_path.write_text("\n".join(lines) + "\n")

    md_path = out / "summary.md"
    md_path.write_text(_summary_markdown(records))

    for rec in records:
        for suffix, dist in (("u", rec.dist_u), ("grad", rec.dist_grad)):
            if dist is None:
                continue
            body = ["# k mu(k)"]
            body += [f"{k:.17g} {mu:.17g}" for k, mu in zip(*dist)]
            (plotdir / f"{rec.run_id}_{suffix}.dat").write_text("\n".join(body) + "\n")
    return {"csv": csv_path, "summary": md_path, "plotdata": plotdir}


def _summary_markdown(records: Sequence[RunRecord]) -> str:
    lines = ["# Run summary", "", "## Regime coverage", ""]
    order = ["m=1:distributional", "m=1:entropy", "m>1:finite_energy",
             "m>1:distributional", "m>1:entropy", "unclassified"]
    by_case: dict[str, list[RunRecord]] = {key: [] for key in order}
    for rec in records:
        label = regime_label(rec.prediction, rec.problem.datum.m)
        by_case.setdefault(label, []).append(rec)
    lines.append("| case | runs | converged | all checks passed |")
    lines.append("| --- | --- | --- | --- |")
    for key in order:
        group = by_case.get(key, [])
        if not group and key == "unclassified":
            continue
        lines.append(f"| {key} | {len(group)} | "
                     f"{sum(r.converged for r in group)} | "
                     f"{sum(r.all_passed for r in group)} |")
    lines += ["", "## Runs", ""]
    lines.append("| run | gamma | p | m | N | delta | M | converged | n_final | checks |")
    lines.append("| --- | --- | --- | --- | --- | --- | --- | --- | --- | --- |")
    for rec in records:
        axes = _problem_axes(rec.problem)
        n_checks = sum(len(g) for g in rec.reports.values())
        lines.append(
            f"| {rec.run_id} | {axes['gamma']:g} | {axes['p']:g} | {axes['m']:g} "
            f"| {int(axes['N'])} | {axes['delta']:g} | {rec.mesh.cells} "
            f"| {str(rec.converged).lower()} | {rec.n_final} | {n_checks} |")
    return "\n".join(lines) + "\n"


def save_records(records: Sequence[RunRecord], path) -> None:
    """Serialize records to JSON, enough to re-emit every output file."""
    payload = []
    for rec in records:
        axes = _problem_axes(rec.problem)
        payload.append({
            "run_id": rec.run_id,
            "axes": axes,
            "M": rec.mesh.cells,
            "grading": rec.mesh.grading,
            "n_final": rec.n_final,
            "converged": rec.converged,
            "truncation_active": rec.truncation_active,
            "rows": _record_rows(rec),
            "dist_u": rec.dist_u,
            "dist_grad": rec.dist_grad,
            "case": regime_label(rec.prediction, rec.problem.datum.m),
            "duration_s": rec.duration_s,
            "failure": rec.failure,
        })
    Path(path).write_text(json.dumps(payload, indent=1, allow_nan=True))


def load_records(path) -> list[dict]:
    return json.loads(Path(path).read_text())


def emit_from_saved(saved: Sequence[dict], out_dir) -> dict[str, Path]:
    """Re-emit output files from :func:`save_records` payloads."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plotdir = out / "plotdata"
    plotdir.mkdir(exist_ok=True)
    csv_path = out / "records.csv"
    lines = [f"# generated {datetime.now(timezone.utc).isoformat()}"]
    lines.append(",".join(CSV_COLUMNS))
    for rec in saved:
        for row in rec["rows"]:
            lines.append(",".join(_fmt(_json_cell(row[col])) for col in CSV_COLUMNS))
    csv_path.write_text("\n".join(lines) + "\n")
    md_lines = ["# Run summary (re-emitted)", "",
                "| run | case | M | converged | n_final |",
                "| --- | --- | --- | --- | --- |"]
    for rec in saved:
        md_lines.append(f"| {rec['run_id']} | {rec['case']} | {rec['M']} "
                        f"| {str(rec['converged']).lower()} | {rec['n_final']} |")
    (out / "summary.md").write_text("\n".join(md_lines) + "\n")
    for rec in saved:
        for suffix in ("u", "grad"):
            dist = rec.get(f"dist_{suffix}")
            if not dist:
                continue
            body = ["# k mu(k)"]
            body += [f"{k:.17g} {mu:.17g}" for k, mu in zip(dist[0], dist[1])]
            (plotdir / f"{rec['run_id']}_{suffix}.dat").write_text("\n".join(body) + "\n")
    return {"csv": csv_path, "summary": out / "summary.md", "plotdata": plotdir}


def _json_cell(value):
    if value is None:
        return math.nan
    return value
