"""Command-line entry point: config files in, solves and reports out.

Subcommands: ``solve`` (single run plus outputs), ``sweep`` (Cartesian
parameter sweep), ``verify`` (run every checker and exit nonzero on any
failure; can also audit a previously written solution file), ``mms``
(mesh refinement study) and ``report`` (re-emit outputs from stored
records).  Configuration lives in an INI-style file; only the mesh size
and the output directory can be overridden from the command line, so a
config file pins a reproducible run.

Exit codes: 0 success, 1 failed check (verify), 2 solver non-convergence,
3 configuration errors.
"""

from __future__ import annotations

import argparse
import configparser
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .analysis import (
    check_bg_estimate,
    check_entropy_inequality,
    check_lemma_estimate,
    check_linfty_bound,
    check_truncation_energy,
    check_weighted_energy,
    verify_marcinkiewicz_lemma,
)
from .experiments import (
    ALL_CHECKS,
    CheckSettings,
    MeshSpec,
    SweepSpec,
    emit_from_saved,
    emit_outputs,
    load_records,
    mesh_refinement_study,
    run_single,
    run_sweep,
    save_records,
)
from .grid import (
    grid_function,
    quadrature_weights,
    read_grid_function,
    write_grid_function,
)
from .problem import (
    BumpDatum,
    CoefficientSpec,
    ConstantDatum,
    DatumSpec,
    NoAbsorption,
    PowerAbsorption,
    ProblemSpec,
    RadialPowerDatum,
    SingularAbsorption,
    datum_eval,
)
from .solver import SolverConfig, residual_norm

__all__ = ["Config", "ConfigError", "parse_config", "dispatch", "main"]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_NOT_CONVERGED = 2
EXIT_CONFIG = 3

_KNOWN_KEYS = {
    "problem": {"N", "R", "gamma", "alpha", "beta", "p", "sigma", "datum",
                "amplitude", "delta", "center", "width", "m"},
    "mesh": {"M", "grading"},
    "solver": {"picard_tol", "picard_max", "newton_tol", "newton_max", "n_max",
               "face_scheme", "eps_p", "singular_margin"},
    "checks": {"enable", "tolerance", "lambdas", "k_levels", "tail_tolerance"},
    "output": {"directory"},
    "sweep": {"gamma", "p", "m", "N", "delta", "M", "parallelism"},
    "mms": {"M_list", "amplitude"},
}


class ConfigError(Exception):
    """Carries every validation violation found in a config file."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


@dataclass(frozen=True)
class Config:
    problem: ProblemSpec
    mesh: MeshSpec
    solver: SolverConfig
    checks: tuple[str, ...]
    settings: CheckSettings
    output_dir: str
    sweep_axes: dict[str, tuple[float, ...]]
    sweep_parallelism: int
    mms_cells: tuple[int, ...]
    mms_amplitude: float


def _get(parser, section, key, cast, default, errors, positive=False):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        val = cast(raw)
    except ValueError:
        errors.append(f"[{section}] {key}: cannot parse {raw!r}")
        return default
    if positive and not (val > 0):
        errors.append(f"[{section}] {key}: must be positive, got {val}")
        return default
    return val


def _float_list(raw: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in raw.replace(",", " ").split())


def parse_config(text: str) -> Config:
    """Parse and validate a sectioned key-value config.

    All violations are collected and raised together in a ConfigError,
    not just the first one found.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys like N, R, M are case-significant
    errors: list[str] = []
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigError([f"syntax: {err}"]) from err

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            errors.append(f"unknown section [{section}]")
            continue
        for key in parser.options(section):
            if key not in _KNOWN_KEYS[section]:
                errors.append(f"unknown key {key!r} in section [{section}]")

    pr = "problem"
    N = _get(parser, pr, "N", int, 3, errors)
    R = _get(parser, pr, "R", float, 1.0, errors, positive=True)
    gamma = _get(parser, pr, "gamma", float, 0.0, errors)
    alpha = _get(parser, pr, "alpha", float, 1.0, errors, positive=True)
    beta = _get(parser, pr, "beta", float, None, errors)
    p = _get(parser, pr, "p", float, None, errors)
    sigma = _get(parser, pr, "sigma", float, None, errors)
    datum_kind = _get(parser, pr, "datum", str, "constant", errors)
    amplitude = _get(parser, pr, "amplitude", float, 1.0, errors)
    delta = _get(parser, pr, "delta", float, None, errors)
    center = _get(parser, pr, "center", float, 0.5, errors)
    width = _get(parser, pr, "width", float, 0.1, errors)
    m = _get(parser, pr, "m", float, 1.0, errors)

    if N < 3:
        errors.append(f"[problem] N: dimension must be >= 3, got {N}")
    if gamma < 0:
        errors.append(f"[problem] gamma: must be nonnegative, got {gamma}")
    if beta is None:
        beta = alpha
    if beta < alpha:
        errors.append(f"[problem] beta={beta} must be >= alpha={alpha}")
    if p is not None and sigma is not None:
        errors.append("[problem] lower-order term must be exactly one kind: "
                      "give p (power) or sigma (singular), not both")
    if p is not None and not (p > 0):
        errors.append(f"[problem] p: must be positive, got {p}")
    if sigma is not None and not (sigma > 0):
        errors.append(f"[problem] sigma: must be positive, got {sigma}")
    if m < 1:
        errors.append(f"[problem] m: Lebesgue class must be >= 1, got {m}")

    datum_kind = datum_kind.strip().lower()
    family = None
    if datum_kind == "constant":
        family = ConstantDatum(amplitude)
    elif datum_kind in ("radial_power", "radialpower"):
        if delta is None:
            errors.append("[problem] datum=radial_power requires delta")
        elif not (delta > 0):
            errors.append(f"[problem] delta: must be positive, got {delta}")
        else:
            family = RadialPowerDatum(amplitude, delta)
            if delta * m >= N:
                errors.append(
                    f"[problem] datum r^(-{delta}) is not in L^{m} of the "
                    f"{N}-ball (needs delta*m < N)")
    elif datum_kind == "bump":
        if width <= 0:
            errors.append(f"[problem] width: must be positive, got {width}")
        else:
            family = BumpDatum(amplitude, center, width)
    else:
        errors.append(f"[problem] datum: unknown family {datum_kind!r}")

    if sigma is not None and amplitude < 0:
        errors.append("[problem] singular absorption requires a nonnegative datum")

    me = "mesh"
    M = _get(parser, me, "M", int, 256, errors)
    grading = _get(parser, me, "grading", float, 1.0, errors)
    if M < 8:
        errors.append(f"[mesh] M: cell count must be >= 8, got {M}")
    if not (1.0 <= grading <= 4.0):
        errors.append(f"[mesh] grading: must lie in [1, 4], got {grading}")

    so = "solver"
    picard_tol = _get(parser, so, "picard_tol", float, 1e-8, errors, positive=True)
    picard_max = _get(parser, so, "picard_max", int, 200, errors, positive=True)
    newton_tol = _get(parser, so, "newton_tol", float, 1e-10, errors, positive=True)
    newton_max = _get(parser, so, "newton_max", int, 50, errors, positive=True)
    n_max = _get(parser, so, "n_max", int, 2**30, errors, positive=True)
    face_scheme = _get(parser, so, "face_scheme", str, "upwind", errors).strip()
    eps_p = _get(parser, so, "eps_p", float, 1e-10, errors, positive=True)
    margin = _get(parser, so, "singular_margin", float, 1e-12, errors, positive=True)
    if face_scheme not in ("upwind", "arithmetic"):
        errors.append(f"[solver] face_scheme: must be upwind or arithmetic, "
                      f"got {face_scheme!r}")

    ch = "checks"
    enable_raw = _get(parser, ch, "enable", str, "all", errors)
    tolerance = _get(parser, ch, "tolerance", float, 1e-4, errors, positive=True)
    lambdas = _get(parser, ch, "lambdas", _float_list, (1.25, 2.0, 4.0), errors)
    k_count = _get(parser, ch, "k_levels", int, 8, errors, positive=True)
    tail_tol = _get(parser, ch, "tail_tolerance", float, 0.15, errors, positive=True)
    if enable_raw.strip().lower() == "all":
        enabled = ALL_CHECKS
    else:
        enabled = tuple(tok.strip() for tok in enable_raw.split(",") if tok.strip())
        for tok in enabled:
            if tok not in ALL_CHECKS:
                errors.append(f"[checks] enable: unknown checker {tok!r} "
                              f"(known: {', '.join(ALL_CHECKS)})")
    for lam in lambdas:
        if lam <= 1.0:
            errors.append(f"[checks] lambdas: every value must exceed 1, got {lam}")

    output_dir = _get(parser, "output", "directory", str, "out", errors)

    axes: dict[str, tuple[float, ...]] = {}
    parallelism = 1
    if parser.has_section("sweep"):
        for key in parser.options("sweep"):
            if key == "parallelism":
                parallelism = _get(parser, "sweep", "parallelism", int, 1, errors,
                                   positive=True)
            elif key in _KNOWN_KEYS["sweep"]:
                try:
                    axes[key] = _float_list(parser.get("sweep", key))
                except ValueError:
                    errors.append(f"[sweep] {key}: cannot parse value list")

    mms_cells = _get(parser, "mms", "M_list", lambda s: tuple(
        int(tok) for tok in _float_list(s)), (64, 128, 256), errors)
    mms_amplitude = _get(parser, "mms", "amplitude", float, 1.0, errors)

    if errors:
        raise ConfigError(errors)

    lower = NoAbsorption()
    if p is not None:
        lower = PowerAbsorption(p)
    elif sigma is not None:
        lower = SingularAbsorption(sigma)

    try:
        problem = ProblemSpec(
            dimension=N, radius=R,
            coefficient=CoefficientSpec(alpha=alpha, beta=beta, gamma=gamma),
            lower=lower, datum=DatumSpec(family, m),
        )
        solver = SolverConfig(picard_tol=picard_tol, picard_max=picard_max,
                              newton_tol=newton_tol, newton_max=newton_max,
                              n_max=n_max, eps_p=eps_p, singular_margin=margin,
                              face_scheme=face_scheme)
    except ValueError as err:
        raise ConfigError([str(err)]) from err

    settings = CheckSettings(tolerance=tolerance, lambdas=tuple(lambdas),
                             truncation_k_count=k_count, tail_tolerance=tail_tol)
    return Config(problem=problem, mesh=MeshSpec(M, grading), solver=solver,
                  checks=enabled, settings=settings, output_dir=output_dir,
                  sweep_axes=axes, sweep_parallelism=parallelism,
                  mms_cells=mms_cells, mms_amplitude=mms_amplitude)


def _print_reports(record) -> None:
    for name, group in sorted(record.reports.items()):
        for rep in group:
            params = ",".join(f"{k}={v:.4g}" for k, v in rep.params)
            status = "pass" if rep.passed else "FAIL"
            print(f"  [{status}] {rep.name}({params}) lhs={rep.lhs:.6e} "
                  f"rhs={rep.rhs:.6e} slack={rep.relative_slack:.3e}")
    if record.marcinkiewicz is not None and record.marcinkiewicz.applicable:
        mk = record.marcinkiewicz
        status = "pass" if mk.passed else "FAIL"
        print(f"  [{status}] marcinkiewicz_lemma predicted={mk.predicted:.4f} "
              f"measured={mk.measured:.4f}")
    for name, reason in sorted(record.skipped.items()):
        print(f"  [skip] {name}: {reason}")


def _cmd_solve(config: Config, out_dir: Path) -> int:
    record = run_single(config.problem, config.mesh, config.solver,
                        config.checks, config.settings)
    out_dir.mkdir(parents=True, exist_ok=True)
    if record.solution is not None:
        write_grid_function(record.solution, out_dir / "solution.dat",
                            extra={"n_final": record.n_final})
    emit_outputs([record], out_dir)
    save_records([record], out_dir / "records.json")
    _print_reports(record)
    print(f"converged={record.converged} n_final={record.n_final} "
          f"residual={record.residual_inf:.3e}")
    return EXIT_OK if record.converged else EXIT_NOT_CONVERGED


def _cmd_sweep(config: Config, out_dir: Path) -> int:
    sweep = SweepSpec(base=config.problem, mesh=config.mesh, axes=config.sweep_axes,
                      cfg=config.solver, checks=config.checks,
                      settings=config.settings, parallelism=config.sweep_parallelism)
    records = run_sweep(sweep)
    emit_outputs(records, out_dir)
    save_records(records, out_dir / "records.json")
    bad = [rec for rec in records if not rec.converged]
    print(f"{len(records)} runs, {len(records) - len(bad)} converged, "
          f"outputs in {out_dir}")
    return EXIT_NOT_CONVERGED if bad else EXIT_OK


def _cmd_verify(config: Config, out_dir: Path, solution_path: str | None) -> int:
    if solution_path is None:
        record = run_single(config.problem, config.mesh, config.solver,
                            ALL_CHECKS, config.settings)
        _print_reports(record)
        if not record.converged:
            print("solver did not converge")
            return EXIT_NOT_CONVERGED
        return EXIT_OK if record.all_passed else EXIT_CHECK_FAILED
    reports, ok = _verify_solution_file(config, solution_path)
    for name, passed, detail in reports:
        print(f"  [{'pass' if passed else 'FAIL'}] {name} {detail}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _verify_solution_file(config: Config, solution_path: str):
    """Re-run every applicable checker against a stored solution."""
    u, extra = read_grid_function(solution_path)
    grid = u.grid
    spec = config.problem
    if (grid.N, grid.M) != (spec.dimension, config.mesh.cells) or \
            not math.isclose(grid.R, spec.radius) or \
            not math.isclose(grid.grading, config.mesh.grading):
        raise ConfigError([
            f"solution file mesh (N={grid.N}, R={grid.R}, M={grid.M}, "
            f"grading={grid.grading}) does not match config "
            f"(N={spec.dimension}, R={spec.radius}, M={config.mesh.cells}, "
            f"grading={config.mesh.grading})"])
    w = quadrature_weights(grid)
    f_nodal = grid_function(grid, lambda r: datum_eval(spec.datum, r))
    tol = config.settings.tolerance
    u_max = u.max_abs()
    ks = np.geomspace(0.01 * u_max, 2.0 * u_max, config.settings.truncation_k_count) \
        if u_max > 0 else np.array([1.0])

    results: list[tuple[str, bool, str]] = []
    n_final = int(extra.get("n_final", config.solver.n_max))
    res = residual_norm(grid, spec, u, n_final, f_values=f_nodal,
                        scheme=config.solver.face_scheme)
    res_ok = res <= config.solver.newton_tol * (1.0 + f_nodal.max_abs()) * 10.0
    results.append(("residual", res_ok, f"|r|={res:.3e}"))

    reports = []
    if isinstance(spec.lower, PowerAbsorption):
        reports.append(check_lemma_estimate(u, f_nodal, spec.lower.p, spec.datum.m, w, tol))
        ts = np.unique(np.array(config.settings.t_fractions) * u_max)
        reports.extend(check_bg_estimate(u, f_nodal, spec.lower.p, ts, w, tol))
    for lam in config.settings.lambdas:
        reports.append(check_weighted_energy(u, f_nodal, spec.coefficient.gamma,
                                             lam, spec.coefficient.alpha, w, tol))
    reports.extend(check_truncation_energy(u, f_nodal, spec.coefficient.gamma,
                                           spec.coefficient.alpha, ks, w, tol))
    if isinstance(spec.lower, SingularAbsorption):
        reports.append(check_linfty_bound(u, spec.lower, f_nodal))
    ent_ks = np.geomspace(0.01 * u_max, 2.0 * u_max, config.settings.entropy_k_count) \
        if u_max > 0 else np.array([1.0])
    reports.extend(check_entropy_inequality(u, spec, None, ent_ks, w, tol,
                                            f_values=f_nodal))
    for rep in reports:
        params = ",".join(f"{k}={v:.4g}" for k, v in rep.params)
        results.append((f"{rep.name}({params})", rep.passed,
                        f"lhs={rep.lhs:.6e} rhs={rep.rhs:.6e}"))
    mk = verify_marcinkiewicz_lemma(u, w, config.settings.tail_tolerance)
    if mk.applicable:
        results.append(("marcinkiewicz_lemma", mk.passed,
                        f"predicted={mk.predicted:.4f} measured={mk.measured:.4f}"))
    ok = all(passed for _, passed, _ in results)
    return results, ok


def _cmd_mms(config: Config, out_dir: Path) -> int:
    spec = config.problem
    amp = config.mms_amplitude
    radius = spec.radius

    def u_star(r):
        return amp * (1.0 - (r / radius) ** 2)

    study = mesh_refinement_study(spec, u_star, config.mms_cells, config.solver,
                                  grading=config.mesh.grading)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["cells,error,order"]
    for row in study.rows:
        lines.append(f"{row.cells},{row.error!r},{row.order!r}")
        print(f"  M={row.cells:5d}  error={row.error:.6e}  order={row.order:.3f}")
    (out_dir / "mms.csv").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def _cmd_report(config: Config, out_dir: Path) -> int:
    records_path = out_dir / "records.json"
    if not records_path.exists():
        print(f"no stored records at {records_path}", file=sys.stderr)
        return EXIT_CONFIG
    emit_from_saved(load_records(records_path), out_dir)
    print(f"re-emitted outputs in {out_dir}")
    return EXIT_OK


def dispatch(command: str, config: Config, solution_path: str | None = None,
             mesh_override: int | None = None,
             output_override: str | None = None) -> int:
    """Route a parsed config to its command implementation."""
    if mesh_override is not None:
        if mesh_override < 8:
            print(f"mesh override must be >= 8, got {mesh_override}", file=sys.stderr)
            return EXIT_CONFIG
        config = replace(config, mesh=replace(config.mesh, cells=mesh_override))
    out_dir = Path(output_override or config.output_dir)
    try:
        if command == "solve":
            return _cmd_solve(config, out_dir)
        if command == "sweep":
            return _cmd_sweep(config, out_dir)
        if command == "verify":
            return _cmd_verify(config, out_dir, solution_path)
        if command == "mms":
            return _cmd_mms(config, out_dir)
        if command == "report":
            return _cmd_report(config, out_dir)
    except ConfigError as err:
        for violation in err.violations:
            print(f"config error: {violation}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"unknown command {command!r}", file=sys.stderr)
    return EXIT_CONFIG


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="degelab",
        description="Radial solver and estimate checker for elliptic problems "
                    "with degenerate coercivity.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (("solve", "solve one problem and write outputs"),
                      ("sweep", "run a parameter sweep"),
                      ("verify", "run all checkers; nonzero exit on failure"),
                      ("mms", "manufactured-solution refinement study"),
                      ("report", "re-emit outputs from stored records")):
        cmd = sub.add_parser(name, help=doc)
        cmd.add_argument("config", help="path to the INI config file")
        cmd.add_argument("-M", "--mesh-size", type=int, default=None,
                         help="override the mesh cell count")
        cmd.add_argument("-o", "--output", default=None,
                         help="override the output directory")
        if name == "verify":
            cmd.add_argument("--solution", default=None,
                             help="audit this stored solution file instead of solving")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text()
    except OSError as err:
        print(f"cannot read config: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = parse_config(text)
    except ConfigError as err:
        for violation in err.violations:
            print(f"config error: {violation}", file=sys.stderr)
        return EXIT_CONFIG

    return dispatch(args.command, config,
                    solution_path=getattr(args, "solution", None),
                    mesh_override=args.mesh_size, output_override=args.output)


if __name__ == "__main__":
    sys.exit(main())
