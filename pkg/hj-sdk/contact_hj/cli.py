"""
Command-line runs: load a config, execute one subcommand, write artifacts and
a run manifest.

Exit codes: 0 success (including a no-bracket critical search), 2 invalid
configuration, 3 numerical failure.
"""

import argparse
import logging
import time
from collections.abc import Callable
from pathlib import Path
from typing import Any

import numpy as np
import pydantic
import scipy
import yaml

from . import __version__, export, parallel, run_log
from .characteristics import CharacteristicState, ShootParams, integrate, min_over_characteristics, shoot
from .config import RunConfig, load_config
from .critical import critical_scan, critical_search, mane_value_frozen
from .errors import ConfigValidationError, ContactHJError, NoBracketError, UnsupportedModelError
from .longtime import aubry_set, barrier, representation_check, stationary_solve
from .oracle import run_suite
from .propagator import (
    BIG,
    ValueField,
    backtrack,
    bellman_residual,
    default_window_radius,
    evolve,
    fundamental_solution,
    picard_solve,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


class RunContext:
    """Config, output directory and the artifacts written so far."""

    def __init__(self, config: RunConfig, out_dir: Path):
        self.config = config
        self.out_dir = out_dir
        self.artifacts: list[str] = []
        self.exit_code = EXIT_OK

    def wants(self, fmt: str) -> bool:
        return fmt in self.config.output.formats

    def json(self, name: str, data: Any) -> None:
        if self.wants("json"):
            export.write_json(self.out_dir / name, data)
            self.artifacts.append(name)

    def field_csv(self, name: str, field, model) -> None:
        if self.wants("csv"):
            path = export.write_space_time_csv(self.out_dir / name, field, self.config.output.slice_stride)
            manifest = export.write_field_manifest(path, field, model)
            self.artifacts.extend([name, manifest.name])

    def value_csv(self, name: str, field: ValueField, t: float = 0.0) -> None:
        if self.wants("csv"):
            export.write_value_field_csv(self.out_dir / name, field, t)
            self.artifacts.append(name)


# --- subcommands -------------------------------------------------------------

def _run_evolve(ctx: RunContext) -> dict[str, Any]:
    cfg = ctx.config
    model = cfg.build_model()
    field = evolve(model, cfg.build_phi(), cfg.build_tgrid(), cfg.scheme.window_radius, cfg.scheme.u_rule)
    ctx.field_csv("evolve.csv", field, model)
    report = {
        "final": field.final.values,
        "final_sup_norm": field.final.sup_norm(),
        "bellman_residual": bellman_residual(model, field),
        "window_radius": field.window_radius,
    }
    ctx.json("evolve.json", report)
    return {"final_sup_norm": report["final_sup_norm"], "window_radius": field.window_radius}


def _radius(cfg: RunConfig) -> int:
    if cfg.scheme.window_radius is not None:
        return cfg.scheme.window_radius
    return default_window_radius(cfg.build_grid(), cfg.time.dt)


def _run_fundamental(ctx: RunContext) -> dict[str, Any]:
    cfg = ctx.config
    model = cfg.build_model()
    f = cfg.fundamental
    field = fundamental_solution(model, cfg.build_grid(), f.x0, f.u0, cfg.build_tgrid(), _radius(cfg),
                                 cfg.scheme.u_rule)
    ctx.field_csv("fundamental.csv", field, model)
    path = backtrack(field, f.x0)
    report = {
        "x0": f.x0,
        "u0": f.u0,
        "final": field.final.values,
        "value_at_source": float(field.values[-1, f.x0]),
        "path_to_source": {"nodes": path.nodes, "values": path.values, "velocities": path.velocities},
    }
    ctx.json("fundamental.json", report)
    return {"value_at_source": report["value_at_source"]}


def _run_picard(ctx: RunContext) -> dict[str, Any]:
    cfg = ctx.config
    model = cfg.build_model()
    grid, tgrid, r = cfg.build_grid(), cfg.build_tgrid(), _radius(cfg)
    p, f = cfg.scheme.picard, cfg.fundamental
    field, trace = picard_solve(model, grid, f.x0, f.u0, tgrid, r, p.tol, p.max_iter, p.init_offset)
    reference = fundamental_solution(model, grid, f.x0, f.u0, tgrid, r)
    live = reference.values < BIG / 2
    agreement = float(np.max(np.abs(field.values[live] - reference.values[live])))
    ctx.field_csv("picard.csv", field, model)
    ctx.json("picard_trace.json", {**trace.to_dict(), "ratios": trace.ratios(), "step_mode_agreement": agreement})
    return {"iterations": trace.iterations, "step_mode_agreement": agreement}


def _shoot_params(cfg: RunConfig) -> ShootParams:
    s = cfg.shoot
    return ShootParams(s.p_max, s.n_samples, s.refine_iters, s.eps_hit, s.m_max, s.dt_ode_max)


def _run_characteristics(ctx: RunContext) -> dict[str, Any]:
    cfg = ctx.config
    model = cfg.build_model()
    c = cfg.characteristics
    trajectory = integrate(model, CharacteristicState(c.x0, c.u0, c.p0), c.t, c.n_steps)
    if ctx.wants("csv"):
        export.write_trajectory_csv(ctx.out_dir / "trajectory.csv", trajectory)
        ctx.artifacts.append("trajectory.csv")
    grid = cfg.build_grid()
    shots = {
        str(k): [hit.to_dict() for hit in shoot(model, c.x0, c.u0, grid.node(k), c.t, _shoot_params(cfg))]
        for k in cfg.shoot.targets
    }
    ctx.json("shoot.json", shots)
    return {"final": trajectory.final.as_tuple(), "truncated": trajectory.truncated}


def _run_min_char(ctx: RunContext) -> dict[str, Any]:
    cfg = ctx.config
    model = cfg.build_model()
    phi = cfg.build_phi()
    tgrid = cfg.build_tgrid()
    field = evolve(model, phi, tgrid, cfg.scheme.window_radius)
    rows = []
    for k in cfg.shoot.targets:
        value = min_over_characteristics(model, phi, phi.grid.node(k), tgrid.horizon, _shoot_params(cfg))
        dp = float(field.values[-1, k])
        rows.append({"node": k, "x": phi.grid.node(k), "min_char": value, "evolve": dp, "delta": abs(value - dp)})
    ctx.json("min_char.json", rows)
    return {"max_delta": max((r["delta"] for r in rows), default=0.0)}


def _run_critical(ctx: RunContext) -> dict[str, Any]:
    cfg = ctx.config
    crit = cfg.critical
    model = cfg.build_model()
    dt = cfg.dt_for("critical")
    phi = cfg.build_phi()
    report: dict[str, Any] = {}
    if crit.c_values:
        probes = [phi] + [ValueField.constant(phi.grid, level) for level in crit.probe_levels]
        scan = critical_scan(model, crit.c_values, probes, crit.horizon, dt, cfg.scheme.window_radius,
                             crit.drift_tol, crit.k_guard)
        report["scan"] = scan.to_dict()
    try:
        search = critical_search(model, phi, crit.c_lo, crit.c_hi, crit.horizon, dt, crit.max_bisect,
                                 cfg.scheme.window_radius, crit.drift_tol, crit.k_guard)
    except NoBracketError as e:
        search = e.report
    report["search"] = search.to_dict()
    try:
        report["mane_value_frozen"] = mane_value_frozen(model, 0.0)
    except UnsupportedModelError:
        report["mane_value_frozen"] = None
    ctx.json("critical.json", report)
    return {"c_star": search.c_star, "outcome": search.outcome}


def _stationary(ctx: RunContext, model):
    cfg = ctx.config
    lt = cfg.longtime
    result = stationary_solve(model, cfg.build_phi(), cfg.dt_for("longtime"), lt.stationary_tol, lt.max_steps,
                              cfg.scheme.window_radius, lt.horizon, lt.window, lt.drift_gate)
    if not result.converged:
        ctx.exit_code = EXIT_NUMERICAL
    return result


def _run_stationary(ctx: RunContext) -> dict[str, Any]:
    model = ctx.config.build_model()
    result = _stationary(ctx, model)
    ctx.value_csv("u_star.csv", result.u_star)
    ctx.json("stationary.json", {
        "u_star": result.u_star.values,
        "residuals": {"fixed_point": result.fixed_point_residual},
        "iterations": result.iterations,
        "mode": result.mode,
        "converged": result.converged,
    })
    return {"mode": result.mode, "residual": result.fixed_point_residual, "converged": result.converged}


def _run_aubry(ctx: RunContext) -> dict[str, Any]:
    cfg = ctx.config
    lt = cfg.longtime
    dt = cfg.dt_for("longtime")
    model = cfg.build_model()
    result = _stationary(ctx, model)
    report = aubry_set(model, result.u_star, lt.horizon, lt.window, dt, lt.aubry_tol, cfg.scheme.window_radius,
                       lt.drift_gate)
    deviation = None
    if report.aubry_nodes:
        deviation = representation_check(model, result.u_star, report, lt.horizon, lt.window, dt,
                                         cfg.scheme.window_radius, lt.drift_gate)
    else:
        ctx.exit_code = EXIT_NUMERICAL
    ctx.json("aubry.json", {
        "u_star": result.u_star.values,
        **report.to_dict(),
        "residuals": {"fixed_point": result.fixed_point_residual, "representation": deviation},
    })
    return {"aubry_nodes": len(report.aubry_nodes), "representation_deviation": deviation}


def _run_barrier(ctx: RunContext) -> dict[str, Any]:
    cfg = ctx.config
    lt = cfg.longtime
    model = cfg.build_model()
    field = barrier(model, cfg.build_grid(), lt.x_node, lt.u_value, lt.horizon, lt.window, cfg.dt_for("longtime"),
                    cfg.scheme.window_radius, lt.drift_gate)
    ctx.value_csv("barrier.csv", field, lt.horizon)
    ctx.json("barrier.json", {"x_node": lt.x_node, "u_value": lt.u_value, "barrier": field.values})
    return {"min": float(field.values.min()), "max": float(field.values.max())}


def _run_oracle(ctx: RunContext) -> dict[str, Any]:
    o = ctx.config.oracle
    records = run_suite(o.n_coarse, o.k_steps, o.dt, ctx.config.grid.n, o.n_fine_factor, o.hopf_lax_t)
    rows = [r.to_dict() for r in records]
    ctx.json("oracle.json", rows)
    for r in records:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<40s} delta={r.delta:.3e} tol={r.tolerance:.1e}")
    if not all(r.passed for r in records):
        ctx.exit_code = EXIT_NUMERICAL
    return {"passed": sum(r.passed for r in records), "total": len(records)}


SUBCOMMANDS: dict[str, Callable[[RunContext], dict[str, Any]]] = {
    "evolve": _run_evolve,
    "fundamental": _run_fundamental,
    "picard": _run_picard,
    "characteristics": _run_characteristics,
    "min-char": _run_min_char,
    "critical-value": _run_critical,
    "stationary": _run_stationary,
    "aubry": _run_aubry,
    "barrier": _run_barrier,
    "oracle-check": _run_oracle,
}


# --- orchestration -----------------------------------------------------------

def _versions() -> dict[str, str]:
    return {
        "contact_hj": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
        "pyyaml": yaml.__version__,
    }


def run(subcommand: str, config_path: str | Path, threads: int = 1, out: str | Path | None = None) -> int:
    """
    Execute one subcommand and write its artifacts plus manifest.json.

    Returns:
        Exit status (0, 2 or 3)
    """
    if subcommand not in SUBCOMMANDS:
        logger.error("Unknown subcommand: %s", subcommand)
        return EXIT_INVALID
    run_log.clear()
    parallel.set_threads(threads)
    started = time.perf_counter()
    manifest: dict[str, Any] = {"subcommand": subcommand, "config_path": str(config_path), "versions": _versions()}
    out_dir = Path(out) if out is not None else Path("out")
    try:
        config = load_config(config_path)
        if out is None:
            out_dir = Path(config.output.directory)
        manifest["config"] = config.model_dump(mode="json")
        ctx = RunContext(config, out_dir)
        logger.info("Running %s with %s", subcommand, config_path)
        manifest["summary"] = SUBCOMMANDS[subcommand](ctx)
        manifest["artifacts"] = ctx.artifacts
        code = ctx.exit_code
        manifest["status"] = "ok" if code == EXIT_OK else "numerical_failure"
    except ConfigValidationError as e:
        logger.error("%s", e)
        manifest.update(status="invalid_config", error=str(e), offending_keys=e.offending_keys)
        code = e.exit_code
    except ContactHJError as e:
        logger.error("%s", e)
        manifest.update(status="numerical_failure" if e.exit_code == EXIT_NUMERICAL else "invalid_config",
                        error=str(e))
        code = e.exit_code

    entries = run_log.list_entries()
    manifest["warnings"] = [e for e in entries if e["event_type"] != "no_bracket"]
    manifest["events"] = entries
    manifest["exit_code"] = code
    # the only key allowed to differ between identical runs
    manifest["runtime"] = {"elapsed_seconds": round(time.perf_counter() - started, 3), "threads": threads}
    export.write_json(out_dir / "manifest.json", manifest)
    logger.info("Finished %s: exit %d, artifacts in %s", subcommand, code, out_dir)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Implicit Lax-Oleinik solver for u-dependent Hamilton-Jacobi equations")
    parser.add_argument("subcommand", choices=sorted(SUBCOMMANDS), help="Operation to run")
    parser.add_argument("--config", required=True, help="Path to the run config (JSON)")
    parser.add_argument("--threads", type=int, default=1, help="Worker threads for data-parallel sections")
    parser.add_argument("--out", help="Output directory (overrides output.directory)")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    return run(args.subcommand, args.config, args.threads, args.out)
