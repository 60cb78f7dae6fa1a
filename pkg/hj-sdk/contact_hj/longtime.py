"""
Large-time behaviour of the discrete semigroup: liminf fields, stationary
(weak KAM) fixed points, the barrier B(x, u; y) and the projected Aubry set.

Every long run passes a boundedness gate: if the sup-norm overflows or the
trailing mean drifts faster than drift_gate the operation refuses with
DivergenceError instead of returning a meaningless field.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import run_log
from .critical import K_GUARD, drift_slope
from .domain import TimeGrid
from .errors import DivergenceError
from .hamiltonian import HamiltonianModel
from .propagator import BIG, ValueField, data_lipschitz, default_window_radius, propagate, step

logger = logging.getLogger(__name__)

DRIFT_GATE = 1e-2
AUBRY_ESCALATION = 8
SOURCE_BATCH = 16


@dataclass
class LiminfResult:
    field: ValueField
    oscillation: np.ndarray
    drift_rate: float
    sup_norm: float


@dataclass
class StationaryResult:
    u_star: ValueField
    fixed_point_residual: float
    iterations: int
    mode: str
    converged: bool = True


@dataclass
class AubryReport:
    barrier_diag: np.ndarray
    aubry_nodes: list[int] = field(default_factory=list)
    u_on_aubry: list[float] = field(default_factory=list)
    tol_used: float = 0.0
    flagged: bool = False

    def to_dict(self) -> dict:
        return {
            "barrier_diag": self.barrier_diag.tolist(),
            "aubry_nodes": list(self.aubry_nodes),
            "u_on_aubry": list(self.u_on_aubry),
            "tol_used": self.tol_used,
            "flagged": self.flagged,
        }


def _radius(grid, dt, window_radius, phi_values=None):
    if window_radius is not None:
        return window_radius
    if phi_values is None:
        return default_window_radius(grid, dt)
    return default_window_radius(grid, dt, data_lipschitz(ValueField(grid, phi_values)))


def _window_extrema(model, grid, batch, horizon_T, window_W, dt, window_radius,
                    drift_gate=DRIFT_GATE, k_guard=K_GUARD):
    """
    Pointwise min and max of the iterates over t in [T - W, T], with the
    boundedness gate applied on the way.

    Raises:
        DivergenceError: On sup-norm overflow or trailing drift above drift_gate
    """
    if horizon_T < 2 * window_W:
        raise ValueError(f"horizon {horizon_T} must be at least twice the window {window_W}")
    tgrid = TimeGrid.from_horizon(horizon_T, dt)
    first = tgrid.steps - int(round(window_W / dt))
    lo = np.full(batch.shape, np.inf)
    hi = np.full(batch.shape, -np.inf)
    times, means = [], []
    sup = 0.0
    for k, f, _ in propagate(model, grid, batch, dt, tgrid.steps, window_radius):
        live = f[f < BIG / 2]
        if live.size:
            sup = float(np.max(np.abs(live)))
            if sup > k_guard:
                raise DivergenceError(float("nan"), sup, f"sup-norm above {k_guard:g} at t={k * dt:g}")
            if k * dt >= horizon_T / 2:
                times.append(k * dt)
                means.append(float(np.mean(live)))
        if k >= first:
            lo = np.minimum(lo, f)
            hi = np.maximum(hi, f)
    drift = drift_slope(times, means)
    if abs(drift) > drift_gate:
        raise DivergenceError(drift, sup, f"trailing drift above {drift_gate:g}")
    return lo, hi, drift, sup


def liminf_field(model: HamiltonianModel, phi: ValueField, horizon_T: float, window_W: float, dt: float,
                 window_radius: int | None = None, drift_gate: float = DRIFT_GATE,
                 k_guard: float = K_GUARD) -> LiminfResult:
    """Pointwise min of T_t phi over t in [T - W, T] plus the window oscillation."""
    grid = phi.grid
    r = _radius(grid, dt, window_radius, phi.values)
    lo, hi, drift, sup = _window_extrema(model, grid, phi.values, horizon_T, window_W, dt, r, drift_gate, k_guard)
    return LiminfResult(ValueField(grid, lo), hi - lo, drift, sup)


def stationary_solve(model: HamiltonianModel, phi_init: ValueField, dt: float, stationary_tol: float = 1e-6,
                     max_steps: int = 200_000, window_radius: int | None = None, horizon_T: float = 50.0,
                     window_W: float = 10.0, drift_gate: float = DRIFT_GATE) -> StationaryResult:
    """
    Discrete weak KAM solution.

    For models strictly increasing in u the step map is iterated until
    ||u^{k+1} - u^k|| <= stationary_tol * dt; other models fall back to the
    liminf window. Running out of max_steps returns a flagged partial result.
    """
    grid = phi_init.grid
    r = _radius(grid, dt, window_radius, phi_init.values)
    target = stationary_tol * dt
    if model.is_strictly_increasing_in_u():
        mode = "fixed_point_iteration"
        u = phi_init.copy()
        converged = False
        iterations = 0
        for iterations in range(1, max_steps + 1):
            nxt, _ = step(model, u, dt, r)
            delta = float(np.max(np.abs(nxt.values - u.values)))
            u = nxt
            if delta <= target:
                converged = True
                break
    else:
        mode = "liminf_window"
        u = liminf_field(model, phi_init, horizon_T, window_W, dt, r, drift_gate).field
        iterations = TimeGrid.from_horizon(horizon_T, dt).steps
    after, _ = step(model, u, dt, r)
    residual = float(np.max(np.abs(after.values - u.values)))
    if mode == "liminf_window":
        converged = residual <= target
    if not converged:
        logger.warning("Stationary solve not converged (%s): residual %.3e after %d steps", mode, residual, iterations)
        run_log.append("stationary_not_converged", {"mode": mode, "residual": residual, "iterations": iterations})
    else:
        logger.info("Stationary solution (%s) after %d steps, residual %.3e", mode, iterations, residual)
    return StationaryResult(u, residual, iterations, mode, converged)


def weak_kam_check(model: HamiltonianModel, u: ValueField, dt: float, steps: int,
                   window_radius: int | None = None) -> float:
    """max over k <= steps of ||T_{k dt} u - u||."""
    r = _radius(u.grid, dt, window_radius, u.values)
    worst = 0.0
    for _, f, _ in propagate(model, u.grid, u.values, dt, steps, r):
        worst = max(worst, float(np.max(np.abs(f - u.values))))
    return worst


def _pinned_batch(grid, sources, levels):
    batch = np.full((len(sources), grid.n), BIG)
    batch[np.arange(len(sources)), sources] = levels
    return batch


def _pinned_liminf(model, grid, sources, levels, horizon_T, window_W, dt, window_radius, drift_gate=DRIFT_GATE):
    """liminf of h_{y,u_y} over the window for each (source, level); shape (len(sources), n)."""
    sources = np.asarray(sources, dtype=int)
    levels = np.asarray(levels, dtype=float)
    out = np.empty((sources.size, grid.n))
    for first in range(0, sources.size, SOURCE_BATCH):
        sl = slice(first, first + SOURCE_BATCH)
        lo, _, _, _ = _window_extrema(model, grid, _pinned_batch(grid, sources[sl], levels[sl]),
                                      horizon_T, window_W, dt, window_radius, drift_gate)
        out[sl] = lo
    return out


def barrier(model: HamiltonianModel, grid, x_node: int, u_value: float, horizon_T: float, window_W: float,
            dt: float, window_radius: int | None = None, drift_gate: float = DRIFT_GATE) -> ValueField:
    """B(x, u; y) for every node y: liminf estimate of h_{x,u}(y, oo) - u."""
    r = _radius(grid, dt, window_radius)
    lo = _pinned_liminf(model, grid, [x_node], [u_value], horizon_T, window_W, dt, r, drift_gate)[0]
    return ValueField(grid, lo - u_value)


def aubry_set(model: HamiltonianModel, u_star: ValueField, horizon_T: float, window_W: float, dt: float,
              aubry_tol: float = 1e-2, window_radius: int | None = None,
              drift_gate: float = DRIFT_GATE) -> AubryReport:
    """
    Diagonal barrier B(x, u_star(x); x) at every node and the nodes where it
    vanishes within aubry_tol. An empty set doubles the tolerance up to 8x
    before the report is flagged.
    """
    grid = u_star.grid
    r = _radius(grid, dt, window_radius, u_star.values)
    nodes = np.arange(grid.n)
    lim = _pinned_liminf(model, grid, nodes, u_star.values, horizon_T, window_W, dt, r, drift_gate)
    diag = lim[nodes, nodes] - u_star.values

    tol = aubry_tol
    members = np.flatnonzero(np.abs(diag) <= tol)
    while members.size == 0 and tol < AUBRY_ESCALATION * aubry_tol:
        tol *= 2
        logger.warning("Empty Aubry set, escalating tolerance to %g", tol)
        run_log.append("aubry_tolerance_escalation", {"tol": tol, "min_abs_diag": float(np.min(np.abs(diag)))})
        members = np.flatnonzero(np.abs(diag) <= tol)
    report = AubryReport(diag, [int(i) for i in members], [float(u_star.values[i]) for i in members], tol)
    if members.size == 0:
        report.flagged = True
        logger.warning("Aubry set still empty at tolerance %g", tol)
    return report


def representation_check(model: HamiltonianModel, u_star: ValueField, aubry: AubryReport, horizon_T: float,
                         window_W: float, dt: float, window_radius: int | None = None,
                         drift_gate: float = DRIFT_GATE) -> float:
    """||min over Aubry nodes y of (B(y, u_star(y); .) + u_star(y)) - u_star||."""
    if not aubry.aubry_nodes:
        raise ValueError("representation_check needs a non-empty Aubry set")
    grid = u_star.grid
    r = _radius(grid, dt, window_radius, u_star.values)
    nodes = np.asarray(aubry.aubry_nodes, dtype=int)
    lim = _pinned_liminf(model, grid, nodes, u_star.values[nodes], horizon_T, window_W, dt, r, drift_gate)
    represented = lim.min(axis=0)
    return float(np.max(np.abs(represented - u_star.values)))


def aubry_level(model: HamiltonianModel, grid, x_node: int, u_lo: float, u_hi: float, horizon_T: float,
                window_W: float, dt: float, iters: int = 30, window_radius: int | None = None,
                drift_gate: float = DRIFT_GATE) -> float:
    """
    The level u_x with B(x, u_x; x) = 0, found by bisection on u.

    Raises:
        ValueError: If the diagonal barrier does not change sign on [u_lo, u_hi]
    """
    r = _radius(grid, dt, window_radius)

    def diag(u: float) -> float:
        return float(_pinned_liminf(model, grid, [x_node], [u], horizon_T, window_W, dt, r, drift_gate)[0, x_node] - u)

    b_lo, b_hi = diag(u_lo), diag(u_hi)
    if b_lo * b_hi > 0:
        raise ValueError(f"diagonal barrier has one sign on [{u_lo}, {u_hi}]: {b_lo:.3e}, {b_hi:.3e}")
    a, b = u_lo, u_hi
    for _ in range(iters):
        mid = 0.5 * (a + b)
        b_mid = diag(mid)
        if b_mid == 0:
            return mid
        if (b_mid > 0) == (b_lo > 0):
            a, b_lo = mid, b_mid
        else:
            b = mid
    return 0.5 * (a + b)
