"""
Discrete implicit Lax-Oleinik propagation.

One time step replaces the infimum over curves by a minimum over grid-node
jumps inside a search window:

    out(i) = min_j [ f(j) + dt * L(x_j, f(j), (x_i - x_j) / dt) ]

with the value slot of L read at the departure node (explicit rule) or at
the mean of departure and arrival values (midpoint rule). Pinned data is
encoded with the BIG sentinel and excluded from the minimization.

The same recursion with the value slot frozen to a previous space-time
field gives one Picard iterate; picard_solve repeats it to a fixed point.
"""

import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import parallel, run_log
from .domain import PeriodicGrid, TimeGrid
from .errors import MalformedFieldError, PicardNonConvergenceError, StabilityError
from .hamiltonian import HamiltonianModel

logger = logging.getLogger(__name__)

BIG = 1e12
STABILITY_BOUND = 0.5
MIDPOINT_SWEEPS = 5
# evolve warns when spacing/dt exceeds this fraction of Lip(phi)
QUANTUM_RATIO = 0.5
U_RULES = ("explicit", "midpoint")


# --- data types --------------------------------------------------------------

@dataclass
class ValueField:
    """Values on the nodes of a periodic grid."""
    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n,):
            raise ValueError(f"field has shape {self.values.shape}, grid has {self.grid.n} nodes")

    @classmethod
    def constant(cls, grid: PeriodicGrid, value: float) -> "ValueField":
        return cls(grid, np.full(grid.n, float(value)))

    @classmethod
    def from_function(cls, grid: PeriodicGrid, fn) -> "ValueField":
        return cls(grid, np.broadcast_to(fn(grid.nodes), (grid.n,)).astype(float))

    def finite_mask(self) -> np.ndarray:
        return self.values < BIG / 2

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def copy(self) -> "ValueField":
        return ValueField(self.grid, self.values.copy())


@dataclass
class SpaceTimeField:
    """
    Every slice of an evolution plus the argmin layer of each step.

    values[k, i] is the value at node i, time k*dt. argmin[k, i] (k >= 1) is
    the departure node of the minimizing jump into (i, k); argmin[0] and
    unreachable entries hold -1.
    """
    grid: PeriodicGrid
    tgrid: TimeGrid
    values: np.ndarray
    argmin: np.ndarray
    window_radius: int
    u_rule: str = "explicit"
    warnings: list[dict[str, Any]] = field(default_factory=list)

    def slice(self, k: int) -> ValueField:
        return ValueField(self.grid, self.values[k].copy())

    @property
    def initial(self) -> ValueField:
        return self.slice(0)

    @property
    def final(self) -> ValueField:
        return self.slice(self.tgrid.steps)

    def scheme(self) -> dict[str, Any]:
        return {
            "n": self.grid.n,
            "length": self.grid.length,
            "dt": self.tgrid.dt,
            "steps": self.tgrid.steps,
            "window_radius": self.window_radius,
            "u_rule": self.u_rule,
            "big": BIG,
        }


@dataclass
class MinimizerPath:
    """
    A discrete calibrated curve recovered from argmin pointers.

    nodes and values have one entry per time index 0..K; velocities have one
    entry per step (the jump from t_k to t_{k+1}).
    """
    grid: PeriodicGrid
    dt: float
    nodes: np.ndarray
    values: np.ndarray
    velocities: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.nodes.size) * self.dt

    def lifted_positions(self) -> np.ndarray:
        """Positions on the universal cover, starting at the first node."""
        x0 = self.grid.node(int(self.nodes[0]))
        return x0 + np.concatenate([[0.0], np.cumsum(self.velocities * self.dt)])

    def action_defect(self, model: HamiltonianModel) -> float:
        """Max |value increment - dt*L| over the links (explicit rule)."""
        if self.velocities.size == 0:
            return 0.0
        x = self.grid.nodes[self.nodes[:-1]]
        increments = np.diff(self.values)
        costs = self.dt * model.eval_L(x, self.values[:-1], self.velocities)
        return float(np.max(np.abs(increments - costs)))


@dataclass
class PicardTrace:
    """Sup-norm gaps between consecutive Picard iterates."""
    iterates: list[float] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0

    def ratios(self) -> list[float]:
        g = self.iterates
        return [g[k + 1] / g[k] if g[k] > 0 else 0.0 for k in range(len(g) - 1)]

    def to_dict(self) -> dict[str, Any]:
        return {"iterates": list(self.iterates), "converged": self.converged, "iterations": self.iterations}


# --- scheme checks -----------------------------------------------------------

def check_stability(model: HamiltonianModel, dt: float) -> None:
    """
    Raises:
        StabilityError: If lambda*dt > 0.5
    """
    lam = model.lipschitz_constant()
    if lam * dt > STABILITY_BOUND:
        raise StabilityError(lam, dt, STABILITY_BOUND)


def default_window_radius(grid: PeriodicGrid, dt: float, lipschitz: float = 0.0) -> int:
    """
    Smallest radius whose velocity cap radius*spacing/dt reaches
    4*(lipschitz + 1), clipped to n/2.
    """
    v_target = 4.0 * (abs(lipschitz) + 1.0)
    radius = max(1, math.ceil(v_target * dt / grid.spacing - 1e-12))
    return min(radius, grid.n // 2)


def data_lipschitz(phi: ValueField) -> float:
    """Largest periodic difference quotient of the data (0 for pinned data)."""
    if not np.all(phi.finite_mask()):
        return 0.0
    return float(np.max(np.abs(np.roll(phi.values, -1) - phi.values))) / phi.grid.spacing


def reachability_horizon(grid: PeriodicGrid, window_radius: int) -> int:
    """Steps after which every node can be reached from any other (0 when none suffices)."""
    if window_radius <= 0:
        return 0
    return math.ceil((grid.n / 2) / window_radius)


# --- the minimization --------------------------------------------------------

def _relax_rows(model, grid, f, dt, offsets, start, stop, frozen=None, arrival=None):
    """
    Candidate minimization for target rows [start, stop).

    f has shape (..., n). `frozen` replaces the value slot of L with another
    field's departure values; `arrival` switches to the midpoint rule.
    """
    n = grid.n
    rows = np.arange(start, stop)
    J = (rows[:, None] - offsets[None, :]) % n
    fj = f[..., J]
    uj = fj if frozen is None else frozen[..., J]
    if arrival is not None:
        uj = 0.5 * (uj + arrival[..., rows, None])
    v = offsets * (grid.spacing / dt)
    cost = fj + dt * model.eval_L(grid.nodes[J], uj, v)
    cost = np.where(fj >= BIG / 2, np.inf, cost)
    best = cost.min(axis=-1)
    # smallest node index among exact ties
    arg = np.where(cost == best[..., None], J, n).min(axis=-1)
    dead = ~np.isfinite(best)
    return np.where(dead, BIG, best), np.where(dead, -1, arg)


def _relax(model, grid, f, dt, offsets, frozen=None, arrival=None):
    parts = parallel.map_chunks(
        lambda a, b: _relax_rows(model, grid, f, dt, offsets, a, b, frozen, arrival), grid.n
    )
    out = np.concatenate([p[0] for p in parts], axis=-1)
    arg = np.concatenate([p[1] for p in parts], axis=-1)
    return out, arg


def _advance(model, grid, f, dt, offsets, u_rule="explicit"):
    out, arg = _relax(model, grid, f, dt, offsets)
    if u_rule == "midpoint":
        for _ in range(MIDPOINT_SWEEPS):
            new, new_arg = _relax(model, grid, f, dt, offsets, arrival=np.where(out < BIG / 2, out, f))
            if np.array_equal(new, out):
                break
            out, arg = new, new_arg
    return out, arg


def _binding_cap(grid, arg, window_radius) -> bool:
    if window_radius == 0 or 2 * window_radius >= grid.n:
        return False
    rows = np.broadcast_to(np.arange(grid.n), arg.shape)
    live = arg >= 0
    disp = grid.index_displacement(arg[live], rows[live])
    return bool(np.any(np.abs(disp) == window_radius))


def step(model: HamiltonianModel, field: ValueField, dt: float, window_radius: int,
         u_rule: str = "explicit") -> tuple[ValueField, np.ndarray]:
    """
    One semi-Lagrangian step.

    Args:
        model: Hamiltonian model
        field: Current slice (BIG marks pinned/unreached nodes)
        dt: Time step
        window_radius: Search radius in nodes
        u_rule: "explicit" or "midpoint"

    Returns:
        (next slice, argmin per node)
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if u_rule not in U_RULES:
        raise ValueError(f"Unknown u_rule: {u_rule}")
    check_stability(model, dt)
    grid = field.grid
    offsets = grid.window_offsets(window_radius)
    out, arg = _advance(model, grid, field.values, dt, offsets, u_rule)
    return ValueField(grid, out), arg


def propagate(model: HamiltonianModel, grid: PeriodicGrid, phi_values, dt: float, steps: int,
              window_radius: int, u_rule: str = "explicit") -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """
    Stream slices k = 1..steps without storing the history.

    phi_values may hold one field (n,) or a batch (B, n); every batch member
    evolves independently. Yields (k, values, argmin).
    """
    check_stability(model, dt)
    offsets = grid.window_offsets(window_radius)
    f = np.asarray(phi_values, dtype=float)
    for k in range(1, steps + 1):
        f, arg = _advance(model, grid, f, dt, offsets, u_rule)
        yield k, f, arg


def evolve(model: HamiltonianModel, phi: ValueField, tgrid: TimeGrid, window_radius: int | None = None,
           u_rule: str = "explicit") -> SpaceTimeField:
    """
    Apply the discrete semigroup for tgrid.steps steps, storing every slice.

    A binding velocity cap, nodes still unreachable after the reachability
    horizon and a velocity quantum spacing/dt too coarse for the data are
    logged and recorded in the run ledger.
    """
    grid = phi.grid
    lipschitz = data_lipschitz(phi)
    if window_radius is None:
        window_radius = default_window_radius(grid, tgrid.dt, lipschitz)
    steps = tgrid.steps
    values = np.empty((steps + 1, grid.n))
    argmin = np.full((steps + 1, grid.n), -1, dtype=np.int64)
    values[0] = phi.values
    horizon = reachability_horizon(grid, window_radius)
    binding_steps = 0
    disconnected_at = None
    for k, f, arg in propagate(model, grid, phi.values, tgrid.dt, steps, window_radius, u_rule):
        values[k] = f
        argmin[k] = arg
        if _binding_cap(grid, arg, window_radius):
            binding_steps += 1
        if disconnected_at is None and k > horizon and np.any(f >= BIG / 2):
            disconnected_at = k

    result = SpaceTimeField(grid, tgrid, values, argmin, window_radius, u_rule)
    if binding_steps:
        payload = {"window_radius": window_radius, "v_max": window_radius * grid.spacing / tgrid.dt,
                   "binding_steps": binding_steps}
        logger.warning("Velocity cap binding at %d of %d steps (window_radius=%d)", binding_steps, steps, window_radius)
        result.warnings.append(run_log.append("velocity_cap_binding", payload))
    quantum = grid.spacing / tgrid.dt
    if lipschitz > 0 and quantum > QUANTUM_RATIO * lipschitz:
        payload = {"velocity_quantum": quantum, "data_lipschitz": lipschitz}
        logger.warning("Coarse velocity quantum %.3g for data with Lipschitz bound %.3g; refine the grid or raise dt",
                       quantum, lipschitz)
        result.warnings.append(run_log.append("coarse_velocity_quantum", payload))
    if disconnected_at is not None:
        payload = {"step": disconnected_at, "unreached": int(np.count_nonzero(values[disconnected_at] >= BIG / 2))}
        logger.warning("Disconnected domain: nodes unreached at step %d", disconnected_at)
        result.warnings.append(run_log.append("disconnected_domain", payload))
    return result


def pinned_data(grid: PeriodicGrid, x0: int, u0: float) -> ValueField:
    """BIG everywhere except u0 at node x0."""
    values = np.full(grid.n, BIG)
    values[x0 % grid.n] = u0
    return ValueField(grid, values)


def fundamental_solution(model: HamiltonianModel, grid: PeriodicGrid, x0: int, u0: float, tgrid: TimeGrid,
                         window_radius: int, u_rule: str = "explicit") -> SpaceTimeField:
    """Evolve the pinned data u0 at node x0 (h_{x0,u0} on the grid)."""
    return evolve(model, pinned_data(grid, x0, u0), tgrid, window_radius, u_rule)


def representation_min(model: HamiltonianModel, phi: ValueField, tgrid: TimeGrid, window_radius: int,
                       batch_size: int = 32) -> ValueField:
    """
    min over source nodes y of the pinned solution from (y, phi(y)) at the
    final time, all sources propagated as batches.
    """
    grid = phi.grid
    best = np.full(grid.n, BIG)
    for first in range(0, grid.n, batch_size):
        sources = np.arange(first, min(first + batch_size, grid.n))
        batch = np.full((sources.size, grid.n), BIG)
        batch[np.arange(sources.size), sources] = phi.values[sources]
        final = batch
        for _, final, _ in propagate(model, grid, batch, tgrid.dt, tgrid.steps, window_radius):
            pass
        best = np.minimum(best, final.min(axis=0))
    return ValueField(grid, best)


def bellman_residual(model: HamiltonianModel, field: SpaceTimeField) -> float:
    """Max |stored slice - recomputed step| over all stored steps."""
    grid = field.grid
    offsets = grid.window_offsets(field.window_radius)
    worst = 0.0
    for k in range(field.tgrid.steps):
        out, _ = _advance(model, grid, field.values[k], field.tgrid.dt, offsets, field.u_rule)
        live = out < BIG / 2
        if np.any(live):
            worst = max(worst, float(np.max(np.abs(out[live] - field.values[k + 1][live]))))
    return worst


# --- Picard iteration --------------------------------------------------------

def _frozen_sweep(model, grid, start, frozen, dt, offsets):
    steps = frozen.shape[0] - 1
    values = np.empty_like(frozen)
    argmin = np.full(frozen.shape, -1, dtype=np.int64)
    values[0] = start
    for k in range(steps):
        values[k + 1], argmin[k + 1] = _relax(model, grid, values[k], dt, offsets, frozen=frozen[k])
    return values, argmin


def picard_solve(model: HamiltonianModel, grid: PeriodicGrid, x0: int, u0: float, tgrid: TimeGrid,
                 window_radius: int, tol: float = 1e-10, max_iter: int = 60,
                 init_offset: float = 0.0) -> tuple[SpaceTimeField, PicardTrace]:
    """
    Fixed-point iteration for the pinned problem at (x0, u0).

    Starts from h_0 = u0 + init_offset on the whole space-time grid; each
    iterate solves the u-frozen problem by forward recursion with the value
    slot of L taken from the previous iterate. Gaps are sup-norms over
    entries finite in both iterates.

    Raises:
        PicardNonConvergenceError: If max_iter iterates do not reach tol
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    check_stability(model, tgrid.dt)
    offsets = grid.window_offsets(window_radius)
    start = pinned_data(grid, x0, u0).values
    current = np.full((tgrid.steps + 1, grid.n), float(u0) + init_offset)
    trace = PicardTrace()
    argmin = None
    for iteration in range(1, max_iter + 1):
        nxt, argmin = _frozen_sweep(model, grid, start, current, tgrid.dt, offsets)
        live = (nxt < BIG / 2) & (current < BIG / 2)
        gap = float(np.max(np.abs(nxt[live] - current[live]))) if np.any(live) else 0.0
        trace.iterates.append(gap)
        logger.debug("picard iterate %d: gap %.3e", iteration, gap)
        current = nxt
        if gap <= tol:
            trace.converged = True
            break
    trace.iterations = len(trace.iterates) - 1

    result = SpaceTimeField(grid, tgrid, current, argmin, window_radius, "explicit")
    if not trace.converged:
        run_log.append("picard_nonconvergence", trace.to_dict())
        raise PicardNonConvergenceError(trace, result)
    logger.info("Picard converged after %d iterations", trace.iterations)
    return result, trace


# --- backtracking ------------------------------------------------------------

def backtrack(field: SpaceTimeField, end_node: int, end_time_index: int | None = None) -> MinimizerPath:
    """
    Follow argmin pointers from (end_node, end_time_index) back to time 0.

    Raises:
        MalformedFieldError: If the path meets a BIG entry or a missing pointer
    """
    grid = field.grid
    K = field.tgrid.steps if end_time_index is None else end_time_index
    if not 0 <= K <= field.tgrid.steps:
        raise MalformedFieldError(f"time index {K} outside [0, {field.tgrid.steps}]")
    nodes = np.empty(K + 1, dtype=np.int64)
    nodes[K] = end_node % grid.n
    for k in range(K, 0, -1):
        i = nodes[k]
        if field.values[k, i] >= BIG / 2:
            raise MalformedFieldError(f"unreached entry at node {i}, time index {k}")
        j = field.argmin[k, i]
        if j < 0:
            raise MalformedFieldError(f"missing argmin at node {i}, time index {k}")
        nodes[k - 1] = j
    values = field.values[np.arange(K + 1), nodes]
    if values[0] >= BIG / 2:
        raise MalformedFieldError(f"path starts at unreached node {nodes[0]}")
    velocities = grid.index_displacement(nodes[:-1], nodes[1:]) * (grid.spacing / field.tgrid.dt)
    return MinimizerPath(grid, field.tgrid.dt, nodes, values, np.asarray(velocities, dtype=float))
