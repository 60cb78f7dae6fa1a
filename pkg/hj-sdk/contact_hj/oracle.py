"""
Independent reference values for checking the propagator.

Oracles reuse only the model evaluation code (eval_L); none of them calls
the dynamic-programming recursion.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

import numpy as np

from .domain import PeriodicGrid, TimeGrid
from .errors import OracleBudgetError, UnsupportedModelError
from .hamiltonian import HamiltonianModel, QuadraticHamiltonian, TrigProfile, parse_profile

logger = logging.getLogger(__name__)

PATH_BUDGET = 12 ** 6


@dataclass
class OracleRecord:
    """One oracle comparison."""
    name: str
    expected: float
    actual: float
    tolerance: float

    @property
    def delta(self) -> float:
        return abs(self.actual - self.expected)

    @property
    def passed(self) -> bool:
        return self.delta <= self.tolerance

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "expected": self.expected,
            "actual": self.actual,
            "delta": self.delta,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def brute_force_value(model: HamiltonianModel, x0: int, u0: float, target_node: int, n_coarse: int,
                      k_steps: int, dt: float, window_radius: int | None = None, length: float = 1.0,
                      budget: int = PATH_BUDGET) -> float:
    """
    Minimum of the accumulated value over every lattice path of k_steps
    jumps from x0 that ends at target_node, the value slot of L read at the
    departure point as in the explicit step.

    Raises:
        OracleBudgetError: If the number of paths exceeds budget
    """
    grid = PeriodicGrid(n_coarse, length)
    radius = n_coarse // 2 if window_radius is None else window_radius
    offsets = grid.window_offsets(radius)
    path_count = offsets.size ** k_steps
    if path_count > budget:
        raise OracleBudgetError(path_count, budget)

    # every offset sequence, one row per path
    choice = np.indices((offsets.size,) * k_steps).reshape(k_steps, -1).T
    jumps = offsets[choice]
    position = np.full(path_count, x0 % n_coarse)
    value = np.full(path_count, float(u0))
    for s in range(k_steps):
        o = jumps[:, s]
        v = o * (grid.spacing / dt)
        value = value + dt * model.eval_L(grid.nodes[position], value, v)
        position = (position + o) % n_coarse
    hits = value[position == target_node % n_coarse]
    logger.debug("brute force: %d paths, %d end at node %d", path_count, hits.size, target_node)
    return float(hits.min()) if hits.size else math.inf


def constant_data_ode(model: QuadraticHamiltonian, a_init: float, t: float, c: float | None = None) -> float:
    """
    Solution of u' = -beta*u - V + c from u(0) = a_init for a constant potential.

    Raises:
        UnsupportedModelError: If the model is not quadratic with constant V
    """
    pot = getattr(model, "potential", None)
    if not isinstance(model, QuadraticHamiltonian) or not (isinstance(pot, TrigProfile) and not pot.terms):
        raise UnsupportedModelError(getattr(model, "kind", type(model).__name__), "constant_data_ode")
    shift = model.shift if c is None else float(c)
    forcing = shift - pot.constant
    beta = model.beta
    if beta == 0:
        return a_init + forcing * t
    u_eq = forcing / beta
    return (a_init - u_eq) * math.exp(-beta * t) + u_eq


def hopf_lax(model: QuadraticHamiltonian, phi: Callable, target_x: float, t: float, n_fine: int) -> float:
    """
    min_y [phi(y) + d(x, y)^2 / (2 a t)] + c t by dense search over n_fine
    points, for the kinetic model (beta = 0, V = 0).

    Raises:
        UnsupportedModelError: For any other model
    """
    pot = getattr(model, "potential", None)
    if (not isinstance(model, QuadraticHamiltonian) or model.beta != 0
            or not (isinstance(pot, TrigProfile) and not pot.terms and pot.constant == 0)):
        raise UnsupportedModelError(getattr(model, "kind", type(model).__name__), "hopf_lax")
    if t <= 0:
        return float(phi(np.asarray(target_x)))
    grid = PeriodicGrid(n_fine, pot.length)
    ys = grid.nodes
    d = grid.periodic_distance(ys, target_x)
    return float(np.min(phi(ys) + d ** 2 / (2 * model.a * t))) + model.shift * t


def run_suite(n_coarse: int = 8, k_steps: int = 4, dt: float = 1e-2, grid_n: int = 200,
              n_fine_factor: int = 10, hopf_lax_t: float = 0.5, hopf_lax_dt: float = 0.05,
              ode_dt: float = 1e-3) -> list[OracleRecord]:
    """
    Default oracle-check suite.

    - brute force against the pinned propagator on coarse grids for
      H = p^2/2, p^2/2 - u and p^2/2 + u
    - the scalar ODE against evolve for constant data
    - Hopf-Lax against evolve for the kinetic model
    """
    from .propagator import ValueField, evolve, fundamental_solution

    records: list[OracleRecord] = []
    coarse = PeriodicGrid(n_coarse)
    tgrid = TimeGrid(dt=dt, steps=k_steps)
    for beta in (0.0, -1.0, 1.0):
        model = QuadraticHamiltonian(1.0, beta)
        field = fundamental_solution(model, coarse, 0, 1.0, tgrid, n_coarse // 2)
        for target in (0, 1, n_coarse // 2):
            expected = brute_force_value(model, 0, 1.0, target, n_coarse, k_steps, dt)
            records.append(OracleRecord(f"brute_force beta={beta:g} target={target}", expected,
                                        float(field.values[k_steps, target]), 1e-12))

    grid = PeriodicGrid(grid_n)
    for beta, t in ((1.0, math.log(2.0)), (-1.0, 1.0)):
        model = QuadraticHamiltonian(1.0, beta)
        steps = TimeGrid.from_horizon(t, ode_dt)
        out = evolve(model, ValueField.constant(grid, 1.0), steps, 1)
        expected = constant_data_ode(model, 1.0, steps.horizon)
        actual = float(np.max(np.abs(out.final.values - expected))) + expected
        records.append(OracleRecord(f"constant_data_ode beta={beta:g}", expected, actual, 5e-3))

    kinetic = QuadraticHamiltonian(1.0, 0.0)
    phi = parse_profile("1 - cos(2*pi*x)")
    out = evolve(kinetic, ValueField.from_function(grid, phi), TimeGrid.from_horizon(hopf_lax_t, hopf_lax_dt),
                 grid_n // 2)
    reference = np.array([hopf_lax(kinetic, phi, x, hopf_lax_t, n_fine_factor * grid_n) for x in grid.nodes])
    worst = float(np.max(np.abs(out.final.values - reference)))
    records.append(OracleRecord("hopf_lax sup-norm", 0.0, worst, 5e-2))

    failed = [r.name for r in records if not r.passed]
    logger.info("Oracle suite: %d checks, %d failed", len(records), len(failed))
    return records
