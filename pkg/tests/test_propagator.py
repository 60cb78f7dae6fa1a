#!/usr/bin/env python3
"""
Test script for the discrete implicit Lax-Oleinik propagator.
Run this to verify the step, the semigroup laws, Picard iteration and backtracking.
"""

import math
import sys
from pathlib import Path

# Add hj-sdk to path
repo_root = Path(__file__).resolve().parent.parent
sdk_dir = repo_root / "hj-sdk"
if str(sdk_dir) not in sys.path:
    sys.path.insert(0, str(sdk_dir))

import numpy as np
import pytest

from contact_hj import run_log
from contact_hj.domain import PeriodicGrid, TimeGrid
from contact_hj.errors import InvalidWindowError, MalformedFieldError, PicardNonConvergenceError, StabilityError
from contact_hj.hamiltonian import QuadraticHamiltonian, parse_profile
from contact_hj.oracle import hopf_lax
from contact_hj.propagator import (
    BIG,
    ValueField,
    backtrack,
    bellman_residual,
    evolve,
    fundamental_solution,
    picard_solve,
    representation_min,
    step,
)

KINETIC = QuadraticHamiltonian(1.0, 0.0)
GROWING = QuadraticHamiltonian(1.0, -1.0)
DECAYING = QuadraticHamiltonian(1.0, 1.0)


def _smooth_field(grid, rng, modes=3, scale=0.5):
    """Random trigonometric data."""
    x = grid.nodes
    out = np.full(grid.n, rng.normal())
    for k in range(1, modes + 1):
        out += scale / k * (rng.normal() * np.cos(2 * np.pi * k * x) + rng.normal() * np.sin(2 * np.pi * k * x))
    return ValueField(grid, out)


def test_step_constant_data():
    """Test one step on constant data."""
    print("=" * 60)
    print("Testing: Single Step")
    print("=" * 60)

    grid = PeriodicGrid(16)
    out, arg = step(KINETIC, ValueField.constant(grid, 0.0), 0.01, 2)
    assert np.all(out.values == 0.0)
    assert np.array_equal(arg, np.arange(16)), "Staying put is the unique minimizer"

    out, _ = step(DECAYING, ValueField.constant(grid, 1.0), 0.01, 2)
    print(f"beta=+1 one step: {out.values[0]!r}")
    assert np.allclose(out.values, 0.99, atol=1e-15)

    out, _ = step(GROWING, ValueField.constant(grid, 1.0), 0.01, 2)
    assert np.allclose(out.values, 1.01, atol=1e-15)
    print()


def test_step_midpoint_rule():
    """Test the midpoint u-rule against its closed-form fixed point."""
    grid = PeriodicGrid(8)
    dt = 0.01
    out, _ = step(DECAYING, ValueField.constant(grid, 1.0), dt, 1, u_rule="midpoint")
    expected = (1 - dt / 2) / (1 + dt / 2)
    assert np.allclose(out.values, expected, atol=1e-10)
    with pytest.raises(ValueError):
        step(DECAYING, ValueField.constant(grid, 1.0), dt, 1, u_rule="implicit")


def test_step_guards():
    """Test the stability bound and window validation."""
    grid = PeriodicGrid(8)
    with pytest.raises(StabilityError):
        step(GROWING, ValueField.constant(grid, 1.0), 0.6, 1)
    with pytest.raises(InvalidWindowError):
        step(KINETIC, ValueField.constant(grid, 1.0), 0.01, 5)


def test_constant_data_ode():
    """Test constant data against the scalar ODE u' = -beta*u."""
    print("=" * 60)
    print("Testing: Constant Data ODE")
    print("=" * 60)

    grid = PeriodicGrid(50)
    decay = evolve(DECAYING, ValueField.constant(grid, 1.0), TimeGrid.from_horizon(math.log(2.0), 1e-3), 1)
    growth = evolve(GROWING, ValueField.constant(grid, 1.0), TimeGrid.from_horizon(1.0, 1e-3), 1)
    print(f"beta=+1 at ln 2: {decay.final.values[0]:.6f} (expected 0.5)")
    print(f"beta=-1 at 1: {growth.final.values[0]:.6f} (expected e)")
    assert np.max(np.abs(decay.final.values - 0.5)) <= 2e-3
    assert np.max(np.abs(growth.final.values - math.e)) <= 5e-3
    print()


def test_hopf_lax():
    """Test the kinetic model against the Hopf-Lax formula and its refinement."""
    print("=" * 60)
    print("Testing: Hopf-Lax")
    print("=" * 60)

    phi = parse_profile("1 - cos(2*pi*x)")
    t, dt = 0.5, 0.05
    errors = {}
    for n in (100, 200):
        grid = PeriodicGrid(n)
        field = evolve(KINETIC, ValueField.from_function(grid, phi), TimeGrid.from_horizon(t, dt), n // 2)
        reference = np.array([hopf_lax(KINETIC, phi, x, t, 20 * n) for x in grid.nodes])
        errors[n] = float(np.max(np.abs(field.final.values - reference)))
        print(f"n={n}: sup error {errors[n]:.3e}")
    assert errors[200] <= 5e-2
    assert errors[100] / errors[200] >= 1.5, "Halving the spacing should shrink the error"
    print()


def test_semigroup_law():
    """Test T_{t+s} = T_s T_t bit for bit."""
    grid = PeriodicGrid(32)
    rng = np.random.default_rng(0)
    phi = _smooth_field(grid, rng)
    dt = 0.01
    whole = evolve(GROWING, phi, TimeGrid(dt, 75), 4)
    first = evolve(GROWING, phi, TimeGrid(dt, 50), 4)
    second = evolve(GROWING, first.final, TimeGrid(dt, 25), 4)
    assert np.array_equal(whole.final.values, second.final.values)
    assert bellman_residual(GROWING, whole) == 0.0


def test_monotonicity():
    """Test phi <= psi implies T_t phi <= T_t psi on random pairs."""
    print("=" * 60)
    print("Testing: Monotonicity")
    print("=" * 60)

    grid = PeriodicGrid(64)
    rng = np.random.default_rng(1)
    tgrid = TimeGrid(0.01, 50)
    violations = 0
    for _ in range(20):
        phi = _smooth_field(grid, rng)
        bump = np.abs(_smooth_field(grid, rng).values)
        psi = ValueField(grid, phi.values + bump)
        a = evolve(GROWING, phi, tgrid, 8).final.values
        b = evolve(GROWING, psi, tgrid, 8).final.values
        violations += int(np.count_nonzero(a > b))
    print(f"violations: {violations}")
    assert violations == 0
    print()


def test_contraction():
    """Test the e^{lambda t} Lipschitz bound and strict contraction for increasing H."""
    print("=" * 60)
    print("Testing: Contraction")
    print("=" * 60)

    grid = PeriodicGrid(64)
    rng = np.random.default_rng(2)
    dt = 0.01
    for _ in range(20):
        phi, psi = _smooth_field(grid, rng), _smooth_field(grid, rng)
        gap0 = float(np.max(np.abs(phi.values - psi.values)))
        for t in (0.25, 0.5, 1.0):
            tgrid = TimeGrid.from_horizon(t, dt)
            grow = evolve(GROWING, phi, tgrid, 8).final.values - evolve(GROWING, psi, tgrid, 8).final.values
            assert np.max(np.abs(grow)) <= math.exp(t) * gap0 + 10 * dt
            decay = evolve(DECAYING, phi, tgrid, 8).final.values - evolve(DECAYING, psi, tgrid, 8).final.values
            assert np.max(np.abs(decay)) < gap0, "Strictly increasing H should contract strictly"
    print("bounds hold for 20 random pairs")
    print()


def test_representation_formula():
    """Test that the evolution equals the minimum over pinned solutions."""
    grid = PeriodicGrid(32)
    rng = np.random.default_rng(4)
    phi = _smooth_field(grid, rng)
    tgrid = TimeGrid(0.01, 30)
    direct = evolve(GROWING, phi, tgrid, 4).final.values
    represented = representation_min(GROWING, phi, tgrid, 4).values
    assert np.max(np.abs(direct - represented)) <= 1e-9


def test_fundamental_solution():
    """Test pinned data: stationary source and exponential growth."""
    print("=" * 60)
    print("Testing: Fundamental Solution")
    print("=" * 60)

    grid = PeriodicGrid(40)
    field = fundamental_solution(KINETIC, grid, 5, 0.0, TimeGrid(0.01, 40), 4)
    assert np.all(field.values[:, 5] == 0.0), "h(x0, t) stays at u0 for H = p^2/2"
    assert np.all(field.values[0, np.arange(40) != 5] == BIG)

    grid = PeriodicGrid(200)
    field = fundamental_solution(GROWING, grid, 0, 1.0, TimeGrid.from_horizon(1.0, 1e-3), 1)
    errors = np.abs(field.values[:, 0] - np.exp(field.tgrid.times))
    print(f"max |h(0, t) - e^t|: {errors.max():.3e}")
    assert errors.max() <= 5e-3
    assert np.all(field.final.values < BIG / 2), "Every node is reached after the reachability horizon"
    print()


def test_fundamental_monotone_in_level():
    """Test h_{x0,u} against h_{x0,u+1}: ordered, and apart by at most e^{lambda t}."""
    print("=" * 60)
    print("Testing: Fundamental Solution Levels")
    print("=" * 60)

    grid = PeriodicGrid(64)
    tgrid = TimeGrid(0.01, 100)
    bound = np.exp(tgrid.times)[:, None]
    for model in (GROWING, DECAYING):
        low = fundamental_solution(model, grid, 10, 0.3, tgrid, 8).values
        high = fundamental_solution(model, grid, 10, 1.3, tgrid, 8).values
        live = (low < BIG / 2) & (high < BIG / 2)
        gap = np.where(live, high - low, 0.0)
        violations = int(np.count_nonzero(gap < 0))
        excess = float(np.max(gap - bound))
        print(f"beta={model.beta:+g}: {violations} ordering violations, excess over e^t {excess:.3e}")
        assert violations == 0
        assert excess <= 1e-12
    print()


def test_fundamental_triangle_identity():
    """Test h(x, t + s) = min_y h_{y, h(y, t)}(x, s)."""
    grid = PeriodicGrid(32)
    dt = 0.01
    field = fundamental_solution(GROWING, grid, 3, 0.5, TimeGrid(dt, 30), 4)
    middle = field.slice(20)
    assert np.all(middle.finite_mask())
    restarted = representation_min(GROWING, middle, TimeGrid(dt, 10), 4).values
    assert np.max(np.abs(restarted - field.final.values)) <= 1e-9


def test_disconnected_domain_warning():
    """Test that a zero window leaves nodes unreached and records it."""
    run_log.clear()
    field = fundamental_solution(KINETIC, PeriodicGrid(8), 0, 0.0, TimeGrid(0.01, 3), 0)
    kinds = [w["event_type"] for w in field.warnings]
    assert "disconnected_domain" in kinds
    assert run_log.list_entries("disconnected_domain")


def test_velocity_cap_warning():
    """Test that steep data with a narrow window records a binding cap."""
    run_log.clear()
    grid = PeriodicGrid(200)
    phi = ValueField.from_function(grid, parse_profile("10*cos(2*pi*x)"))
    field = evolve(KINETIC, phi, TimeGrid(1e-3, 20), 1)
    assert "velocity_cap_binding" in [w["event_type"] for w in field.warnings]


def test_coarse_velocity_quantum_warning():
    """Test that spacing/dt too coarse for the data is recorded."""
    run_log.clear()
    grid = PeriodicGrid(200)
    phi = ValueField.from_function(grid, parse_profile("0.5*cos(2*pi*x)"))
    field = evolve(GROWING, phi, TimeGrid(1e-3, 5))
    warning = next(w for w in field.warnings if w["event_type"] == "coarse_velocity_quantum")
    assert warning["payload"]["velocity_quantum"] == pytest.approx(5.0)
    assert run_log.list_entries("coarse_velocity_quantum")

    fine = evolve(GROWING, phi, TimeGrid(0.05, 2))
    assert "coarse_velocity_quantum" not in [w["event_type"] for w in fine.warnings]
    flat = evolve(GROWING, ValueField.constant(grid, 1.0), TimeGrid(1e-3, 5))
    assert "coarse_velocity_quantum" not in [w["event_type"] for w in flat.warnings]


def test_picard_iteration():
    """Test Picard convergence, its rate and agreement with step mode."""
    print("=" * 60)
    print("Testing: Picard Iteration")
    print("=" * 60)

    grid = PeriodicGrid(64)
    tgrid = TimeGrid(0.01, 100)
    field, trace = picard_solve(GROWING, grid, 0, 1.0, tgrid, 8, tol=1e-10, max_iter=200)
    print(f"iterations: {trace.iterations}, gaps: {[f'{g:.2e}' for g in trace.iterates[:6]]}")
    assert trace.converged
    lam_t = GROWING.lipschitz_constant() * tgrid.horizon
    gaps = trace.iterates
    for n in range(2, len(gaps) - 1):
        if gaps[n] > 1e-11:
            assert gaps[n + 1] / gaps[n] <= 1.5 * lam_t / (n + 1), f"rate check failed at iterate {n}"

    reference = fundamental_solution(GROWING, grid, 0, 1.0, tgrid, 8)
    live = reference.values < BIG / 2
    assert np.max(np.abs(field.values[live] - reference.values[live])) <= 1e-8

    shifted, _ = picard_solve(GROWING, grid, 0, 1.0, tgrid, 8, tol=1e-10, max_iter=200, init_offset=10.0)
    assert np.max(np.abs(shifted.values[live] - field.values[live])) <= 1e-8, "Limit must not depend on h_0"

    _, flat = picard_solve(KINETIC, grid, 0, 1.0, tgrid, 8)
    assert flat.iterations == 1 and flat.iterates[-1] == 0.0, "u-independent H converges in one iterate"
    print()


def test_picard_nonconvergence():
    """Test that running out of iterations raises with the trace attached."""
    grid = PeriodicGrid(64)
    with pytest.raises(PicardNonConvergenceError) as info:
        picard_solve(GROWING, grid, 0, 1.0, TimeGrid(0.01, 100), 8, tol=1e-12, max_iter=2)
    assert len(info.value.trace.iterates) == 2
    assert info.value.field is not None


def test_backtrack():
    """Test minimizer paths recovered from argmin pointers."""
    print("=" * 60)
    print("Testing: Backtrack")
    print("=" * 60)

    grid = PeriodicGrid(32)
    tgrid = TimeGrid(0.01, 20)
    path = backtrack(evolve(KINETIC, ValueField.constant(grid, 0.0), tgrid, 4), 7)
    assert np.all(path.nodes == 7) and np.all(path.velocities == 0.0)

    path = backtrack(evolve(DECAYING, ValueField.constant(grid, 1.0), tgrid, 4), 3)
    assert path.values[-1] == pytest.approx(0.99 ** 20, abs=1e-12)

    rng = np.random.default_rng(9)
    field = evolve(GROWING, _smooth_field(grid, rng), tgrid, 4)
    for end in (0, 11, 25):
        path = backtrack(field, end)
        assert path.action_defect(GROWING) <= 1e-9
        assert path.values[-1] == field.values[-1, end]
    print(f"path from node 25: {path.nodes.tolist()}")

    pinned = fundamental_solution(KINETIC, grid, 0, 0.0, tgrid, 1)
    with pytest.raises(MalformedFieldError):
        backtrack(pinned, 16, end_time_index=1)
    print()


if __name__ == "__main__":
    print("\n🧪 Testing Propagator\n")

    test_step_constant_data()
    test_step_midpoint_rule()
    test_step_guards()
    test_constant_data_ode()
    test_hopf_lax()
    test_semigroup_law()
    test_monotonicity()
    test_contraction()
    test_representation_formula()
    test_fundamental_solution()
    test_fundamental_monotone_in_level()
    test_fundamental_triangle_identity()
    test_disconnected_domain_warning()
    test_velocity_cap_warning()
    test_coarse_velocity_quantum_warning()
    test_picard_iteration()
    test_picard_nonconvergence()
    test_backtrack()

    print("=" * 60)
    print("✅ Tests complete!")
    print("=" * 60)
