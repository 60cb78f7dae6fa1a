"""
Contact characteristics of H(x, u, p) and momentum shooting.

The flow
    x' = H_p,  u' = p H_p - H,  p' = -H_x - H_u p
is integrated with classical RK4 on the universal cover (x is never reduced
mod length while integrating). All routines are vectorized over batches of
initial states.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import parallel, run_log
from .errors import NoCharacteristicFoundError
from .hamiltonian import HamiltonianModel
from .propagator import ValueField

logger = logging.getLogger(__name__)

OVERFLOW_GUARD = 1e9


@dataclass
class CharacteristicState:
    """(x, u, p) with x lifted to the real line; fields may be arrays."""
    x: Any
    u: Any
    p: Any

    def as_tuple(self) -> tuple[float, float, float]:
        return float(self.x), float(self.u), float(self.p)


@dataclass
class Trajectory:
    """States at times[k]; truncated when the overflow guard tripped."""
    times: np.ndarray
    x: np.ndarray
    u: np.ndarray
    p: np.ndarray
    truncated: bool = False

    @property
    def final(self) -> CharacteristicState:
        return CharacteristicState(float(self.x[-1]), float(self.u[-1]), float(self.p[-1]))

    def state(self, k: int) -> CharacteristicState:
        return CharacteristicState(float(self.x[k]), float(self.u[k]), float(self.p[k]))


@dataclass
class ShootResult:
    """One refined hit of the target."""
    p0: float
    final: CharacteristicState
    hit_error: float
    winding: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {"p0": self.p0, "winding": self.winding, "u_final": float(self.final.u), "hit_error": self.hit_error}


@dataclass
class ShootParams:
    p_max: float = 10.0
    n_samples: int = 512
    refine_iters: int = 60
    eps_hit: float = 1e-10
    m_max: int = 3
    dt_ode_max: float = 1e-2

    def __post_init__(self):
        if self.n_samples < 64:
            raise ValueError(f"n_samples must be at least 64, got {self.n_samples}")
        if not self.p_max > 0:
            raise ValueError(f"p_max must be positive, got {self.p_max}")


def ode_rhs(model: HamiltonianModel, state: CharacteristicState) -> tuple:
    """(dx, du, dp) = (H_p, p H_p - H, -H_x - H_u p)."""
    x, u, p = state.x, state.u, state.p
    hx, hu, hp = model.grad_H(x, u, p)
    H = model.eval_H(x, u, p)
    return hp, p * hp - H, -hx - hu * p


def _rhs(model, x, u, p):
    return ode_rhs(model, CharacteristicState(x, u, p))


def _rk4_step(model, x, u, p, h):
    k1 = _rhs(model, x, u, p)
    k2 = _rhs(model, x + 0.5 * h * k1[0], u + 0.5 * h * k1[1], p + 0.5 * h * k1[2])
    k3 = _rhs(model, x + 0.5 * h * k2[0], u + 0.5 * h * k2[1], p + 0.5 * h * k2[2])
    k4 = _rhs(model, x + h * k3[0], u + h * k3[1], p + h * k3[2])
    w = h / 6.0
    return (
        x + w * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        u + w * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
        p + w * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
    )


def flow(model: HamiltonianModel, x0, u0, p0, t: float, n_steps: int):
    """
    Integrate a batch of initial states to time t.

    Returns (x, u, p, ok); samples whose |u| or |p| crossed the overflow
    guard are frozen at their last good state and marked ok=False.
    """
    x, u, p = (np.array(a, dtype=float) for a in np.broadcast_arrays(x0, u0, p0))
    ok = np.ones(x.shape, dtype=bool)
    h = t / n_steps
    for _ in range(n_steps):
        with np.errstate(over="ignore", invalid="ignore"):
            nx, nu, np_ = _rk4_step(model, x, u, p, h)
        bad = ~(np.isfinite(nx) & np.isfinite(nu) & np.isfinite(np_)) | (np.abs(nu) > OVERFLOW_GUARD) | (np.abs(np_) > OVERFLOW_GUARD)
        ok &= ~bad
        x = np.where(ok, nx, x)
        u = np.where(ok, nu, u)
        p = np.where(ok, np_, p)
    return x, u, p, ok


def integrate(model: HamiltonianModel, initial: CharacteristicState, t: float, n_steps: int) -> Trajectory:
    """
    RK4 trajectory of n_steps + 1 states from `initial`.

    When |u| or |p| exceeds the overflow guard the trajectory is cut at the
    last good state and flagged truncated (no exception).
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be positive, got {n_steps}")
    h = t / n_steps
    xs, us, ps = [float(initial.x)], [float(initial.u)], [float(initial.p)]
    truncated = False
    x, u, p = xs[0], us[0], ps[0]
    for k in range(n_steps):
        with np.errstate(over="ignore", invalid="ignore"):
            x, u, p = (float(v) for v in _rk4_step(model, x, u, p, h))
        if not all(math.isfinite(v) for v in (x, u, p)) or abs(u) > OVERFLOW_GUARD or abs(p) > OVERFLOW_GUARD:
            truncated = True
            logger.warning("Trajectory truncated at step %d of %d (overflow guard)", k + 1, n_steps)
            run_log.append("trajectory_truncated", {"step": k + 1, "n_steps": n_steps, "t": (k + 1) * h})
            break
        xs.append(x)
        us.append(u)
        ps.append(p)
    times = np.arange(len(xs)) * h
    return Trajectory(times, np.array(xs), np.array(us), np.array(ps), truncated)


def _steps_for(t: float, dt_ode_max: float) -> int:
    return max(1, math.ceil(t / dt_ode_max - 1e-12))


def _shoot_sources(model, x0s, u0s, target_x, t, params: ShootParams):
    """
    Shooting from several sources at once.

    Returns arrays (source_index, p0, winding, x, u, p, hit_error) of all
    accepted hits, unsorted.
    """
    length = model.potential.length
    n_steps = _steps_for(t, params.dt_ode_max)
    x0s = np.asarray(x0s, dtype=float)
    u0s = np.asarray(u0s, dtype=float)
    p_grid = np.linspace(-params.p_max, params.p_max, params.n_samples)
    X, _, _, ok = flow(model, x0s[:, None], u0s[:, None], p_grid[None, :], t, n_steps)

    half = length / 2
    d = np.mod(target_x - x0s, length)
    base = x0s + np.where(d > half, d - length, d)
    windings = np.arange(-params.m_max, params.m_max + 1)
    targets = base[:, None] + windings[None, :] * length  # (S, M)

    F = X[:, None, :] - targets[:, :, None]  # (S, M, P)
    valid = ok[:, None, :] & np.ones(F.shape, dtype=bool)
    pair_ok = valid[..., :-1] & valid[..., 1:]
    crossing = pair_ok & (F[..., :-1] * F[..., 1:] < 0)
    exact = valid & (F == 0)

    s_idx, m_idx, k_idx = np.nonzero(crossing)
    a = p_grid[k_idx]
    b = p_grid[k_idx + 1]
    fa = F[s_idx, m_idx, k_idx]
    tgt = targets[s_idx, m_idx]
    for _ in range(params.refine_iters):
        mid = 0.5 * (a + b)
        xm, _, _, _ = flow(model, x0s[s_idx], u0s[s_idx], mid, t, n_steps)
        fm = xm - tgt
        left = fa * fm <= 0
        b = np.where(left, mid, b)
        a = np.where(left, a, mid)
        fa = np.where(left, fa, fm)
    p_hit = 0.5 * (a + b)

    es, em, ek = np.nonzero(exact)
    src = np.concatenate([s_idx, es])
    wind = np.concatenate([m_idx, em])
    p_hit = np.concatenate([p_hit, p_grid[ek]])
    tgt = np.concatenate([tgt, targets[es, em]])

    xf, uf, pf, okf = flow(model, x0s[src], u0s[src], p_hit, t, n_steps)
    err = np.abs(xf - tgt)
    keep = okf & (err <= params.eps_hit)
    return src[keep], p_hit[keep], windings[wind[keep]], xf[keep], uf[keep], pf[keep], err[keep]


def shoot(model: HamiltonianModel, x0: float, u0: float, target_x: float, t: float,
          params: ShootParams | None = None) -> list[ShootResult]:
    """
    All characteristics from (x0, u0) reaching target_x (mod length) at time t.

    Momenta are sampled uniformly on [-p_max, p_max]; each sign change of the
    lifted miss distance, per winding |m| <= m_max, is refined by bisection.
    Results are sorted by final u, then p0, then winding. An empty list means
    nothing was hit inside the sampled window.
    """
    params = params or ShootParams()
    _, p0, wind, xf, uf, pf, err = _shoot_sources(model, [x0], [u0], target_x, t, params)
    order = np.lexsort((wind, p0, uf))
    results = [
        ShootResult(p0=float(p0[k]), final=CharacteristicState(float(xf[k]), float(uf[k]), float(pf[k])),
                    hit_error=float(err[k]), winding=int(wind[k]))
        for k in order
    ]
    logger.debug("shoot from x0=%g to %g: %d hits", x0, target_x, len(results))
    return results


def min_over_characteristics(model: HamiltonianModel, phi: ValueField, target_x: float, t: float,
                             params: ShootParams | None = None) -> float:
    """
    Minimal U(t) over characteristics from every (y, phi(y)) that reach target_x.

    Raises:
        NoCharacteristicFoundError: If no source produces a hit
    """
    params = params or ShootParams()
    grid = phi.grid
    sources = np.flatnonzero(phi.finite_mask())
    ys = grid.nodes[sources]
    us = phi.values[sources]

    def chunk(start: int, stop: int) -> float:
        _, _, _, _, uf, _, _ = _shoot_sources(model, ys[start:stop], us[start:stop], target_x, t, params)
        return float(uf.min()) if uf.size else math.inf

    best = min(parallel.map_chunks(chunk, sources.size), default=math.inf)
    if not math.isfinite(best):
        raise NoCharacteristicFoundError(target_x)
    return best


def characteristic_from_data(model: HamiltonianModel, phi: ValueField, y: int, t: float,
                             n_steps: int | None = None) -> Trajectory:
    """Characteristic leaving node y with p0 = centered difference of phi at y."""
    grid = phi.grid
    f = phi.values
    p0 = (f[(y + 1) % grid.n] - f[(y - 1) % grid.n]) / (2 * grid.spacing)
    steps = n_steps or _steps_for(t, 1e-3)
    return integrate(model, CharacteristicState(grid.node(y), f[y], p0), t, steps)
