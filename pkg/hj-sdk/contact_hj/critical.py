"""
Critical shifts: which additive constants c keep T_t phi bounded as t grows.

classify_drift runs the semigroup over a long horizon and fits the slope of
the spatial mean over the trailing half; critical_search bisects on the sign
of that drift, critical_scan classifies a list of shifts against several
initial levels, and mane_value_frozen gives the closed-form inf-sup value
of the frozen-u Hamiltonian.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import optimize, stats

from . import parallel, run_log
from .domain import TimeGrid
from .errors import NoBracketError, UnsupportedModelError
from .hamiltonian import HamiltonianModel, QuadraticHamiltonian
from .propagator import BIG, ValueField, default_window_radius, data_lipschitz, propagate

logger = logging.getLogger(__name__)

BOUNDED = "bounded"
DIVERGES_UP = "diverges_up"
DIVERGES_DOWN = "diverges_down"

DRIFT_TOL = 1e-3
K_GUARD = 1e6


@dataclass
class DriftClassification:
    """Outcome of one long-horizon run at a fixed shift."""
    classification: str
    drift_rate: float
    trailing_sup: float
    overflowed: bool = False
    times: np.ndarray | None = None
    means: np.ndarray | None = None


@dataclass
class CriticalValueReport:
    """Per-shift classifications and, when a bracket exists, the bisected c_star."""
    c_tested: list[float] = field(default_factory=list)
    classification: list[str] = field(default_factory=list)
    drift_rate: list[float] = field(default_factory=list)
    c_star: float | None = None
    outcome: str = ""

    def add(self, c: float, result: DriftClassification) -> None:
        self.c_tested.append(float(c))
        self.classification.append(result.classification)
        self.drift_rate.append(float(result.drift_rate))

    def to_dict(self) -> dict[str, Any]:
        return {
            "results": [
                {"c": c, "classification": k, "drift_rate": d}
                for c, k, d in zip(self.c_tested, self.classification, self.drift_rate)
            ],
            "c_star": self.c_star,
            "outcome": self.outcome,
        }


def drift_slope(times, means) -> float:
    """Least-squares slope of means against times."""
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        return 0.0
    return float(stats.linregress(times, np.asarray(means, dtype=float)).slope)


def _trailing(times: np.ndarray, start: float) -> np.ndarray:
    mask = times >= start
    if np.count_nonzero(mask) < 2:
        mask = np.zeros(times.size, dtype=bool)
        mask[-2:] = True
    return mask


def classify_drift(model: HamiltonianModel, phi: ValueField, horizon_T: float, dt: float,
                   window_radius: int | None = None, drift_tol: float = DRIFT_TOL,
                   k_guard: float = K_GUARD) -> DriftClassification:
    """
    Classify T_t phi under `model` (already carrying its shift) as bounded,
    diverges_up or diverges_down.

    The slope of the spatial mean is fitted on [T/2, T]. If the sup-norm
    passes k_guard the run stops and the sign of the last mean decides.
    """
    grid = phi.grid
    tgrid = TimeGrid.from_horizon(horizon_T, dt)
    if window_radius is None:
        window_radius = default_window_radius(grid, dt, data_lipschitz(phi))
    delta = 10 * dt
    times, means, sups = [0.0], [float(np.mean(phi.values))], [phi.sup_norm()]
    overflowed = False
    for k, f, _ in propagate(model, grid, phi.values, dt, tgrid.steps, window_radius):
        t = k * dt
        live = f[f < BIG / 2]
        if live.size == 0:
            continue
        times.append(t)
        means.append(float(np.mean(live)))
        sups.append(float(np.max(np.abs(live))))
        if t >= delta and sups[-1] > k_guard:
            overflowed = True
            break

    times_a = np.asarray(times)
    means_a = np.asarray(means)
    mask = _trailing(times_a, times_a[-1] / 2 if overflowed else horizon_T / 2)
    slope = drift_slope(times_a[mask], means_a[mask])
    trailing_sup = float(np.max(np.asarray(sups)[mask]))

    if overflowed:
        label = DIVERGES_UP if means_a[-1] > 0 else DIVERGES_DOWN
    elif abs(slope) <= drift_tol and trailing_sup <= k_guard:
        label = BOUNDED
    else:
        label = DIVERGES_UP if slope > 0 else DIVERGES_DOWN
    logger.debug("shift %g: %s (drift %.4e, trailing sup %.4e)", model.shift, label, slope, trailing_sup)
    return DriftClassification(label, slope, trailing_sup, overflowed, times_a, means_a)


def critical_search(model: HamiltonianModel, phi: ValueField, c_lo: float, c_hi: float, horizon_T: float,
                    dt: float, max_bisect: int = 12, window_radius: int | None = None,
                    drift_tol: float = DRIFT_TOL, k_guard: float = K_GUARD) -> CriticalValueReport:
    """
    Bisect on the drift sign between c_lo and c_hi.

    An end that classifies bounded is returned as c_star directly. Otherwise
    returns as soon as a midpoint classifies bounded, or the midpoint after
    max_bisect halvings.

    Raises:
        NoBracketError: If both ends share one classification
    """
    report = CriticalValueReport()

    def run(c: float) -> DriftClassification:
        result = classify_drift(model.with_shift(c), phi, horizon_T, dt, window_radius, drift_tol, k_guard)
        report.add(c, result)
        return result

    lo, hi = run(c_lo), run(c_hi)
    if lo.classification == hi.classification:
        label = lo.classification
        report.outcome = f"no-bracket: {label} at both ends"
        run_log.append("no_bracket", {"c_lo": c_lo, "c_hi": c_hi, "classification": label})
        logger.info("No bracket on [%g, %g]: %s", c_lo, c_hi, label)
        raise NoBracketError(report, label)
    if BOUNDED in (lo.classification, hi.classification):
        report.c_star = c_lo if lo.classification == BOUNDED else c_hi
        report.outcome = "bounded end"
        logger.info("Critical value at bounded end c=%g", report.c_star)
        return report

    a, b = c_lo, c_hi
    label_a = lo.classification
    for iteration in range(max_bisect):
        mid = 0.5 * (a + b)
        result = run(mid)
        logger.debug("bisection %d: c=%g %s", iteration, mid, result.classification)
        if result.classification == BOUNDED:
            report.c_star = mid
            report.outcome = "bounded midpoint"
            return report
        if result.classification == label_a:
            a = mid
        else:
            b = mid
    report.c_star = 0.5 * (a + b)
    report.outcome = "bisection"
    logger.info("Critical value estimate %.6f after %d bisections", report.c_star, max_bisect)
    return report


def critical_scan(model: HamiltonianModel, c_values: list[float], probes: list[ValueField], horizon_T: float,
                  dt: float, window_radius: int | None = None, drift_tol: float = DRIFT_TOL,
                  k_guard: float = K_GUARD) -> CriticalValueReport:
    """
    Classify each shift against several initial data.

    A shift counts as bounded only when every probe stays bounded (the bound
    may depend on the data, the shift may not). Otherwise the probe with the
    largest |drift| decides the direction. c_star is set when the bounded
    shifts are a single value or when consecutive shifts flip from
    diverges_down to diverges_up.
    """
    if not probes:
        raise ValueError("critical_scan needs at least one probe")
    c_values = [float(c) for c in c_values]

    def chunk(start: int, stop: int) -> list[DriftClassification]:
        out = []
        for c in c_values[start:stop]:
            runs = [classify_drift(model.with_shift(c), phi, horizon_T, dt, window_radius, drift_tol, k_guard)
                    for phi in probes]
            if all(r.classification == BOUNDED for r in runs):
                worst = max(runs, key=lambda r: abs(r.drift_rate))
                out.append(DriftClassification(BOUNDED, worst.drift_rate, max(r.trailing_sup for r in runs)))
            else:
                unbounded = [r for r in runs if r.classification != BOUNDED]
                out.append(max(unbounded, key=lambda r: (r.overflowed, abs(r.drift_rate))))
        return out

    results = [r for part in parallel.map_chunks(chunk, len(c_values)) for r in part]
    report = CriticalValueReport()
    for c, r in zip(c_values, results):
        report.add(c, r)

    bounded = [c for c, k in zip(report.c_tested, report.classification) if k == BOUNDED]
    if len(bounded) == len(c_values):
        report.outcome = "bounded for all tested c"
    elif bounded:
        report.outcome = "bounded for some tested c"
        if len(bounded) == 1:
            report.c_star = bounded[0]
    elif all(k == report.classification[0] for k in report.classification):
        report.outcome = f"{report.classification[0]} for all tested c"
    else:
        report.outcome = "mixed divergence"
        order = np.argsort(report.c_tested)
        for i0, i1 in zip(order[:-1], order[1:]):
            if (report.classification[i0], report.classification[i1]) == (DIVERGES_DOWN, DIVERGES_UP):
                report.c_star = 0.5 * (report.c_tested[i0] + report.c_tested[i1])
                break
    return report


def mane_value_frozen(model: HamiltonianModel, a: float, n_fine: int = 4096) -> float:
    """
    inf over u of sup_x H(x, a, u') for the frozen level a, which for the
    quadratic family is beta*a + max V. The grid maximum is polished with a
    bounded scalar search around the best node.

    Raises:
        UnsupportedModelError: For models without the closed form
    """
    if not isinstance(model, QuadraticHamiltonian):
        raise UnsupportedModelError(model.kind, "mane_value_frozen")
    V = model.potential
    h = V.length / n_fine
    xs = np.arange(n_fine) * h
    values = V(xs)
    k = int(np.argmax(values))
    best = float(values[k])
    refined = optimize.minimize_scalar(lambda x: -float(V(x)), bounds=(xs[k] - h, xs[k] + h),
                                       method="bounded", options={"xatol": 1e-12})
    if refined.success and math.isfinite(refined.fun):
        best = max(best, -float(refined.fun))
    return model.beta * a + best
