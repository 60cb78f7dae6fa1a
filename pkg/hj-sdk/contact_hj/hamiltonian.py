"""
Hamiltonian models H(x, u, p) on the torus and their Lagrangians.

Provides:
- Profile / TrigProfile / TabulatedProfile - periodic functions of x (potentials, initial data)
- HamiltonianModel - abstract model interface (H, L, gradient, u-Lipschitz constant)
- QuadraticHamiltonian - closed form (a/2) p^2 + beta*u + V(x) - c
- ConvexHamiltonian - any H convex in p, Legendre transform computed numerically
- create_hamiltonian - factory keyed by model kind
"""

import logging
import re
from abc import ABC, abstractmethod
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .errors import TransformWindowError

logger = logging.getLogger(__name__)

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0
_NUMBER = r"\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
_TERM = re.compile(
    rf"\s*(?P<sign>[+-])?\s*(?:(?P<cos>(?:(?P<coef>{_NUMBER})\s*\*\s*)?cos\(\s*2\s*\*\s*pi\s*\*\s*(?:(?P<k>{_NUMBER})\s*\*\s*)?x\s*\))|(?P<const>{_NUMBER}))\s*"
)


# --- periodic profiles -------------------------------------------------------

class Profile(ABC):
    """A periodic function of position on the torus."""

    def __init__(self, length: float = 1.0):
        self.length = length

    @abstractmethod
    def __call__(self, x) -> np.ndarray:
        pass

    @abstractmethod
    def derivative(self, x) -> np.ndarray:
        pass

    @abstractmethod
    def describe(self) -> str:
        pass

    def max_value(self, n_fine: int = 4096) -> float:
        xs = np.arange(n_fine) * (self.length / n_fine)
        return float(np.max(self(xs)))

    def lipschitz_bound(self, n_fine: int = 4096) -> float:
        xs = np.arange(n_fine) * (self.length / n_fine)
        return float(np.max(np.abs(self.derivative(xs))))


class TrigProfile(Profile):
    """A + sum_j B_j cos(2 pi k_j x / length)."""

    def __init__(self, constant: float = 0.0, terms: list[tuple[float, float]] | None = None,
                 length: float = 1.0, source: str | None = None):
        super().__init__(length)
        self.constant = float(constant)
        self.terms = [(float(b), float(k)) for b, k in (terms or [])]
        self.source = source

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, self.constant)
        for b, k in self.terms:
            out = out + b * np.cos(2 * np.pi * k * x / self.length)
        return out

    def derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for b, k in self.terms:
            w = 2 * np.pi * k / self.length
            out = out - b * w * np.sin(w * x)
        return out

    def max_value(self, n_fine: int = 4096) -> float:
        if not self.terms:
            return self.constant
        return super().max_value(n_fine)

    def describe(self) -> str:
        if self.source is not None:
            return self.source
        parts = [repr(self.constant)] + [f"{b!r}*cos(2*pi*{k!r}*x)" for b, k in self.terms]
        return " + ".join(parts)


class TabulatedProfile(Profile):
    """Piecewise-linear periodic interpolation of equally spaced samples."""

    def __init__(self, samples, length: float = 1.0, source: str | None = None):
        super().__init__(length)
        self.samples = np.asarray(samples, dtype=float)
        if self.samples.ndim != 1 or self.samples.size < 2:
            raise ValueError("tabulated profile needs a 1-D table with at least two samples")
        self.xp = np.arange(self.samples.size) * (length / self.samples.size)
        self.source = source

    def __call__(self, x) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=float), self.xp, self.samples, period=self.length)

    def derivative(self, x) -> np.ndarray:
        h = self.length / self.samples.size
        slopes = (np.roll(self.samples, -1) - self.samples) / h
        idx = np.floor(np.mod(np.asarray(x, dtype=float), self.length) / h).astype(int) % self.samples.size
        return slopes[idx]

    def describe(self) -> str:
        return self.source or f"table[{self.samples.size}]"


def parse_profile(expr: str | float | int, length: float = 1.0, base_dir: Path | None = None) -> Profile:
    """
    Parse a profile expression.

    Grammar: a sum of constants and terms "B*cos(2*pi*k*x)" (B and k optional),
    e.g. "0.5 + cos(2*pi*x)", "-0.3*cos(2*pi*2*x)"; or "table:<path>" naming a
    text file of equally spaced samples over one period.

    Raises:
        ValueError: If the expression does not match the grammar
    """
    if isinstance(expr, (int, float)):
        return TrigProfile(constant=float(expr), length=length, source=repr(float(expr)))
    text = expr.strip()
    if text.startswith("table:"):
        path = Path(text[len("table:"):].strip())
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return TabulatedProfile(np.loadtxt(path, ndmin=1), length=length, source=text)

    constant = 0.0
    terms: list[tuple[float, float]] = []
    pos = 0
    first = True
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m or m.end() == pos or (not first and m.group("sign") is None):
            raise ValueError(f"Cannot parse profile expression {expr!r} at position {pos}")
        sign = -1.0 if m.group("sign") == "-" else 1.0
        if m.group("cos"):
            coef = float(m.group("coef")) if m.group("coef") else 1.0
            k = float(m.group("k")) if m.group("k") else 1.0
            terms.append((sign * coef, k))
        else:
            constant += sign * float(m.group("const"))
        pos = m.end()
        first = False
    if first:
        raise ValueError(f"Empty profile expression: {expr!r}")
    return TrigProfile(constant=constant, terms=terms, length=length, source=text)


# --- models ------------------------------------------------------------------

@dataclass(frozen=True)
class LagrangianSample:
    """One evaluated Lagrangian value."""
    x: float
    u: float
    v: float
    L_value: float


class HamiltonianModel(ABC):
    """
    Abstract base for Hamiltonians H(x, u, p) convex and superlinear in p,
    uniformly Lipschitz in u.

    `shift` is the additive constant c: eval_H returns H - c and eval_L
    returns L + c. All evaluations broadcast over numpy arrays.
    """

    kind: str = ""

    def __init__(self, potential: Profile, shift: float = 0.0):
        self.potential = potential
        self.shift = float(shift)
        self._lam: float | None = None

    @abstractmethod
    def eval_H(self, x, u, p):
        pass

    @abstractmethod
    def eval_L(self, x, u, v):
        pass

    @abstractmethod
    def grad_H(self, x, u, p) -> tuple:
        """(H_x, H_u, H_p)."""
        pass

    @abstractmethod
    def _compute_lipschitz(self) -> float:
        pass

    @abstractmethod
    def with_shift(self, c: float) -> "HamiltonianModel":
        """Same model with shift c."""
        pass

    @abstractmethod
    def describe(self) -> dict[str, Any]:
        pass

    def lipschitz_constant(self) -> float:
        if self._lam is None:
            self._lam = float(self._compute_lipschitz())
        return self._lam

    @property
    def lam(self) -> float:
        return self.lipschitz_constant()

    def is_u_independent(self) -> bool:
        return self.lipschitz_constant() == 0.0

    def is_strictly_increasing_in_u(self) -> bool:
        """True when H_u > 0 everywhere (checked on samples for numeric models)."""
        return False

    def lagrangian_sample(self, x: float, u: float, v: float) -> LagrangianSample:
        return LagrangianSample(x=x, u=u, v=v, L_value=float(self.eval_L(x, u, v)))


class QuadraticHamiltonian(HamiltonianModel):
    """H(x, u, p) = (a/2) p^2 + beta*u + V(x) - c, with lambda = |beta|."""

    kind = "quadratic_family"

    def __init__(self, kinetic_coefficient: float = 1.0, u_coupling: float = 0.0,
                 potential: Profile | None = None, shift: float = 0.0):
        if not kinetic_coefficient > 0:
            raise ValueError(f"kinetic_coefficient must be positive, got {kinetic_coefficient}")
        super().__init__(potential or TrigProfile(0.0), shift)
        self.a = float(kinetic_coefficient)
        self.beta = float(u_coupling)

    def eval_H(self, x, u, p):
        return 0.5 * self.a * np.square(p) + self.beta * np.asarray(u, dtype=float) + self.potential(x) - self.shift

    def eval_L(self, x, u, v):
        return np.square(v) / (2.0 * self.a) - self.beta * np.asarray(u, dtype=float) - self.potential(x) + self.shift

    def grad_H(self, x, u, p) -> tuple:
        p = np.asarray(p, dtype=float)
        shape = np.broadcast(np.asarray(x), np.asarray(u), p).shape
        return (
            np.broadcast_to(self.potential.derivative(x), shape),
            np.full(shape, self.beta),
            np.broadcast_to(self.a * p, shape),
        )

    def _compute_lipschitz(self) -> float:
        return abs(self.beta)

    def is_strictly_increasing_in_u(self) -> bool:
        return self.beta > 0

    def with_shift(self, c: float) -> "QuadraticHamiltonian":
        return QuadraticHamiltonian(self.a, self.beta, self.potential, c)

    def describe(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "kinetic_coefficient": self.a,
            "u_coupling": self.beta,
            "potential": self.potential.describe(),
            "shift": self.shift,
        }


class ConvexHamiltonian(HamiltonianModel):
    """
    H(x, u, p) = h(x, u, p) - c for a user callable h convex in p.

    L is computed as sup_p [p v - H] by a grid search over [-p_max, p_max]
    followed by golden-section refinement; derivatives by central
    differences with step 1e-5 * max(1, |argument|).
    """

    kind = "custom_convex"

    def __init__(self, hamiltonian: Callable, potential: Profile | None = None, shift: float = 0.0,
                 p_max: float = 20.0, n_grid: int = 401, golden_iters: int = 80,
                 sample_x: int = 64, sample_p: int = 41, label: str = "custom",
                 params: dict[str, Any] | None = None):
        super().__init__(potential or TrigProfile(0.0), shift)
        self.h = hamiltonian
        self.p_max = float(p_max)
        self.n_grid = int(n_grid)
        self.golden_iters = int(golden_iters)
        self.sample_x = sample_x
        self.sample_p = sample_p
        self.label = label
        self.params = dict(params or {})

    @classmethod
    def mirror_quadratic(cls, kinetic_coefficient: float = 1.0, u_coupling: float = 0.0,
                         potential: Profile | None = None, shift: float = 0.0,
                         p_max: float = 20.0) -> "ConvexHamiltonian":
        """Numeric model of the quadratic family (every quantity via the generic path)."""
        pot = potential or TrigProfile(0.0)
        a, beta = float(kinetic_coefficient), float(u_coupling)

        def h(x, u, p):
            return 0.5 * a * np.square(p) + beta * np.asarray(u, dtype=float) + pot(x)

        return cls(h, potential=pot, shift=shift, p_max=p_max, label="mirror_quadratic",
                   params={"kinetic_coefficient": a, "u_coupling": beta})

    def eval_H(self, x, u, p):
        return self.h(x, u, p) - self.shift

    def _objective(self, x, u, v, p):
        return p * v - self.h(x, u, p)

    def eval_L(self, x, u, v, chunk: int = 4096):
        x, u, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(u, dtype=float),
                                      np.asarray(v, dtype=float))
        shape = x.shape
        xf, uf, vf = x.ravel(), u.ravel(), v.ravel()
        out = np.empty(xf.size)
        grid = np.linspace(-self.p_max, self.p_max, self.n_grid)
        step = grid[1] - grid[0]
        for start in range(0, xf.size, chunk):
            sl = slice(start, start + chunk)
            xs, us, vs = xf[sl, None], uf[sl, None], vf[sl, None]
            vals = self._objective(xs, us, vs, grid[None, :])
            idx = np.argmax(vals, axis=1)
            edge = (idx == 0) | (idx == self.n_grid - 1)
            if np.any(edge):
                raise TransformWindowError(self.p_max, int(np.count_nonzero(edge)))
            best = vals[np.arange(idx.size), idx]
            lo = grid[idx] - step
            hi = grid[idx] + step
            refined = self._golden_max(xs[:, 0], us[:, 0], vs[:, 0], lo, hi)
            out[sl] = np.maximum(best, refined)
        out = out + self.shift
        return out.reshape(shape) if shape else float(out[0])

    def _golden_max(self, x, u, v, a, b):
        # vectorized golden-section search for the max of the concave p -> p v - h
        c = b - _INVPHI * (b - a)
        d = a + _INVPHI * (b - a)
        fc = self._objective(x, u, v, c)
        fd = self._objective(x, u, v, d)
        for _ in range(self.golden_iters):
            left = fc >= fd
            a = np.where(left, a, c)
            b = np.where(left, d, b)
            new = np.where(left, b - _INVPHI * (b - a), a + _INVPHI * (b - a))
            fnew = self._objective(x, u, v, new)
            c, d, fc, fd = (
                np.where(left, new, d),
                np.where(left, c, new),
                np.where(left, fnew, fd),
                np.where(left, fc, fnew),
            )
        return np.maximum(fc, fd)

    def _partial(self, x, u, p, which: int):
        args = [np.asarray(a, dtype=float) for a in np.broadcast_arrays(x, u, p)]
        h = 1e-5 * np.maximum(1.0, np.abs(args[which]))
        plus = list(args)
        minus = list(args)
        plus[which] = args[which] + h
        minus[which] = args[which] - h
        return (self.h(*plus) - self.h(*minus)) / (2.0 * h)

    def grad_H(self, x, u, p) -> tuple:
        return tuple(self._partial(x, u, p, k) for k in range(3))

    def _sample_grid(self):
        xs = np.arange(self.sample_x) * (self.potential.length / self.sample_x)
        ps = np.linspace(-self.p_max, self.p_max, self.sample_p)
        us = np.array([-1.0, 0.0, 1.0])
        return np.meshgrid(xs, us, ps, indexing="ij")

    def _compute_lipschitz(self) -> float:
        X, U, P = self._sample_grid()
        return float(np.max(np.abs(self._partial(X, U, P, 1))))

    def is_strictly_increasing_in_u(self) -> bool:
        X, U, P = self._sample_grid()
        return bool(np.min(self._partial(X, U, P, 1)) > 0)

    def with_shift(self, c: float) -> "ConvexHamiltonian":
        clone = _clone(self)
        clone.shift = float(c)
        return clone

    def describe(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "label": self.label,
            **self.params,
            "potential": self.potential.describe(),
            "shift": self.shift,
            "p_max": self.p_max,
        }


def _clone(model: ConvexHamiltonian) -> ConvexHamiltonian:
    return ConvexHamiltonian(model.h, potential=model.potential, shift=model.shift, p_max=model.p_max,
                             n_grid=model.n_grid, golden_iters=model.golden_iters,
                             sample_x=model.sample_x, sample_p=model.sample_p,
                             label=model.label, params=model.params)


MODEL_MAP = {
    "quadratic_family": QuadraticHamiltonian,
    "quadratic": QuadraticHamiltonian,  # Alias
    "custom_convex": ConvexHamiltonian.mirror_quadratic,
}


def create_hamiltonian(kind: str = "quadratic_family", **kwargs) -> HamiltonianModel:
    """
    Create a Hamiltonian model by kind.

    For "custom_convex" the keyword arguments describe the quadratic family
    and the model evaluates everything through the numeric path.

    Raises:
        ValueError: If kind is unknown
    """
    factory = MODEL_MAP.get(kind.lower())
    if factory is None:
        raise ValueError(f"Unknown model kind: {kind}. Available: {', '.join(sorted(MODEL_MAP))}")
    logger.debug("creating %s model with %s", kind, kwargs)
    return factory(**kwargs)
