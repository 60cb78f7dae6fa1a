"""Periodic spatial grid on the flat 1-D torus and the uniform time grid."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidWindowError


@dataclass(frozen=True)
class PeriodicGrid:
    """
    n equally spaced nodes on a circle of circumference `length`.

    Node indices wrap modulo n; node(i) = i * spacing.
    """
    n: int
    length: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"grid needs at least one node, got n={self.n}")
        if not self.length > 0:
            raise ValueError(f"torus length must be positive, got {self.length}")

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    def node(self, i: int) -> float:
        return (i % self.n) * self.spacing

    def nearest_node(self, x: float) -> int:
        return int(round((x % self.length) / self.spacing)) % self.n

    def periodic_displacement(self, a, b):
        """
        Signed displacement d with b = a + d (mod length) and -length/2 < d <= length/2.

        Works elementwise on arrays. The half-torus tie resolves to +length/2.
        """
        half = self.length / 2
        d = np.mod(np.asarray(b, dtype=float) - np.asarray(a, dtype=float), self.length)
        d = np.where(d > half, d - self.length, d)
        return d if np.ndim(d) else float(d)

    def periodic_distance(self, a, b):
        return np.abs(self.periodic_displacement(a, b))

    def window_offsets(self, radius_nodes: int) -> np.ndarray:
        """
        Index offsets of a search window in increasing displacement order.

        When the window spans the half torus (2r >= n) the offset -r would
        alias +r; it is dropped so every node appears once.
        """
        if radius_nodes < 0 or 2 * radius_nodes > self.n:
            raise InvalidWindowError(radius_nodes, self.n)
        lo = -radius_nodes
        if 2 * radius_nodes == self.n:
            lo += 1
        return np.arange(lo, radius_nodes + 1)

    def neighborhood(self, i: int, radius_nodes: int) -> list[int]:
        """Nodes within radius_nodes index steps of i, ordered by displacement from i."""
        if not 0 <= i < self.n:
            raise IndexError(f"node index {i} outside [0, {self.n})")
        return [int(j) for j in (i + self.window_offsets(radius_nodes)) % self.n]

    def index_displacement(self, i, j):
        """Wrapped index step from i to j in (-n/2, n/2]."""
        d = np.mod(np.asarray(j) - np.asarray(i), self.n)
        d = np.where(2 * d > self.n, d - self.n, d)
        return d if np.ndim(d) else int(d)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid t_k = k * dt for k = 0..steps."""
    dt: float
    steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.steps < 0:
            raise ValueError(f"steps must be non-negative, got {self.steps}")

    @classmethod
    def from_horizon(cls, T: float, dt: float) -> "TimeGrid":
        """Grid with steps = round(T/dt); T should be a multiple of dt."""
        return cls(dt=dt, steps=int(round(T / dt)))

    @property
    def horizon(self) -> float:
        return self.steps * self.dt

    def time(self, k: int) -> float:
        return k * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt
