"""Functions sampled on a uniform grid over ``[0, x_max]``.

Every sojourn-time CDF and every iterate of the integral operators lives in
a :class:`GridFunction`. Interpolation is piecewise linear and quadrature is
the trapezoid rule, so both are exact for the piecewise-linear interpolant of
the samples.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

DEFAULT_GRID_POINTS = 2049


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real function sampled at ``x_i = i * x_max / (n_points - 1)``.

    Instances are immutable; ``values`` is stored as a read-only array.
    """

    x_max: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise DomainError("values must be one-dimensional")
        if values.size < 3:
            raise DomainError(f"need at least 3 grid points, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise DomainError("grid values must be finite")
        if not (np.isfinite(self.x_max) and self.x_max > 0):
            raise DomainError(f"x_max must be positive, got {self.x_max}")
        values.setflags(write=False)
        object.__setattr__(self, "x_max", float(self.x_max))
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(
        cls,
        func: Callable[[np.ndarray], np.ndarray],
        n_points: int = DEFAULT_GRID_POINTS,
        x_max: float = 1.0,
    ) -> GridFunction:
        """Sample a vectorised callable on the grid."""
        x = grid(n_points, x_max)
        return cls(x_max, np.broadcast_to(np.asarray(func(x), dtype=float), x.shape))

    @classmethod
    def constant(cls, value: float, n_points: int = DEFAULT_GRID_POINTS,
                 x_max: float = 1.0) -> GridFunction:
        return cls(x_max, np.full(n_points, float(value)))

    @property
    def n_points(self) -> int:
        return self.values.size

    @property
    def h(self) -> float:
        return self.x_max / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        return grid(self.n_points, self.x_max)

    def __call__(self, x):
        return evaluate(self, x)

    def __repr__(self):
        return f"GridFunction(x_max={self.x_max}, n_points={self.n_points})"


def grid(n_points: int = DEFAULT_GRID_POINTS, x_max: float = 1.0) -> np.ndarray:
    if n_points < 3:
        raise DomainError(f"need at least 3 grid points, got {n_points}")
    return np.linspace(0.0, x_max, n_points)


def evaluate(f: GridFunction, x):
    """Piecewise-linear interpolation of `f` at `x` (scalar or array).

    Raises
    ------
    DomainError
        If any point lies outside ``[0, x_max]``.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(xa > f.x_max) or np.any(np.isnan(xa)):
        raise DomainError(f"evaluation point outside [0, {f.x_max}]")
    out = np.interp(xa, f.x, f.values)
    return float(out) if out.ndim == 0 else out


def integrate_prefix(f: GridFunction) -> GridFunction:
    """Trapezoid antiderivative ``G(t) = int_0^t f`` at every node, ``G(0) = 0``."""
    return GridFunction(f.x_max, cumulative_trapezoid(f.values, dx=f.h, initial=0.0))


def integrate(f: GridFunction) -> float:
    """Trapezoid rule over the whole grid."""
    return float(trapezoid(f.values, dx=f.h))


def _check_same_grid(f: GridFunction, g: GridFunction) -> None:
    if f.n_points != g.n_points or f.x_max != g.x_max:
        raise DomainError(
            f"grid mismatch: ({f.x_max}, {f.n_points}) vs ({g.x_max}, {g.n_points})"
        )


def sup_distance(f: GridFunction, g: GridFunction) -> float:
    """Maximum over the nodes of ``|f_i - g_i|``."""
    _check_same_grid(f, g)
    return float(np.max(np.abs(f.values - g.values)))


def clip_unit(f: GridFunction) -> GridFunction:
    """Clamp values to ``[0, 1]``."""
    return GridFunction(f.x_max, np.clip(f.values, 0.0, 1.0))
