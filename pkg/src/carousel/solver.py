"""Stationary sojourn-time distribution by successive substitution.

For the three analytically tractable strategies the stationary sojourn CDF
is the fixed point of an affine operator

    (Omega F)(x) = F_A(x) - int_0^1 K_x(z) F(z) dz,

where ``F_A`` is the travel-time CDF and ``K_x`` a nonnegative kernel. The
operators are sup-norm contractions, so iterating from any start converges
geometrically and the contraction constant gives a-posteriori error bounds.

The kernels are written after integrating the double integrals over the
travel time analytically, which leaves a one-dimensional, piecewise
polynomial kernel in ``z``. Its product with the piecewise-linear
interpolant of ``F`` is integrated exactly by Gauss-Legendre rules on the
cells of the grid, split at the kernel's kinks.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

from .densities import (
    OrderSizeModel,
    StrategyId,
    pospow,
    travel_cdf_shortest,
    travel_cdf_single_dir,
)
from .numerics import (
    DEFAULT_GRID_POINTS,
    DomainError,
    GridFunction,
    clip_unit,
    evaluate,
    grid,
    integrate,
    integrate_prefix,
    sup_distance,
)

__all__ = [
    "ConvergenceError",
    "SolverConfig",
    "SolveResult",
    "VariableSolution",
    "apply_operator",
    "apply_operator_uni_nearest",
    "apply_operator_bi_nearest",
    "apply_operator_bi_shortest",
    "apply_operator_single_item_bi",
    "closed_form_single_item_bi",
    "conditional_cdf_uni",
    "contraction_bound",
    "moments",
    "operator_kernel",
    "solve_sojourn",
    "solve_variable_uni",
    "upper_envelope",
]

log = logging.getLogger(__name__)

Initial = Union[str, GridFunction]


class ConvergenceError(RuntimeError):
    """Iteration hit ``max_iter`` before the step size dropped below ``tol``."""

    def __init__(self, message, last: GridFunction, residual: float, iterations: int):
        super().__init__(message)
        self.last = last
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SolverConfig:
    """Grid and stopping rule for :func:`solve_sojourn`.

    ``initial`` is ``"zero"``, ``"upper"`` (the travel-time CDF, i.e. the
    first iterate from zero) or an explicit :class:`GridFunction`.
    ``keep_iterates`` caps how many iterates are stored in the result.
    """

    grid_points: int = DEFAULT_GRID_POINTS
    tol: float = 1e-8
    max_iter: int = 200
    initial: Initial = "zero"
    keep_iterates: int = 64

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.grid_points < 3:
            raise DomainError("grid_points must be at least 3")
        if self.max_iter < 1:
            raise DomainError("max_iter must be at least 1")
        if isinstance(self.initial, str) and self.initial not in ("zero", "upper"):
            raise DomainError(f"unknown initial function {self.initial!r}")


@dataclass
class SolveResult:
    cdf: GridFunction
    residual: float
    iterations: int
    contraction_bound: float
    aposteriori_error: float
    mean_sojourn: float
    throughput: float
    iterates: list[GridFunction] = field(default_factory=list, repr=False)
    steps: list[float] = field(default_factory=list, repr=False)


class VariableSolution(NamedTuple):
    components: dict[int, GridFunction]
    mixture: GridFunction
    result: SolveResult


def _require_n(n: int, least: int = 2) -> int:
    if int(n) != n or n < least:
        raise DomainError(f"order size must be an integer >= {least}, got {n}")
    return int(n)


def _require_unit_grid(F: GridFunction) -> None:
    if F.x_max != 1.0:
        raise DomainError(f"operators act on functions over [0, 1], got x_max={F.x_max}")


def upper_envelope(n: int, n_points: int = DEFAULT_GRID_POINTS) -> GridFunction:
    """``n x^(n-1) - (n-1) x^n``, the first iterate from zero for the nearest-item strategies."""
    return GridFunction(1.0, travel_cdf_single_dir(grid(n_points), n))


def contraction_bound(strategy: StrategyId, n: int) -> float:
    """Sup-norm Lipschitz bound of the sojourn operator."""
    n = _require_n(n)
    if strategy in (StrategyId.UNI_NEAREST, StrategyId.BI_NEAREST_SAME_DIR):
        return ((n - 1) / n) ** (n - 1)
    if strategy is StrategyId.BI_NEAREST_SHORTEST:
        return 11 / 12
    raise DomainError(f"no integral operator for strategy {strategy.value}")


# -- kernels --------------------------------------------------------------

def operator_kernel(strategy: StrategyId, n: int, x: float, z):
    """``K_x(z)`` such that ``(Omega F)(x) = F_A(x) - int K_x(z) F(z) dz``.

    Vectorised in `z`; zero outside the kernel's support.
    """
    n = _require_n(n)
    z = np.asarray(z, dtype=float)
    x = float(x)
    if strategy is StrategyId.UNI_NEAREST:
        return np.where((z >= 0) & (z <= 1 - x), n * x ** (n - 1), 0.0)
    if strategy is StrategyId.BI_NEAREST_SAME_DIR:
        return _kernel_nearest(n, x, z)
    if strategy is StrategyId.BI_NEAREST_SHORTEST:
        return _kernel_nearest(n, x, z) + _kernel_reverse(n, x, z) - _kernel_far(n, x, z)
    raise DomainError(f"no integral operator for strategy {strategy.value}")


def _kernel_nearest(n, x, z):
    # y^(n-2) term integrated over y in [max(0, 2x+2z-1), x]
    inside = (z >= 0) & (z < (1 - x) / 2)
    return np.where(inside, 2 * n * (x ** (n - 1) - pospow(2 * x + 2 * z - 1, n - 1)), 0.0)


def _kernel_reverse(n, x, z):
    # ((3y-2x-2z)^+)^(n-2) term; the lower y-limit is the largest active constraint
    lo = max(max(x - 0.25, 0.0), 2 * x - 1)
    ylo = np.maximum.reduce([np.full_like(z, lo), z + x - 0.25, 2 * z + 2 * x - 1,
                             (2 * x + 2 * z) / 3])
    inside = (z >= 0) & (ylo < x)
    val = (2 * n / 3) * (pospow(x - 2 * z, n - 1) - pospow(3 * ylo - 2 * x - 2 * z, n - 1))
    return np.where(inside, val, 0.0)


def _kernel_far(n, x, z):
    # (2y-1)^(n-2) term, only present past x = 1/2
    if x <= 0.5:
        return np.zeros_like(z)
    inside = (z >= 0) & (z < (1 - x) / 2)
    val = 2 * n * ((2 * x - 1) ** (n - 1) - pospow(4 * x + 4 * z - 3, n - 1))
    return np.where(inside, val, 0.0)


def _kinks(x: float) -> np.ndarray:
    return np.array([
        1 - x, (1 - x) / 2, 0.5 - x, x / 2, 0.25, 0.75 - x, x / 2 - 0.375,
        2 * x - 1.5, x - 0.75, (0.75 - x) / 2,
    ])


@functools.lru_cache(maxsize=6)
def _kernel_matrix(strategy: StrategyId, n: int, n_points: int) -> np.ndarray:
    """Weights ``W[i, k]`` with ``sum_k W[i, k] F_k = int K_{x_i}(z) F~(z) dz``.

    ``F~`` is the piecewise-linear interpolant of the samples ``F_k``. Each
    kernel piece is a polynomial of degree ``n - 1`` in ``z``, so a
    ``q``-point Gauss-Legendre rule with ``2q - 1 >= n`` is exact on it.
    """
    x = grid(n_points)
    h = 1.0 / (n_points - 1)
    q = max(6, n // 2 + 2)
    xi, wi = np.polynomial.legendre.leggauss(q)
    W = np.zeros((n_points, n_points))
    for i, xv in enumerate(x):
        zmax = 1 - xv if strategy is StrategyId.UNI_NEAREST else (1 - xv) / 2
        if zmax <= 0:
            continue
        ncell = min(int(math.ceil(zmax / h - 1e-9)), n_points - 1)
        kinks = _kinks(xv)
        pts = np.union1d(np.minimum(x[: ncell + 1], zmax),
                         kinks[(kinks > 0) & (kinks < zmax)])
        pts = np.append(pts[pts < zmax], zmax)
        a, b = pts[:-1], pts[1:]
        keep = b - a > 1e-15
        a, b = a[keep], b[keep]
        half = (b - a) / 2
        t = (a + half)[:, None] + half[:, None] * xi
        kv = operator_kernel(strategy, n, xv, t) * wi * half[:, None]
        cell = np.minimum(((a + half) / h).astype(np.int64), n_points - 2)
        s = t / h - cell[:, None]
        W[i] += np.bincount(cell, weights=((1 - s) * kv).sum(axis=1), minlength=n_points)
        W[i] += np.bincount(cell + 1, weights=(s * kv).sum(axis=1), minlength=n_points)
    W.setflags(write=False)
    return W


@functools.lru_cache(maxsize=16)
def _travel_cdf(strategy: StrategyId, n: int, n_points: int) -> np.ndarray:
    x = grid(n_points)
    if strategy is StrategyId.BI_NEAREST_SHORTEST:
        out = np.asarray(travel_cdf_shortest(x, n))
    else:
        out = np.asarray(travel_cdf_single_dir(x, n))
    out.setflags(write=False)
    return out


def closed_form_single_item_bi(x):
    """Stationary sojourn CDF for single-item orders on a bidirectional carousel.

    ``sin(2x) + (1 - sin 1)/cos 1 * cos(2x)`` on ``[0, 1/2]`` and 1 beyond;
    the value at 0 is the probability that the picker never waits.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("x must be nonnegative")
    c = (1 - np.sin(1.0)) / np.cos(1.0)
    xs = np.minimum(x, 0.5)
    out = np.where(x <= 0.5, np.sin(2 * xs) + c * np.cos(2 * xs), 1.0)
    return float(out) if out.ndim == 0 else out


# -- operators ------------------------------------------------------------

def apply_operator_uni_nearest(F: GridFunction, n: int) -> GridFunction:
    """One substitution for the unidirectional nearest-item strategy."""
    n = _require_n(n)
    _require_unit_grid(F)
    x = F.x
    G = integrate_prefix(F).values
    # 1 - x_i is the node N-1-i, so the prefix integral is read off directly
    out = _travel_cdf(StrategyId.UNI_NEAREST, n, F.n_points) - n * x ** (n - 1) * G[::-1]
    return clip_unit(GridFunction(1.0, out))


def _apply_matrix(strategy: StrategyId, F: GridFunction, n: int) -> GridFunction:
    n = _require_n(n)
    _require_unit_grid(F)
    W = _kernel_matrix(strategy, n, F.n_points)
    out = _travel_cdf(strategy, n, F.n_points) - W @ F.values
    return clip_unit(GridFunction(1.0, out))


def apply_operator_bi_nearest(F: GridFunction, n: int) -> GridFunction:
    """One substitution for nearest item, same direction, bidirectional carousel."""
    return _apply_matrix(StrategyId.BI_NEAREST_SAME_DIR, F, n)


def apply_operator_bi_shortest(F: GridFunction, n: int) -> GridFunction:
    """One substitution for nearest item, then the shorter single direction."""
    return _apply_matrix(StrategyId.BI_NEAREST_SHORTEST, F, n)


def apply_operator(strategy: StrategyId, F: GridFunction, n: int) -> GridFunction:
    if strategy is StrategyId.UNI_NEAREST:
        return apply_operator_uni_nearest(F, n)
    if strategy is StrategyId.BI_NEAREST_SAME_DIR:
        return apply_operator_bi_nearest(F, n)
    if strategy is StrategyId.BI_NEAREST_SHORTEST:
        return apply_operator_bi_shortest(F, n)
    raise DomainError(f"no integral operator for strategy {strategy.value}")


def apply_operator_single_item_bi(F: GridFunction) -> GridFunction:
    """``1 - 2 int_0^{(1/2 - x)^+} F``: single-item orders, bidirectional carousel.

    Not a strict contraction (its Lipschitz constant is 1, attained at
    ``x = 0``); used to check :func:`closed_form_single_item_bi`.
    """
    _require_unit_grid(F)
    G = integrate_prefix(F)
    upper = np.maximum(0.5 - F.x, 0.0)
    return clip_unit(GridFunction(1.0, 1 - 2 * evaluate(G, upper)))


# -- moments and solvers --------------------------------------------------

def moments(cdf: GridFunction) -> tuple[float, float]:
    """Mean sojourn time ``int (1 - F)`` and its reciprocal, the throughput."""
    mean = cdf.x_max - integrate(cdf)
    if not mean > 0:
        raise DomainError(f"mean sojourn time must be positive, got {mean}")
    return mean, 1.0 / mean


def _initial(cfg: SolverConfig, envelope: np.ndarray) -> GridFunction:
    if isinstance(cfg.initial, GridFunction):
        if cfg.initial.n_points != cfg.grid_points or cfg.initial.x_max != 1.0:
            raise DomainError("initial function must live on the solver grid over [0, 1]")
        return cfg.initial
    if cfg.initial == "upper":
        return GridFunction(1.0, envelope)
    return GridFunction.constant(0.0, cfg.grid_points)


def _iterate(step_fn, F0: GridFunction, cfg: SolverConfig, c: float):
    F = F0
    iterates = [F0]
    steps = []
    for k in range(1, cfg.max_iter + 1):
        G = step_fn(F)
        step = sup_distance(G, F)
        steps.append(step)
        F = G
        if len(iterates) < cfg.keep_iterates:
            iterates.append(F)
        log.debug("iteration %d: step %.3e", k, step)
        if step < cfg.tol:
            return F, k, iterates, steps
    raise ConvergenceError(
        f"no convergence after {cfg.max_iter} iterations (last step {steps[-1]:.3e})",
        last=F, residual=steps[-1], iterations=cfg.max_iter,
    )


def _aposteriori(c: float, step: float) -> float:
    return c / (1 - c) * step if c < 1 else math.inf


def solve_sojourn(strategy: StrategyId, n: int, config: SolverConfig | None = None) -> SolveResult:
    """Iterate the sojourn operator of `strategy` to its fixed point.

    Orders of a single item on a bidirectional carousel have a closed-form
    answer, returned with ``iterations == 0``; its residual is measured with
    :func:`apply_operator_single_item_bi`.

    Raises
    ------
    DomainError
        For strategies without an integral operator, and for single-item
        orders on a unidirectional carousel.
    ConvergenceError
        If the step size is still above ``tol`` after ``max_iter`` iterations.
    """
    cfg = config or SolverConfig()
    if not strategy.solver_supported:
        raise DomainError(f"no integral operator for strategy {strategy.value}")
    if n == 1:
        if not strategy.bidirectional:
            raise DomainError("single-item orders on a unidirectional carousel are not covered")
        cdf = GridFunction(1.0, closed_form_single_item_bi(grid(cfg.grid_points)))
        mean, thr = moments(cdf)
        residual = sup_distance(apply_operator_single_item_bi(cdf), cdf)
        return SolveResult(cdf, residual, 0, 1.0, math.nan, mean, thr, [cdf], [])
    n = _require_n(n)
    c = contraction_bound(strategy, n)
    F0 = _initial(cfg, _travel_cdf(strategy, n, cfg.grid_points))
    cdf, k, iterates, steps = _iterate(lambda F: apply_operator(strategy, F, n), F0, cfg, c)
    residual = sup_distance(apply_operator(strategy, cdf, n), cdf)
    mean, thr = moments(cdf)
    return SolveResult(cdf, residual, k, c, _aposteriori(c, steps[-1]), mean, thr,
                       iterates, steps)


def conditional_cdf_uni(m: int, mixture: GridFunction) -> GridFunction:
    """Sojourn CDF of an order of size `m` given the stationary mixture CDF.

    Unidirectional carousel, nearest item first. The mixture enters only
    through ``int_0^{1-x} F``, so this also gives sizes of probability zero.
    """
    m = _require_n(m, 1)
    _require_unit_grid(mixture)
    x = mixture.x
    tail = integrate_prefix(mixture).values[::-1]
    if m == 1:
        out = 1 - tail
    else:
        out = travel_cdf_single_dir(x, m) - m * x ** (m - 1) * tail
    return clip_unit(GridFunction(1.0, out))


def solve_variable_uni(pmf: OrderSizeModel, config: SolverConfig | None = None) -> VariableSolution:
    """Jointly iterate the per-size sojourn CDFs for random order sizes.

    Unidirectional carousel, nearest item first. The iteration runs on the
    vector of conditional CDFs, one per size in the support, and stops when
    the largest componentwise step is below ``tol``. With size 1 in the
    support the sup-norm Lipschitz constant is 1, so no a-posteriori bound
    is available (reported as ``inf``).
    """
    cfg = config or SolverConfig()
    sizes = pmf.sizes
    probs = np.asarray(pmf.probs)
    x = grid(cfg.grid_points)
    envelopes = {m: np.asarray(travel_cdf_single_dir(x, m)) for m in sizes}
    comps = {m: np.zeros(cfg.grid_points) for m in sizes}
    if cfg.initial == "upper":
        comps = {m: envelopes[m].copy() for m in sizes}
    elif isinstance(cfg.initial, GridFunction):
        comps = {m: cfg.initial.values.copy() for m in sizes}

    def mixture(cs):
        return sum(p * cs[m] for m, p in zip(sizes, probs))

    c = max(((m - 1) / m) ** (m - 1) if m > 1 else 1.0 for m in sizes)
    iterates = [GridFunction(1.0, mixture(comps))]
    steps = []
    for k in range(1, cfg.max_iter + 1):
        tail = integrate_prefix(GridFunction(1.0, mixture(comps))).values[::-1]
        new = {}
        for m in sizes:
            if m == 1:
                new[m] = np.clip(1 - tail, 0, 1)
            else:
                new[m] = np.clip(envelopes[m] - m * x ** (m - 1) * tail, 0, 1)
        step = max(float(np.max(np.abs(new[m] - comps[m]))) for m in sizes)
        steps.append(step)
        comps = new
        if len(iterates) < cfg.keep_iterates:
            iterates.append(GridFunction(1.0, mixture(comps)))
        if step < cfg.tol:
            break
    else:
        raise ConvergenceError(
            f"no convergence after {cfg.max_iter} iterations (last step {steps[-1]:.3e})",
            last=GridFunction(1.0, mixture(comps)), residual=steps[-1],
            iterations=cfg.max_iter,
        )
    mix = GridFunction(1.0, mixture(comps))
    components = {m: GridFunction(1.0, v) for m, v in comps.items()}
    residual = max(sup_distance(conditional_cdf_uni(m, mix), components[m]) for m in sizes)
    mean, thr = moments(mix)
    result = SolveResult(mix, residual, k, c, _aposteriori(c, steps[-1]), mean, thr,
                         iterates, steps)
    return VariableSolution(components, mix, result)
