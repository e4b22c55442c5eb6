"""Distributions of the preparation time B and travel time A.

Positions of the items of an order are i.i.d. uniform on a carousel of unit
circumference rotating at unit speed, so times and distances coincide. The
functions accept scalars or numpy arrays and return the same shape.

Powers of positive parts follow one convention throughout: ``pospow(b, k)``
is ``b**k`` when ``b > 0`` and ``0`` otherwise, also for ``k == 0``. This is
what makes the order-size-two formulas come out right.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .numerics import DomainError

_PMF_TOL = 1e-12


class StrategyId(enum.Enum):
    """The seven picking strategies, in their conventional order."""

    UNI_NEAREST = "uni-nearest"
    UNI_AFTER_GAP = "uni-after-gap"
    BI_NEAREST_SAME_DIR = "bi-nearest"
    BI_NEAREST_SHORTEST = "bi-shortest"
    BI_AVOID_GAP = "bi-avoid-gap"
    BI_SECOND_ITEM = "bi-second-item"
    BI_GAP_FALLBACK = "bi-gap-fallback"

    @property
    def solver_supported(self) -> bool:
        return self in _SOLVER_SUPPORTED

    @property
    def bidirectional(self) -> bool:
        return self not in (StrategyId.UNI_NEAREST, StrategyId.UNI_AFTER_GAP)

    @classmethod
    def parse(cls, name: str) -> StrategyId:
        key = name.strip().lower().replace("_", "-")
        for s in cls:
            if s.value == key or s.name.lower().replace("_", "-") == key:
                return s
        raise ValueError(f"unknown strategy {name!r}; choose from "
                         + ", ".join(s.value for s in cls))


_SOLVER_SUPPORTED = frozenset(
    {StrategyId.UNI_NEAREST, StrategyId.BI_NEAREST_SAME_DIR, StrategyId.BI_NEAREST_SHORTEST}
)


@dataclass(frozen=True)
class OrderSizeModel:
    """Distribution of the number of items in an order.

    A fixed size ``n`` is a one-point distribution; use :meth:`fixed`,
    :meth:`discrete`, :meth:`uniform` or :meth:`parse` to build one.
    """

    sizes: tuple[int, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.sizes) == 0 or len(self.sizes) != len(self.probs):
            raise DomainError("sizes and probabilities must be non-empty and aligned")
        if len(set(self.sizes)) != len(self.sizes):
            raise DomainError(f"order sizes must be distinct: {self.sizes}")
        if any(int(m) != m or m < 1 for m in self.sizes):
            raise DomainError(f"order sizes must be positive integers: {self.sizes}")
        if any(not p > 0 for p in self.probs):
            raise DomainError(f"probabilities must be positive: {self.probs}")
        if abs(sum(self.probs) - 1.0) > _PMF_TOL:
            raise DomainError(f"probabilities sum to {sum(self.probs)!r}, not 1")

    @classmethod
    def fixed(cls, n: int) -> OrderSizeModel:
        return cls((int(n),), (1.0,))

    @classmethod
    def discrete(cls, pmf) -> OrderSizeModel:
        """From a mapping ``{m: p_m}`` or an iterable of ``(m, p_m)`` pairs."""
        items = sorted(dict(pmf).items())
        return cls(tuple(int(m) for m, _ in items), tuple(float(p) for _, p in items))

    @classmethod
    def uniform(cls, low: int, high: int) -> OrderSizeModel:
        """Uniform on the integers ``low..high`` inclusive."""
        sizes = tuple(range(int(low), int(high) + 1))
        probs = np.full(len(sizes), 1.0 / len(sizes))
        probs[-1] = 1.0 - probs[:-1].sum()
        return cls(sizes, tuple(float(p) for p in probs))

    @classmethod
    def parse(cls, text: str) -> OrderSizeModel:
        """Parse ``"5"`` (fixed) or ``"1:0.5,9:0.5"`` (discrete)."""
        text = text.strip()
        if ":" not in text:
            return cls.fixed(int(text))
        pairs = []
        for part in text.split(","):
            m, p = part.split(":")
            pairs.append((int(m), float(p)))
        return cls.discrete(pairs)

    @property
    def is_fixed(self) -> bool:
        return len(self.sizes) == 1

    @property
    def max_size(self) -> int:
        return max(self.sizes)

    @property
    def mean(self) -> float:
        return float(np.dot(self.sizes, self.probs))

    @property
    def variance(self) -> float:
        s = np.asarray(self.sizes, dtype=float)
        return float(np.dot(self.probs, (s - self.mean) ** 2))

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.is_fixed:
            return np.full(count, self.sizes[0], dtype=np.int64)
        return rng.choice(np.asarray(self.sizes, dtype=np.int64), size=count,
                          p=np.asarray(self.probs))

    def __str__(self):
        if self.is_fixed:
            return str(self.sizes[0])
        return ",".join(f"{m}:{p:g}" for m, p in zip(self.sizes, self.probs))


def pospow(base, k):
    """``(base^+)^k`` with ``0^0`` taken as 0."""
    b = np.asarray(base, dtype=float)
    out = np.where(b > 0, np.maximum(b, 0.0) ** k, 0.0)
    return float(out) if out.ndim == 0 else out


def _ret(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _check_range(name, v, lo, hi):
    v = np.asarray(v, dtype=float)
    if np.any(np.isnan(v)) or np.any(v < lo) or np.any(v > hi):
        raise DomainError(f"{name} must lie in [{lo}, {hi}]")
    return v


def _check_n(n, least):
    if int(n) != n or n < least:
        raise DomainError(f"order size must be an integer >= {least}, got {n}")
    return int(n)


# -- single direction after the nearest item (uni-nearest and bi-nearest) --

def travel_density_single_dir(y, n: int):
    """Density ``n(n-1)(1-y)y^(n-2)`` of the sample range of `n` uniforms."""
    n = _check_n(n, 2)
    y = _check_range("y", y, 0.0, 1.0)
    inside = (y > 0) & (y < 1)
    return _ret(np.where(inside, n * (n - 1) * (1 - y) * np.abs(y) ** (n - 2), 0.0))


def travel_cdf_single_dir(y, n: int):
    """CDF ``n y^(n-1) - (n-1) y^n`` of the sample range; also the upper envelope."""
    n = _check_n(n, 1)
    y = _check_range("y", y, 0.0, 1.0)
    if n == 1:
        return _ret(np.ones_like(y))
    return _ret(n * y ** (n - 1) - (n - 1) * y ** n)


def prep_cdf_given_travel_uni(x, y):
    """``P[B <= x | A = y]`` when the carousel only turns one way: ``min(x/(1-y), 1)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y >= 1) or np.any(y < 0):
        raise DomainError("travel time must lie in [0, 1)")
    if np.any(x < 0):
        raise DomainError("x must be nonnegative")
    return _ret(np.minimum(x / (1 - y), 1.0))


def prep_cdf_given_travel_nearest(x, y):
    """``P[B <= x | A = y]`` for the nearest item on a bidirectional carousel.

    Given the travel time, the preparation time is uniform on ``[0, (1-y)/2]``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y >= 1) or np.any(y < 0):
        raise DomainError("travel time must lie in [0, 1)")
    if np.any(x < 0):
        raise DomainError("x must be nonnegative")
    return _ret(np.minimum(2 * x / (1 - y), 1.0))


# -- shortest single direction after the nearest item (bi-shortest) --

def prep_cdf_shortest(x, n: int):
    """Distance to the nearest item in either direction: ``1 - (1-2x)^n``."""
    n = _check_n(n, 1)
    x = _check_range("x", x, 0.0, 0.5)
    return _ret(1 - (1 - 2 * x) ** n)


def prep_density_shortest(x, n: int):
    n = _check_n(n, 1)
    x = _check_range("x", x, 0.0, 0.5)
    return _ret(2 * n * (1 - 2 * x) ** (n - 1))


def travel_cdf_shortest(y, n: int):
    n = _check_n(n, 2)
    y = _check_range("y", y, 0.0, 1.0)
    g = np.maximum(2 * y - 1, 0.0)
    return _ret(2 * y ** n + n * y ** (n - 1) * (1 - y) - g ** n - n * g ** (n - 1) * (1 - y))


def travel_density_shortest(y, n: int):
    n = _check_n(n, 2)
    y = _check_range("y", y, 0.0, 1.0)
    # y**0 is 1 even at y = 0: the n = 2 travel time is uniform on [0, 1/2]
    head = n * y ** (n - 2) * (y + (n - 1) * (1 - y))
    tail = n * pospow(2 * y - 1, n - 2) * (2 * (n - 1) * (1 - y) + 2 * y - 1)
    return _ret(head - tail)


def travel_cdf_given_prep_shortest(y, x, n: int):
    """``P[A <= y | B = x]`` for the shortest-direction strategy."""
    n = _check_n(n, 3)
    x = _check_range("x", x, 0.0, 0.5)
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or np.any(y > 1 - 2 * x + 1e-15):
        raise DomainError("y must lie in [0, 1 - 2x]")
    w = 1 - 2 * x
    with np.errstate(divide="ignore", invalid="ignore"):
        main = pospow(y / w, n - 1)
        extra = pospow((y - 2 * x) / w, n - 1) - pospow((2 * y - 1) / w, n - 1)
        out = np.where(x >= 0.25, main, main + extra)
    # B = 1/2 forces every item onto one point, hence A = 0
    return _ret(np.where(w == 0, 1.0, out))


def travel_density_given_prep_shortest(y, x, n: int):
    """``f_{A|B=x}(y)``, the y-derivative of :func:`travel_cdf_given_prep_shortest`."""
    n = _check_n(n, 3)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = 1 - 2 * x
    inside = (y >= 0) & (y <= w) & (x >= 0) & (x < 0.5)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = (n - 1) / np.where(inside, w, 1.0) ** (n - 1)
        near = pospow(y, n - 2) + pospow(y - 2 * x, n - 2) - 2 * pospow(2 * y - 1, n - 2)
        out = scale * np.where(x <= 0.25, near, pospow(y, n - 2))
    return _ret(np.where(inside, out, 0.0))


def prep_cdf_given_travel_shortest(x, y, n: int):
    """``P[B <= x | A = y]`` for the shortest-direction strategy.

    Two branches meeting at ``x = 1/4``; both are normalised by the travel
    density, so conditioning on a zero-density travel time is an error.
    """
    n = _check_n(n, 3)
    y = _check_range("y", y, 0.0, 1.0)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > (1 - y) / 2 + 1e-15):
        raise DomainError("x must lie in [0, (1-y)/2]")
    fa = np.asarray(travel_density_shortest(y, n))
    if np.any(fa <= 0):
        raise DomainError("travel density vanishes at y; conditional law undefined")
    low = (2 * n * (n - 1) * pospow(y, n - 2) * x - n * pospow(y - 2 * x, n - 1)
           + n * pospow(y, n - 1) - 4 * n * (n - 1) * pospow(2 * y - 1, n - 2) * x)
    high = 2 * n * (n - 1) * pospow(y, n - 2) * x + n * pospow(y, n - 1)
    return _ret(np.where(x <= np.minimum((1 - y) / 2, 0.25), low, high) / fa)
