"""Discrete-event simulation of one picker alternating between two carousels.

While the picker works at one carousel the other rotates into position for
its next order. With ``B`` the preparation (rotation) time to the first item
and ``A`` the travel time over the rest of the order, successive sojourn
times obey

    S_{k+1} = (B_{k+1} - S_k)^+ + A_{k+1},   S_1 = B_1 + A_1.

Item positions are i.i.d. uniform on the unit circle, so every order is drawn
in a fresh frame with the carousel's stopping point at 0; no absolute angle
is tracked.

Random streams: replication ``r`` draws from ``PCG64(SeedSequence((base_seed,
r)))``, so results do not depend on the order replications are run in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit
from scipy import stats

from .densities import OrderSizeModel, StrategyId
from .numerics import DEFAULT_GRID_POINTS, DomainError, GridFunction

# positions per chunk; bounds memory for large orders
_CHUNK_FLOATS = 1 << 22


class OrderRealization(NamedTuple):
    positions: np.ndarray


class PrepTravel(NamedTuple):
    prep: float
    travel: float


def generate_order(rng: np.random.Generator, m: int) -> OrderRealization:
    """Draw `m` item positions, sorted, clockwise from the stopping point."""
    if int(m) != m or m < 1:
        raise DomainError(f"order size must be a positive integer, got {m}")
    return OrderRealization(np.sort(rng.random(int(m))))


# -- geometry of one order ------------------------------------------------

def _gaps(u: np.ndarray) -> np.ndarray:
    # gap i runs clockwise from u[i] to u[(i+1) % m]; the last one wraps
    return np.append(np.diff(u), 1.0 - u[-1] + u[0])


def _shortest_from(u: np.ndarray, clockwise: bool) -> float:
    """Travel from the first (clockwise) or last item, whichever way is shorter."""
    m = u.size
    if m == 1:
        return 0.0
    span = u[-1] - u[0]
    if clockwise:
        return min(span, u[0] + 1.0 - u[1])
    return min(span, 1.0 - u[-1] + u[-2])


def _near(p: float) -> float:
    return min(p, 1.0 - p)


def prep_and_travel(strategy: StrategyId, order: OrderRealization,
                    budget: float = 0.0) -> PrepTravel:
    """Preparation and travel time of one order under `strategy`.

    `budget` is the time available for preparation (the previous sojourn)
    and is only consulted by the gap-fallback strategy. Gap ties go to the
    gap with the lowest clockwise start index.

    When no gap endpoint is reachable within the budget, the gap-fallback
    strategy stays at the origin and sweeps the shorter way round once the
    picker arrives: ``prep = 0`` and the whole sweep is travel, so a single
    item then has nonzero travel time.
    """
    u = np.asarray(order.positions, dtype=float)
    m = u.size
    if m < 1:
        raise DomainError("an order needs at least one item")
    S = StrategyId
    if strategy is S.UNI_NEAREST:
        return PrepTravel(u[0], u[-1] - u[0])
    if strategy is S.BI_NEAREST_SAME_DIR:
        return PrepTravel(min(u[0], 1.0 - u[-1]), u[-1] - u[0])
    if strategy is S.BI_NEAREST_SHORTEST:
        cw = u[0] <= 1.0 - u[-1]
        return PrepTravel(min(u[0], 1.0 - u[-1]), _shortest_from(u, cw))
    if strategy is S.BI_SECOND_ITEM:
        if m == 1:
            return PrepTravel(_near(u[0]), 0.0)
        cw = u[1] <= 1.0 - u[-2]
        return PrepTravel(u[0] if cw else 1.0 - u[-1], _shortest_from(u, cw))

    g = _gaps(u)
    if strategy is S.UNI_AFTER_GAP:
        j = int(np.argmax(g))
        return PrepTravel(u[(j + 1) % m], 1.0 - g[j])
    if strategy is S.BI_AVOID_GAP:
        j = int(np.argmax(g))
        return PrepTravel(min(_near(u[j]), _near(u[(j + 1) % m])), 1.0 - g[j])
    if strategy is S.BI_GAP_FALLBACK:
        for j in np.argsort(-g, kind="stable"):
            d = min(_near(u[j]), _near(u[(j + 1) % m]))
            if d <= budget:
                return PrepTravel(d, 1.0 - g[j])
        return PrepTravel(0.0, min(u[-1], 1.0 - u[0]))
    raise DomainError(f"unknown strategy {strategy!r}")


def _batch_prep_travel(strategy: StrategyId, P: np.ndarray):
    """Vectorised :func:`prep_and_travel` over the sorted rows of `P`.

    For the gap-fallback strategy returns the ranked options instead:
    ``(d, a, fallback_a)`` with ``d[k, j]``, ``a[k, j]`` the preparation and
    travel time of the ``j``-th biggest gap of order ``k``.
    """
    S = StrategyId
    k, m = P.shape
    first, last = P[:, 0], P[:, -1]
    span = last - first
    rows = np.arange(k)
    if strategy is S.UNI_NEAREST:
        return first, span
    if strategy is S.BI_NEAREST_SAME_DIR:
        return np.minimum(first, 1.0 - last), span
    if strategy in (S.BI_NEAREST_SHORTEST, S.BI_SECOND_ITEM):
        if m == 1:
            return np.minimum(first, 1.0 - last), np.zeros(k)
        if strategy is S.BI_NEAREST_SHORTEST:
            cw = first <= 1.0 - last
        else:
            cw = P[:, 1] <= 1.0 - P[:, -2]
        travel = np.where(cw, np.minimum(span, first + 1.0 - P[:, 1]),
                          np.minimum(span, 1.0 - last + P[:, -2]))
        if strategy is S.BI_NEAREST_SHORTEST:
            return np.minimum(first, 1.0 - last), travel
        return np.where(cw, first, 1.0 - last), travel

    G = np.empty_like(P)
    G[:, :-1] = np.diff(P, axis=1)
    G[:, -1] = 1.0 - last + first
    near = np.minimum(P, 1.0 - P)
    near_end = np.minimum(near, np.roll(near, -1, axis=1))
    if strategy is S.UNI_AFTER_GAP:
        j = np.argmax(G, axis=1)
        return P[rows, (j + 1) % m], 1.0 - G[rows, j]
    if strategy is S.BI_AVOID_GAP:
        j = np.argmax(G, axis=1)
        return near_end[rows, j], 1.0 - G[rows, j]
    if strategy is S.BI_GAP_FALLBACK:
        order = np.argsort(-G, axis=1, kind="stable")
        d = np.take_along_axis(near_end, order, axis=1)
        a = 1.0 - np.take_along_axis(G, order, axis=1)
        return d, a, np.minimum(last, 1.0 - first)
    raise DomainError(f"unknown strategy {strategy!r}")


@njit(cache=True)
def _sojourn_chain(B, A, opt_row, opt_d, opt_a, fb_a, s_prev, out):
    for k in range(B.size):
        r = opt_row[k]
        if r >= 0:
            b = 0.0
            a = fb_a[r]
            for j in range(opt_d.shape[1]):
                if opt_d[r, j] <= s_prev:
                    b = opt_d[r, j]
                    a = opt_a[r, j]
                    break
        else:
            b = B[k]
            a = A[k]
        w = b - s_prev
        s = (w if w > 0.0 else 0.0) + a
        out[k] = s
        s_prev = s
    return s_prev


# -- configuration and results ---------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    """Two carousels, each with its own strategy and order-size law.

    Carousel A serves orders 1, 3, 5, ...; carousel B orders 2, 4, ....
    """

    strategy_a: StrategyId
    orders_a: OrderSizeModel
    strategy_b: StrategyId | None = None
    orders_b: OrderSizeModel | None = None
    total_orders: int = 100_000
    warmup_orders: int = 1_000
    replications: int = 20
    base_seed: int = 0
    grid_points: int = DEFAULT_GRID_POINTS

    def __post_init__(self):
        if self.strategy_b is None:
            object.__setattr__(self, "strategy_b", self.strategy_a)
        if self.orders_b is None:
            object.__setattr__(self, "orders_b", self.orders_a)
        if not self.total_orders > self.warmup_orders >= 0:
            raise DomainError("need total_orders > warmup_orders >= 0")
        if self.replications < 1:
            raise DomainError("need at least one replication")
        if not 0 <= self.base_seed < 2**64:
            raise DomainError("base_seed must be a 64-bit unsigned integer")

    @classmethod
    def symmetric(cls, strategy: StrategyId, orders: OrderSizeModel | int, **kw) -> SimConfig:
        if not isinstance(orders, OrderSizeModel):
            orders = OrderSizeModel.fixed(orders)
        return cls(strategy, orders, **kw)


@dataclass
class SimulationSummary:
    """Aggregate over replications; half-widths are Student-t 95%.

    Half-widths are ``None`` when they are undefined (one replication, or
    a single counted order per replication).
    """

    mean_sojourn: float
    mean_sojourn_hw: float | None
    throughput: float
    throughput_hw: float | None
    max_sojourn: float
    empirical_cdf: GridFunction
    rep_mean_sojourn: np.ndarray
    rep_throughput: np.ndarray
    counted_orders: int
    samples: np.ndarray | None = field(default=None, repr=False)

    @property
    def throughput_ci(self) -> tuple[float, float]:
        hw = self.throughput_hw if self.throughput_hw is not None else math.nan
        return self.throughput - hw, self.throughput + hw

    def to_dict(self) -> dict:
        return {
            "mean_sojourn": self.mean_sojourn,
            "mean_sojourn_hw": self.mean_sojourn_hw,
            "throughput": self.throughput,
            "throughput_hw": self.throughput_hw,
            "max_sojourn": self.max_sojourn,
            "counted_orders": self.counted_orders,
            "replications": int(self.rep_throughput.size),
            "rep_mean_sojourn": self.rep_mean_sojourn.tolist(),
            "rep_throughput": self.rep_throughput.tolist(),
        }


def replication_rng(base_seed: int, r: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((base_seed, r))))


def simulate_replication(cfg: SimConfig, r: int) -> np.ndarray:
    """All sojourn times of replication `r`, warm-up included."""
    rng = replication_rng(cfg.base_seed, r)
    total = cfg.total_orders
    out = np.empty(total)
    carousels = ((cfg.strategy_a, cfg.orders_a), (cfg.strategy_b, cfg.orders_b))
    max_size = max(cfg.orders_a.max_size, cfg.orders_b.max_size)
    chunk = max(2, min(1 << 20, _CHUNK_FLOATS // max_size) & ~1)
    s_prev = 0.0
    for start in range(0, total, chunk):
        stop = min(total, start + chunk)
        count = stop - start
        B = np.zeros(count)
        A = np.zeros(count)
        opt_row = np.full(count, -1, dtype=np.int64)
        opt_d = [np.full((0, max_size), np.inf)]
        opt_a = [np.zeros((0, max_size))]
        fb_a = [np.zeros(0)]
        n_opt = 0
        for side, (strategy, orders) in enumerate(carousels):
            # the chunk starts on an even global index, so parity gives the carousel
            idx = np.arange(side, count, 2)
            sizes = orders.sample(rng, idx.size)
            for m in np.unique(sizes):
                sel = idx[sizes == m]
                P = np.sort(rng.random((sel.size, int(m))), axis=1)
                res = _batch_prep_travel(strategy, P)
                if strategy is StrategyId.BI_GAP_FALLBACK:
                    d, a, fa = res
                    pad = max_size - int(m)
                    opt_d.append(np.pad(d, ((0, 0), (0, pad)), constant_values=np.inf))
                    opt_a.append(np.pad(a, ((0, 0), (0, pad))))
                    fb_a.append(fa)
                    opt_row[sel] = np.arange(n_opt, n_opt + sel.size)
                    n_opt += sel.size
                else:
                    B[sel], A[sel] = res
        s_prev = _sojourn_chain(B, A, opt_row, np.concatenate(opt_d), np.concatenate(opt_a),
                                np.concatenate(fb_a), s_prev, out[start:stop])
    return out


def _half_width(values: np.ndarray, counted: int) -> float | None:
    if values.size < 2 or counted < 2:
        return None
    return float(stats.t.ppf(0.975, values.size - 1) * values.std(ddof=1) / math.sqrt(values.size))


def run_simulation(cfg: SimConfig, keep_samples: bool = False) -> SimulationSummary:
    """Run every replication and aggregate throughput and sojourn statistics.

    The empirical CDF lives on the solver grid over ``[0, 1]``, extended to
    ``[0, 2]`` when some sojourn exceeds 1 (only gap strategies can do so).
    """
    n_nodes = 2 * cfg.grid_points - 1
    nodes = np.linspace(0.0, 2.0, n_nodes)
    counts = np.zeros(n_nodes, dtype=np.int64)
    rep_mean = np.empty(cfg.replications)
    rep_max = np.empty(cfg.replications)
    kept = []
    counted = cfg.total_orders - cfg.warmup_orders
    for r in range(cfg.replications):
        s = np.sort(simulate_replication(cfg, r)[cfg.warmup_orders:])
        rep_mean[r] = s.mean()
        rep_max[r] = s[-1]
        counts += np.searchsorted(s, nodes, side="right")
        if keep_samples:
            kept.append(s)
    rep_thr = 1.0 / rep_mean
    ecdf = counts / (counted * cfg.replications)
    max_sojourn = float(rep_max.max())
    if max_sojourn <= 1.0:
        ecdf_fn = GridFunction(1.0, ecdf[: cfg.grid_points])
    else:
        ecdf_fn = GridFunction(2.0, ecdf)
    return SimulationSummary(
        mean_sojourn=float(rep_mean.mean()),
        mean_sojourn_hw=_half_width(rep_mean, counted),
        throughput=float(rep_thr.mean()),
        throughput_hw=_half_width(rep_thr, counted),
        max_sojourn=max_sojourn,
        empirical_cdf=ecdf_fn,
        rep_mean_sojourn=rep_mean,
        rep_throughput=rep_thr,
        counted_orders=counted,
        samples=np.sort(np.concatenate(kept)) if keep_samples else None,
    )


def ks_distance(samples: np.ndarray, cdf) -> float:
    """Kolmogorov-Smirnov distance ``sup |F_n - F|`` between a sample and a CDF.

    `cdf` is a :class:`GridFunction` (taken as 1 beyond its grid) or any
    vectorised callable. Ties in the sample are handled exactly, and `cdf`
    is treated as continuous on ``(0, inf)`` with ``F(0-) = 0``, so an atom
    at zero (picker never waits, single-item orders) is accounted for.
    """
    s = np.sort(np.asarray(samples, dtype=float))
    if s.size == 0:
        raise DomainError("need at least one sample")
    values, counts = np.unique(s, return_counts=True)
    if isinstance(cdf, GridFunction):
        F = np.interp(values, cdf.x, cdf.values, right=1.0)
    else:
        F = np.asarray(cdf(values), dtype=float)
    F_left = np.where(values > 0, F, 0.0)
    cum = np.cumsum(counts) / s.size
    prev = np.concatenate(([0.0], cum[:-1]))
    return float(max(np.max(cum - F), np.max(F_left - prev)))


# -- strategy comparison ---------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    """How order sizes depend on the sweep parameter ``n``.

    ``balanced``: both carousels fixed ``n``. ``unbalanced``: carousel A
    fixed 1, carousel B fixed ``n``. ``two-point``: 1 with probability `p`,
    else ``2n - 1``. ``one-or-n``: 1 with probability `p`, else ``n``.
    ``uniform``: uniform on ``1..2n-1``.
    """

    kind: str
    p: float = 0.5

    KINDS = ("balanced", "unbalanced", "two-point", "one-or-n", "uniform")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown scenario {self.kind!r}; choose from {self.KINDS}")
        if not 0 < self.p < 1:
            raise DomainError("mixture probability must lie in (0, 1)")

    def order_sizes(self, n: int) -> tuple[OrderSizeModel, OrderSizeModel]:
        if self.kind == "balanced":
            m = OrderSizeModel.fixed(n)
            return m, m
        if self.kind == "unbalanced":
            return OrderSizeModel.fixed(1), OrderSizeModel.fixed(n)
        if self.kind == "uniform":
            m = OrderSizeModel.uniform(1, 2 * n - 1)
            return m, m
        high = 2 * n - 1 if self.kind == "two-point" else n
        m = OrderSizeModel.fixed(1) if high == 1 else OrderSizeModel.discrete(
            {1: self.p, high: 1 - self.p})
        return m, m

    def average_size(self, n: int) -> float:
        a, b = self.order_sizes(n)
        return (a.mean + b.mean) / 2


class CompareRow(NamedTuple):
    strategy: StrategyId
    n: int
    avg_size: float
    throughput: float
    ci_low: float
    ci_high: float
    mean_sojourn: float


def compare_strategies(strategies: Sequence[StrategyId], n_values: Sequence[int],
                       scenario: Scenario, base: SimConfig) -> list[CompareRow]:
    """Simulate every (strategy, n) pair under `scenario`.

    Order sizes and strategies in `base` are overridden; run lengths and
    seeds are shared, so all rows use common random numbers.
    """
    if not strategies or not n_values:
        raise DomainError("need at least one strategy and one order size")
    rows = []
    for strategy in strategies:
        for n in n_values:
            orders_a, orders_b = scenario.order_sizes(int(n))
            cfg = replace(base, strategy_a=strategy, strategy_b=strategy,
                          orders_a=orders_a, orders_b=orders_b)
            summ = run_simulation(cfg)
            lo, hi = summ.throughput_ci
            rows.append(CompareRow(strategy, int(n), scenario.average_size(int(n)),
                                   summ.throughput, lo, hi, summ.mean_sojourn))
    return rows
