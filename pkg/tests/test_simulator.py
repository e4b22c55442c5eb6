import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from carousel import simulator as sim
from carousel.densities import OrderSizeModel, StrategyId
from carousel.numerics import DomainError, GridFunction
from carousel.simulator import (
    OrderRealization,
    Scenario,
    SimConfig,
    compare_strategies,
    generate_order,
    ks_distance,
    prep_and_travel,
    run_simulation,
    simulate_replication,
)

S = StrategyId
ORDER = OrderRealization(np.array([0.1, 0.2, 0.8]))

positions = st.lists(st.floats(0.0, 1.0, exclude_max=True, allow_nan=False),
                     min_size=1, max_size=12).map(lambda v: np.sort(np.array(v)))


def reference_run(cfg: SimConfig, r: int) -> np.ndarray:
    """Order-by-order simulation through the scalar geometry, own random stream."""
    rng = np.random.default_rng([cfg.base_seed, r, 99])
    sides = ((cfg.strategy_a, cfg.orders_a), (cfg.strategy_b, cfg.orders_b))
    out = np.empty(cfg.total_orders)
    s = 0.0
    for k in range(cfg.total_orders):
        strategy, orders = sides[k % 2]
        m = int(orders.sample(rng, 1)[0])
        b, a = prep_and_travel(strategy, generate_order(rng, m), budget=s)
        s = max(b - s, 0.0) + a
        out[k] = s
    return out


# -- orders -------------------------------------------------------------------

class TestGenerateOrder:
    def test_range_and_order(self):
        rng = np.random.default_rng(1)
        u = generate_order(rng, 1).positions
        assert u.shape == (1,) and 0 <= u[0] < 1
        u = generate_order(rng, 5).positions
        assert np.all(np.diff(u) >= 0) and np.all((u >= 0) & (u < 1))

    @pytest.mark.parametrize("m", [0, -1, 2.5])
    def test_bad_size(self, m):
        with pytest.raises(DomainError):
            generate_order(np.random.default_rng(0), m)

    def test_minimum_follows_order_statistic_law(self):
        rng = np.random.default_rng(2)
        mins = np.array([generate_order(rng, 3).positions[0] for _ in range(40_000)])
        assert stats.kstest(mins, lambda x: 1 - (1 - x) ** 3).pvalue > 1e-3


# -- geometry -------------------------------------------------------------------

class TestGeometry:
    def test_shortest_example(self):
        assert prep_and_travel(S.BI_NEAREST_SHORTEST, ORDER) == pytest.approx((0.1, 0.7))

    def test_avoid_gap_example(self):
        assert prep_and_travel(S.BI_AVOID_GAP, ORDER) == pytest.approx((0.2, 0.4))

    def test_after_gap_example(self):
        assert prep_and_travel(S.UNI_AFTER_GAP, ORDER) == pytest.approx((0.8, 0.4))

    def test_nearest_examples(self):
        assert prep_and_travel(S.UNI_NEAREST, ORDER) == pytest.approx((0.1, 0.7))
        assert prep_and_travel(S.BI_NEAREST_SAME_DIR, ORDER) == pytest.approx((0.1, 0.7))

    def test_second_item_matches_shortest_on_example(self):
        # second items: clockwise 0.2, counterclockwise 1 - 0.2 = 0.8
        assert prep_and_travel(S.BI_SECOND_ITEM, ORDER) == pytest.approx((0.1, 0.7))

    def test_second_item_can_turn_away_from_nearest(self):
        order = OrderRealization(np.array([0.1, 0.45, 0.8, 0.85]))
        # nearest is 0.1 clockwise, but the second item is nearer going the other way
        assert prep_and_travel(S.BI_SECOND_ITEM, order) == pytest.approx((0.15, 0.75))
        assert prep_and_travel(S.BI_NEAREST_SHORTEST, order) == pytest.approx((0.1, 0.65))

    @pytest.mark.parametrize("budget,expected", [(1.0, (0.2, 0.4)), (0.1, (0.1, 0.7)),
                                                 (0.05, (0.0, 0.8))])
    def test_gap_fallback(self, budget, expected):
        assert prep_and_travel(S.BI_GAP_FALLBACK, ORDER, budget) == pytest.approx(expected)

    @pytest.mark.parametrize("strategy", list(S))
    def test_single_item(self, strategy):
        pt = prep_and_travel(strategy, OrderRealization(np.array([0.3])), budget=1.0)
        assert pt == pytest.approx((0.3, 0.0))

    def test_single_item_gap_fallback_without_budget(self):
        pt = prep_and_travel(S.BI_GAP_FALLBACK, OrderRealization(np.array([0.3])), budget=0.2)
        assert pt == pytest.approx((0.0, 0.3))

    def test_single_item_mirror(self):
        order = OrderRealization(np.array([0.7]))
        assert prep_and_travel(S.UNI_NEAREST, order).prep == pytest.approx(0.7)
        assert prep_and_travel(S.BI_NEAREST_SAME_DIR, order).prep == pytest.approx(0.3)

    def test_gap_tie_goes_to_lowest_index(self):
        order = OrderRealization(np.array([0.0, 0.25, 0.5, 0.75]))
        # four equal gaps: gap 0 runs from 0 to 0.25, so the item after it is 0.25
        assert prep_and_travel(S.UNI_AFTER_GAP, order) == pytest.approx((0.25, 0.75))

    def test_empty_order(self):
        with pytest.raises(DomainError):
            prep_and_travel(S.UNI_NEAREST, OrderRealization(np.array([])))

    @settings(max_examples=200, deadline=None)
    @given(positions, st.floats(0.0, 1.5))
    def test_dominance(self, u, budget):
        order = OrderRealization(u)
        pt = {s: prep_and_travel(s, order, budget) for s in S}
        span = u[-1] - u[0]
        best = pt[S.BI_AVOID_GAP].travel
        assert pt[S.UNI_AFTER_GAP].travel == pytest.approx(best, abs=1e-12)
        for s in S:
            assert pt[s].prep >= 0 and pt[s].travel >= 0
            assert best <= pt[s].travel + 1e-12
        assert pt[S.BI_NEAREST_SHORTEST].travel <= span + 1e-12
        assert pt[S.BI_NEAREST_SAME_DIR].travel == pytest.approx(span)
        assert pt[S.UNI_NEAREST].travel == pytest.approx(span)
        assert pt[S.BI_NEAREST_SAME_DIR].prep <= pt[S.UNI_NEAREST].prep
        clockwise = u[0] <= 1 - u[-1]
        assert (pt[S.BI_NEAREST_SAME_DIR].prep == pt[S.UNI_NEAREST].prep) == clockwise
        if u.size == 1:
            # the gap-fallback sweep from the origin is done with the picker
            # present, so it counts as travel even for a single item
            assert all(p.travel == 0.0 for s, p in pt.items() if s is not S.BI_GAP_FALLBACK)

    @settings(max_examples=150, deadline=None)
    @given(positions, st.floats(0.0, 1.5))
    def test_batch_matches_scalar(self, u, budget):
        P = u[None, :]
        for s in S:
            ref = prep_and_travel(s, OrderRealization(u), budget)
            if s is S.BI_GAP_FALLBACK:
                d, a, fb = sim._batch_prep_travel(s, P)
                ok = np.nonzero(d[0] <= budget)[0]
                got = (d[0, ok[0]], a[0, ok[0]]) if ok.size else (0.0, fb[0])
            else:
                B, A = sim._batch_prep_travel(s, P)
                got = (B[0], A[0])
            assert got == pytest.approx(tuple(ref), abs=1e-12)


# -- sojourn recursion ------------------------------------------------------------

def test_chain_matches_python_recursion():
    rng = np.random.default_rng(3)
    B, A = rng.random(500), rng.random(500) * 0.5
    out = np.empty(500)
    last = sim._sojourn_chain(B, A, np.full(500, -1), np.zeros((0, 1)), np.zeros((0, 1)),
                              np.zeros(0), 0.0, out)
    s, ref = 0.0, []
    for b, a in zip(B, A):
        s = max(b - s, 0.0) + a
        ref.append(s)
    np.testing.assert_allclose(out, ref, rtol=0, atol=0)
    assert last == ref[-1]
    assert out[0] == B[0] + A[0]
    assert np.all(out >= A) and np.all(out <= A + B)


@pytest.mark.parametrize("strategy_a,strategy_b,orders_a,orders_b", [
    (S.BI_GAP_FALLBACK, S.BI_GAP_FALLBACK, "3", "3"),
    (S.BI_SECOND_ITEM, S.UNI_AFTER_GAP, "2:0.5,5:0.5", "4"),
    (S.UNI_NEAREST, S.BI_AVOID_GAP, "1", "6"),
])
def test_agrees_with_reference_simulation(strategy_a, strategy_b, orders_a, orders_b):
    cfg = SimConfig(strategy_a, OrderSizeModel.parse(orders_a), strategy_b,
                    OrderSizeModel.parse(orders_b), total_orders=20_000, warmup_orders=200,
                    replications=4, base_seed=5)
    fast = run_simulation(cfg)
    ref_means = np.array([reference_run(cfg, r)[200:].mean() for r in range(4)])
    se = math.hypot(fast.rep_mean_sojourn.std(ddof=1), ref_means.std(ddof=1)) / 2
    assert abs(fast.mean_sojourn - ref_means.mean()) <= 5 * se + 1e-4


def test_carousels_alternate_across_chunks(monkeypatch):
    # carousel A gets single items (no travel), carousel B ten items (always travel)
    monkeypatch.setattr(sim, "_CHUNK_FLOATS", 40)
    cfg = SimConfig(S.UNI_NEAREST, OrderSizeModel.fixed(1), S.UNI_NEAREST,
                    OrderSizeModel.fixed(10), total_orders=1001, warmup_orders=0,
                    replications=1)
    out = simulate_replication(cfg, 0)
    assert np.all(out[1::2] > 0)
    assert np.mean(out[0::2] == 0) > 0.5


# -- run_simulation ------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_summary():
    cfg = SimConfig.symmetric(S.BI_NEAREST_SHORTEST, 3, total_orders=20_000,
                              warmup_orders=500, replications=5, base_seed=11)
    return cfg, run_simulation(cfg, keep_samples=True)


def test_summary_consistency(small_summary):
    cfg, summ = small_summary
    np.testing.assert_allclose(summ.rep_throughput * summ.rep_mean_sojourn, 1.0, rtol=1e-15)
    assert summ.counted_orders == 19_500
    assert summ.samples.size == 5 * 19_500
    assert summ.max_sojourn == summ.samples[-1]
    lo, hi = summ.throughput_ci
    assert lo < summ.throughput < hi
    assert summ.empirical_cdf.x_max == 1.0 and summ.empirical_cdf.values[-1] == 1.0
    json.dumps(summ.to_dict())


def test_half_width_is_student_t(small_summary):
    _, summ = small_summary
    v = summ.rep_throughput
    expected = stats.t.ppf(0.975, 4) * v.std(ddof=1) / math.sqrt(5)
    assert summ.throughput_hw == pytest.approx(expected, rel=1e-12)


def test_reproducible_and_order_free(small_summary):
    cfg, summ = small_summary
    again = run_simulation(cfg, keep_samples=True)
    np.testing.assert_array_equal(summ.samples, again.samples)
    assert summ.to_dict() == again.to_dict()
    # replication r does not depend on how many others run or in which order
    for r in (4, 2):
        np.testing.assert_array_equal(simulate_replication(cfg, r)[500:].mean(),
                                      summ.rep_mean_sojourn[r])


def test_single_counted_order_has_no_half_width():
    cfg = SimConfig.symmetric(S.UNI_NEAREST, 2, total_orders=11, warmup_orders=10,
                              replications=3)
    summ = run_simulation(cfg)
    assert summ.mean_sojourn_hw is None and summ.throughput_hw is None
    assert math.isnan(summ.throughput_ci[0])
    assert run_simulation(SimConfig.symmetric(S.UNI_NEAREST, 2, replications=1,
                                              total_orders=2000)).throughput_hw is None


def test_ecdf_extends_past_one_for_long_gap_tours():
    cfg = SimConfig.symmetric(S.BI_AVOID_GAP, 10, total_orders=5_000, warmup_orders=0,
                              replications=1)
    summ = run_simulation(cfg)
    if summ.max_sojourn > 1:
        assert summ.empirical_cdf.x_max == 2.0
    assert summ.empirical_cdf.values[-1] == 1.0


@pytest.mark.parametrize("kw", [dict(total_orders=10, warmup_orders=10), dict(replications=0),
                                dict(base_seed=-1), dict(base_seed=2**64)])
def test_config_validation(kw):
    with pytest.raises(DomainError):
        SimConfig.symmetric(S.UNI_NEAREST, 2, **kw)


def test_symmetric_fills_carousel_b():
    cfg = SimConfig.symmetric(S.BI_AVOID_GAP, 4)
    assert cfg.strategy_b is S.BI_AVOID_GAP and cfg.orders_b == OrderSizeModel.fixed(4)


def test_two_item_avoid_gap_sojourn_bounded():
    cfg = SimConfig.symmetric(S.BI_AVOID_GAP, 2, total_orders=100_000, replications=2)
    summ = run_simulation(cfg)
    assert summ.max_sojourn <= 0.75
    assert summ.max_sojourn > 0.7


def test_halving_in_distribution():
    # single items: the bidirectional prep time is distributed as half the
    # unidirectional one, so mean sojourns halve up to simulation noise
    kw = dict(total_orders=100_000, replications=8, base_seed=3)
    uni = run_simulation(SimConfig.symmetric(S.UNI_NEAREST, 1, **kw))
    bi = run_simulation(SimConfig.symmetric(S.BI_NEAREST_SAME_DIR, 1, **kw))
    hw = bi.mean_sojourn_hw + uni.mean_sojourn_hw / 2
    assert abs(bi.mean_sojourn - uni.mean_sojourn / 2) <= hw


# -- KS distance --------------------------------------------------------------------

def test_ks_against_continuous_law():
    s = np.array([0.1, 0.4, 0.7])
    # uniform CDF: F_n - F peaks just after 0.7 (1 - 0.7) and F - F_n just
    # before 0.1 (0.1 - 0)
    assert ks_distance(s, lambda x: x) == pytest.approx(0.3)


def test_ks_handles_ties_and_atom_at_zero():
    samples = np.array([0.0, 0.0, 0.5, 1.0])
    # atom of 1/2 at zero, then uniform: matches F_n at every sample and
    # misses by 1/4 just below 0.5 and 1
    cdf = lambda x: 0.5 + 0.5 * np.asarray(x)
    assert ks_distance(samples, cdf) == pytest.approx(0.25)
    assert ks_distance(samples, GridFunction(1.0, [0.5, 0.75, 1.0])) == pytest.approx(0.25)


def test_ks_rejects_empty():
    with pytest.raises(DomainError):
        ks_distance(np.array([]), lambda x: x)


# -- comparison harness -------------------------------------------------------------

class TestScenario:
    def test_sizes(self):
        a, b = Scenario("unbalanced").order_sizes(5)
        assert (a, b) == (OrderSizeModel.fixed(1), OrderSizeModel.fixed(5))
        assert Scenario("unbalanced").average_size(5) == 3
        a, _ = Scenario("two-point").order_sizes(10)
        assert a.sizes == (1, 19) and a.mean == 10
        a, _ = Scenario("uniform").order_sizes(10)
        assert a.sizes == tuple(range(1, 20)) and a.mean == pytest.approx(10)
        a, _ = Scenario("one-or-n", p=0.25).order_sizes(4)
        assert a.sizes == (1, 4) and a.probs == (0.25, 0.75)
        assert Scenario("two-point").order_sizes(1)[0] == OrderSizeModel.fixed(1)

    def test_invalid(self):
        with pytest.raises(DomainError):
            Scenario("lopsided")
        with pytest.raises(DomainError):
            Scenario("two-point", p=1.0)


def test_compare_uses_common_random_numbers():
    base = SimConfig.symmetric(S.UNI_NEAREST, 1, total_orders=5_000, warmup_orders=100,
                               replications=3, base_seed=9)
    rows = compare_strategies([S.BI_NEAREST_SHORTEST, S.BI_AVOID_GAP], [1, 2, 3],
                              Scenario("balanced"), base)
    assert [(r.strategy, r.n) for r in rows] == [
        (s, n) for s in (S.BI_NEAREST_SHORTEST, S.BI_AVOID_GAP) for n in (1, 2, 3)]
    by = {(r.strategy, r.n): r for r in rows}
    # the two strategies coincide for one and two items, so common seeds give equal rows
    for n in (1, 2):
        assert by[S.BI_NEAREST_SHORTEST, n].throughput == pytest.approx(
            by[S.BI_AVOID_GAP, n].throughput, rel=1e-12)
    for r in rows:
        assert r.ci_low < r.throughput < r.ci_high
        assert r.mean_sojourn > 0


def test_compare_needs_input():
    base = SimConfig.symmetric(S.UNI_NEAREST, 1)
    with pytest.raises(DomainError):
        compare_strategies([], [1], Scenario("balanced"), base)
