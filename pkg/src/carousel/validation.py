"""Cross-checks between the solver, the simulator and the closed forms.

Each check returns a :class:`Check` with the measured value, the tolerance
it is held to and the verdict. :func:`run_checks` is what ``carousel
validate`` executes; the acceptance tests reuse the density checks.
"""

from __future__ import annotations

import logging
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate

from . import densities as dn
from .densities import OrderSizeModel, StrategyId
from .numerics import GridFunction, grid, sup_distance
from .simulator import SimConfig, ks_distance, run_simulation
from .solver import (
    SolverConfig,
    apply_operator_single_item_bi,
    closed_form_single_item_bi,
    conditional_cdf_uni,
    solve_sojourn,
    solve_variable_uni,
)

log = logging.getLogger(__name__)

SOLVER_STRATEGIES = (
    StrategyId.UNI_NEAREST,
    StrategyId.BI_NEAREST_SAME_DIR,
    StrategyId.BI_NEAREST_SHORTEST,
)


class Check(NamedTuple):
    name: str
    value: float
    tolerance: float
    passed: bool

    @classmethod
    def at_most(cls, name: str, value: float, tolerance: float) -> Check:
        return cls(name, float(value), float(tolerance), bool(value <= tolerance))


# -- densities -------------------------------------------------------------

def density_normalization_error(n: int) -> float:
    """Largest ``|integral - 1|`` over the travel and preparation densities for size `n`."""
    quad = lambda f, a, b, pts=None: integrate.quad(f, a, b, points=pts, epsabs=1e-13,
                                                     epsrel=1e-13, limit=200)[0]
    errs = [
        quad(lambda y: dn.travel_density_single_dir(y, n), 0.0, 1.0),
        quad(lambda y: dn.travel_density_shortest(y, n), 0.0, 1.0, [0.5]),
        quad(lambda x: dn.prep_density_shortest(x, n), 0.0, 0.5),
    ]
    return max(abs(e - 1.0) for e in errs)


def _near_kink(x, y, eps):
    kinks = (x - 0.25, y - 0.5, y - 2 * x, y - (1 - 2 * x), x, y)
    return any(abs(k) < eps for k in kinks)


def bayes_consistency_error(n: int, rng: np.random.Generator, samples: int = 200,
                            step: float = 1e-6) -> float:
    """Largest mismatch between the two factorisations of the joint density of (B, A).

    Draws points in the joint support of the shortest-direction strategy and
    compares ``f_{B|A}(x|y) f_A(y)`` with ``f_{A|B}(y|x) f_B(x)``, both
    conditional densities taken by central differences of the conditional
    CDFs. Points within ``1e-3`` of a piece boundary are redrawn.
    """
    worst = 0.0
    done = 0
    while done < samples:
        x = rng.uniform(0.0, 0.5)
        y = rng.uniform(0.0, 1.0 - 2 * x)
        if _near_kink(x, y, 1e-3):
            continue
        fb_given_a = (dn.prep_cdf_given_travel_shortest(x + step, y, n)
                      - dn.prep_cdf_given_travel_shortest(x - step, y, n)) / (2 * step)
        fa_given_b = (dn.travel_cdf_given_prep_shortest(y + step, x, n)
                      - dn.travel_cdf_given_prep_shortest(y - step, x, n)) / (2 * step)
        lhs = fb_given_a * dn.travel_density_shortest(y, n)
        rhs = fa_given_b * dn.prep_density_shortest(x, n)
        worst = max(worst, abs(lhs - rhs))
        done += 1
    return worst


def density_checks(seed: int, sizes=(3, 5), tol: float = 1e-4) -> list[Check]:
    rng = np.random.default_rng(seed)
    out = []
    for n in sizes:
        out.append(Check.at_most(f"density normalisation n={n}",
                                 density_normalization_error(n), tol))
        out.append(Check.at_most(f"Bayes consistency n={n}",
                                 bayes_consistency_error(n, rng), tol))
    return out


# -- solver ----------------------------------------------------------------

def solver_checks(cfg: SolverConfig, sizes=(2, 3, 5), tol: float = 1e-6) -> list[Check]:
    out = []
    for strategy in SOLVER_STRATEGIES:
        for n in sizes:
            res = solve_sojourn(strategy, n, cfg)
            out.append(Check.at_most(f"fixed-point residual {strategy.value} n={n}",
                                     res.residual, tol))
    cdf = GridFunction(1.0, closed_form_single_item_bi(grid(cfg.grid_points)))
    res = sup_distance(apply_operator_single_item_bi(cdf), cdf)
    out.append(Check.at_most("closed form single item, operator residual", res, 1e-5))
    return out


def variable_size_checks(cfg: SolverConfig, pmf: OrderSizeModel | None = None) -> list[Check]:
    """Boundary identities linking the per-size CDFs with the mean sojourn time."""
    pmf = pmf or OrderSizeModel.discrete({1: 0.5, 3: 0.5})
    sol = solve_variable_uni(pmf, cfg)
    mean = sol.result.mean_sojourn
    p1 = dict(zip(pmf.sizes, pmf.probs)).get(1, 0.0)
    # the size-two law is recovered from the mixture even when p_2 = 0
    f1 = sol.components[1].values if 1 in sol.components else conditional_cdf_uni(1, sol.mixture).values
    f2 = conditional_cdf_uni(2, sol.mixture).values
    h = sol.mixture.h
    d0 = lambda v: (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
    d1 = lambda v: (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
    return [
        Check.at_most("variable sizes: F1(0) = E[S]", abs(f1[0] - mean), 1e-3),
        Check.at_most("variable sizes: F1'(0) = 1", abs(d0(f1) - 1.0), 5e-3),
        Check.at_most("variable sizes: F2'(0) = 2 E[S]", abs(d0(f2) - 2 * mean), 5e-3),
        Check.at_most("variable sizes: F1'(1) = p1 E[S]", abs(d1(f1) - p1 * mean), 5e-3),
    ]


# -- simulator against solver ---------------------------------------------

def agreement_checks(cfg: SolverConfig, seed: int, orders: int = 50_000,
                     reps: int = 4, warmup: int = 1_000, sizes=(2, 3, 5)) -> list[Check]:
    """KS distance and throughput gap between simulated and solved laws."""
    out = []
    for strategy in SOLVER_STRATEGIES:
        for n in sizes:
            res = solve_sojourn(strategy, n, cfg)
            sim = run_simulation(SimConfig.symmetric(strategy, n, total_orders=orders,
                                                     warmup_orders=warmup, replications=reps,
                                                     base_seed=seed,
                                                     grid_points=cfg.grid_points),
                                 keep_samples=True)
            out.append(Check.at_most(f"KS solver vs simulation {strategy.value} n={n}",
                                     ks_distance(sim.samples, res.cdf), 0.01))
            hw = sim.throughput_hw if sim.throughput_hw is not None else 0.0
            out.append(Check.at_most(f"throughput gap {strategy.value} n={n}",
                                     abs(res.throughput - sim.throughput), hw))
    sim = run_simulation(SimConfig.symmetric(StrategyId.BI_NEAREST_SHORTEST, 1,
                                             total_orders=orders, warmup_orders=warmup,
                                             replications=reps, base_seed=seed),
                         keep_samples=True)
    out.append(Check.at_most("KS closed form single item vs simulation",
                             ks_distance(sim.samples, closed_form_single_item_bi), 0.01))
    return out


def run_checks(seed: int = 7, cfg: SolverConfig | None = None,
               orders: int = 50_000, reps: int = 4, warmup: int = 1_000,
               progress: Callable[[Check], None] | None = None) -> list[Check]:
    """Run the full cross-check suite; `progress` sees each check as it completes."""
    cfg = cfg or SolverConfig()
    groups = (
        lambda: density_checks(seed),
        lambda: solver_checks(cfg),
        lambda: variable_size_checks(cfg),
        lambda: agreement_checks(cfg, seed, orders, reps, warmup),
    )
    checks = []
    for group in groups:
        for c in group():
            log.info("%s: %.3g (tol %.3g) %s", c.name, c.value, c.tolerance,
                     "ok" if c.passed else "FAILED")
            if progress is not None:
                progress(c)
            checks.append(c)
    return checks
