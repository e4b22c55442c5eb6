"""Watch successive substitution close in on the stationary sojourn law.

Run with ``python demos/convergence_of_iterates.py``.
"""

import numpy as np

from carousel import GridFunction, SolverConfig, StrategyId, contraction_bound, solve_sojourn
from carousel.numerics import sup_distance

strategy = StrategyId.UNI_NEAREST
n = 5

# Start from F_0 = 0. The first iterate is the travel-time CDF, an upper
# envelope for the answer, and from there the iterates zig-zag inwards.
res = solve_sojourn(strategy, n, SolverConfig(grid_points=2049, tol=1e-10))
print(f"{strategy.value}, {n} items per order")
print(f"converged in {res.iterations} iterations, residual {res.residual:.1e}")
print(f"mean sojourn {res.mean_sojourn:.6f}, throughput {res.throughput:.6f}\n")

# Sample a few points of the first iterates to see the alternation.
probe = np.array([0.3, 0.5, 0.7, 0.9])
print("k    " + "  ".join(f"F_k({x:.1f})" for x in probe) + "   side of limit")
limit = res.cdf(probe)
for k, F in enumerate(res.iterates[:7]):
    vals = F(probe)
    side = "above" if np.all(vals >= limit - 1e-12) else "below"
    print(f"{k:<4} " + "  ".join(f"{v:9.6f}" for v in vals) + f"   {side}")
print("lim  " + "  ".join(f"{v:9.6f}" for v in limit) + "\n")

# The step sizes shrink at least as fast as the contraction constant
# promises; in practice a good deal faster.
c = contraction_bound(strategy, n)
ratios = np.array(res.steps[1:8]) / np.array(res.steps[:7])
print(f"guaranteed contraction {c:.4f}; observed step ratios:")
print("  " + "  ".join(f"{r:.4f}" for r in ratios))

# The a-posteriori bound c/(1-c) * last step is an honest error estimate.
print(f"\na-posteriori bound {res.aposteriori_error:.1e}")

# Different starting points lead to the same fixed point.
upper = solve_sojourn(strategy, n, SolverConfig(initial="upper", tol=1e-10))
ramp = solve_sojourn(strategy, n, SolverConfig(
    initial=GridFunction.from_function(lambda x: x), tol=1e-10))
print(f"distance between solutions from three starts: "
      f"{sup_distance(res.cdf, upper.cdf):.1e}, {sup_distance(res.cdf, ramp.cdf):.1e}")
