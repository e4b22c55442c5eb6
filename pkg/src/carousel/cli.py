"""Command-line driver: ``carousel <command> [options]``.

Commands write CSV (default) or JSON to ``--out`` or standard output. With
CSV output and ``--out`` set, the run summary goes to the same path with a
``.json`` suffix. Failures print one JSON record on standard error and exit
with 1 (usage), 2 (numerical failure) or 3 (validation failure).

A plain ``key = value`` file passed with ``--config`` supplies defaults for
any long option (``grid = 1025``, ``strategies = bi-avoid-gap,bi-shortest``);
flags given on the command line take precedence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .densities import OrderSizeModel, StrategyId
from .numerics import DEFAULT_GRID_POINTS, DomainError, GridFunction
from .simulator import Scenario, SimConfig, compare_strategies, run_simulation
from .solver import (
    ConvergenceError,
    SolverConfig,
    apply_operator,
    apply_operator_single_item_bi,
    solve_sojourn,
    solve_variable_uni,
)
from .validation import run_checks

log = logging.getLogger("carousel")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 1, 2, 3


class UsageError(Exception):
    pass


class ValidationFailed(Exception):
    def __init__(self, failed: list[str]):
        super().__init__(f"{len(failed)} check(s) failed: " + "; ".join(failed))
        self.failed = failed


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- argument types ---------------------------------------------------------

def _count(text: str) -> int:
    """Positive integer, also written as ``1e6``."""
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value.is_integer() or value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text!r}")
    return int(value)


def _sizes(text: str) -> list[int]:
    """``5``, ``1..10`` or ``2,3,5``."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError(f"order sizes must be positive integers: {text!r}")
    return out


def _strategy(text: str) -> StrategyId:
    try:
        return StrategyId.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _strategies(text: str) -> list[StrategyId]:
    if text.strip().lower() == "all":
        return list(StrategyId)
    return [_strategy(t) for t in text.split(",") if t.strip()]


def _pmf(text: str) -> OrderSizeModel:
    try:
        return OrderSizeModel.parse(text)
    except (ValueError, DomainError) as exc:
        raise argparse.ArgumentTypeError(f"bad order-size law {text!r}: {exc}") from None


# -- parser ----------------------------------------------------------------

def _common(p: argparse.ArgumentParser, solver=True, sim=False):
    g = p.add_argument_group("output")
    g.add_argument("--out", type=Path, help="output file (default: standard output)")
    g.add_argument("--format", choices=("csv", "json"), default="csv")
    g.add_argument("--config", type=Path, help="key = value file with option defaults")
    if solver:
        s = p.add_argument_group("solver")
        s.add_argument("--grid", type=_count, default=DEFAULT_GRID_POINTS, help="grid points")
        s.add_argument("--tol", type=float, default=1e-8, help="stopping threshold")
        s.add_argument("--max-iter", type=_count, default=200)
    if sim:
        s = p.add_argument_group("simulation")
        s.add_argument("--seed", type=_count, default=0, help="base seed")
        s.add_argument("--orders", type=_count, default=100_000,
                       help="orders per replication, warm-up included")
        s.add_argument("--warmup", type=_count, default=1_000)
        s.add_argument("--reps", type=_count, default=20, help="replications")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="carousel", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="log progress to standard error (-vv for debug)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="stationary sojourn CDF of one strategy")
    p.add_argument("--strategy", type=_strategy, required=True)
    p.add_argument("--n", type=_count, required=True, help="fixed order size")
    p.add_argument("--initial", choices=("zero", "upper"), default="zero")
    _common(p)

    p = sub.add_parser("solve-variable", help="random order sizes, unidirectional carousel")
    p.add_argument("--pmf", type=_pmf, required=True, help='e.g. "1:0.5,3:0.5"')
    _common(p)

    p = sub.add_parser("convergence", help="iterates of the successive substitution")
    p.add_argument("--strategy", type=_strategy, required=True)
    p.add_argument("--n", type=_count, required=True)
    p.add_argument("--iterations", type=_count, default=8)
    p.add_argument("--stride", type=_count, default=1, help="keep every k-th grid node")
    _common(p)

    p = sub.add_parser("simulate", help="simulate the two-carousel system")
    p.add_argument("--strategy", type=_strategy, required=True)
    p.add_argument("--strategy-b", type=_strategy, help="strategy of carousel B (default: same)")
    for side in ("", "-b"):
        g = p.add_mutually_exclusive_group(required=(side == ""))
        g.add_argument(f"--n{side}", type=_count, help="fixed order size")
        g.add_argument(f"--pmf{side}", type=_pmf, help="discrete order-size law")
    _common(p, solver=False, sim=True)
    p.add_argument("--grid", type=_count, default=DEFAULT_GRID_POINTS,
                   help="nodes of the empirical CDF on [0, 1]")

    p = sub.add_parser("compare", help="throughput table across strategies and sizes")
    p.add_argument("--scenario", choices=Scenario.KINDS, default="balanced")
    p.add_argument("-p", type=float, default=0.5, help="weight of single-item orders")
    p.add_argument("--strategies", type=_strategies, default=list(StrategyId))
    p.add_argument("--n", type=_sizes, default=list(range(1, 11)), help="5, 1..10 or 2,3,5")
    _common(p, solver=False, sim=True)

    p = sub.add_parser("validate", help="cross-check solver, simulator and closed forms")
    _common(p, sim=True)
    p.set_defaults(seed=7, orders=50_000, reps=4)
    return parser


def _read_config(path: Path) -> dict[str, str]:
    out = {}
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (t.strip() for t in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _config_path(argv: Sequence[str]) -> Path | None:
    for i, tok in enumerate(argv):
        if tok == "--config":
            return Path(argv[i + 1]) if i + 1 < len(argv) else None
        if tok.startswith("--config="):
            return Path(tok.split("=", 1)[1])
    return None


def parse_args(argv: Sequence[str] | None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    path = _config_path(argv)
    command = next((t for t in argv if t in COMMANDS), None)
    if path is not None and command is not None:
        # config values become defaults, so explicit flags still win
        sub = parser._subparsers._group_actions[0].choices[command]
        known = {a.dest: a for a in sub._actions if a.option_strings}
        defaults = {}
        for key, text in _read_config(path).items():
            action = known.get(key)
            if action is None:
                raise UsageError(f"unknown config key {key!r} for {command}")
            try:
                defaults[key] = action.type(text) if action.type else text
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from None
            action.required = False
        for group in sub._mutually_exclusive_groups:
            if any(a.dest in defaults for a in group._group_actions):
                group.required = False
        sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# -- output -------------------------------------------------------------------

def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else f"{float(v):.12g}"
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
        return float(f"{v:.12g}")
    if isinstance(v, StrategyId):
        return v.value
    return v


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(x) for x in row])
    return buf.getvalue()


def _emit(args, header, rows, summary: dict | None, extra: dict | None = None):
    """Write the table and summary in the requested format."""
    if args.format == "json":
        doc = dict(summary or {})
        doc["columns"] = list(header)
        doc["rows"] = [list(r) for r in rows]
        if extra:
            doc.update(extra)
        text = json.dumps(_jsonable(doc), indent=2) + "\n"
        _write(args.out, text)
        return
    _write(args.out, _csv_text(header, rows))
    if summary is not None and args.out is not None:
        _write(args.out.with_suffix(".json"), json.dumps(_jsonable(summary), indent=2) + "\n")


def _write(path: Path | None, text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _solver_config(args, **kw) -> SolverConfig:
    return SolverConfig(grid_points=args.grid, tol=args.tol, max_iter=args.max_iter, **kw)


# -- commands -----------------------------------------------------------------

def cmd_solve(args):
    res = solve_sojourn(args.strategy, args.n, _solver_config(args, initial=args.initial))
    summary = {
        "n": args.n,
        "strategy": args.strategy.value,
        "iterations": res.iterations,
        "residual": res.residual,
        "contraction_bound": res.contraction_bound,
        "aposteriori_error": res.aposteriori_error,
        "mean_sojourn": res.mean_sojourn,
        "throughput": res.throughput,
    }
    _emit(args, ("x", "F"), zip(res.cdf.x, res.cdf.values), summary)


def cmd_solve_variable(args):
    sol = solve_variable_uni(args.pmf, _solver_config(args))
    res = sol.result
    sizes = sorted(sol.components)
    header = ["x", "F"] + [f"F{m}" for m in sizes]
    cols = [sol.mixture.x, sol.mixture.values] + [sol.components[m].values for m in sizes]
    summary = {
        "pmf": str(args.pmf),
        "strategy": StrategyId.UNI_NEAREST.value,
        "iterations": res.iterations,
        "residual": res.residual,
        "contraction_bound": res.contraction_bound,
        "aposteriori_error": res.aposteriori_error,
        "mean_sojourn": res.mean_sojourn,
        "throughput": res.throughput,
    }
    _emit(args, header, zip(*cols), summary)


def cmd_convergence(args):
    n, strategy = args.n, args.strategy
    if n == 1 and strategy.bidirectional and strategy.solver_supported:
        step = apply_operator_single_item_bi
    elif strategy.solver_supported and n >= 2:
        step = lambda F: apply_operator(strategy, F, n)
    else:
        raise DomainError(f"no integral operator for {strategy.value} with n={n}")
    if args.stride < 1:
        raise UsageError("--stride must be at least 1")
    F = GridFunction.constant(0.0, args.grid)
    idx = np.arange(0, args.grid, args.stride)
    if idx[-1] != args.grid - 1:
        idx = np.append(idx, args.grid - 1)
    x = F.x[idx]
    rows = [(0, None, xi, fi) for xi, fi in zip(x, F.values[idx])]
    steps = []
    for k in range(1, args.iterations + 1):
        G = step(F)
        steps.append(float(np.max(np.abs(G.values - F.values))))
        F = G
        rows.extend((k, steps[-1], xi, fi) for xi, fi in zip(x, F.values[idx]))
    summary = {"n": n, "strategy": strategy.value, "iterations": args.iterations,
               "sup_steps": steps}
    _emit(args, ("iteration", "sup_step", "x", "F_k"), rows, summary)


def _sim_config(args, **kw) -> SimConfig:
    return SimConfig(total_orders=args.orders, warmup_orders=args.warmup,
                     replications=args.reps, base_seed=args.seed, **kw)


def cmd_simulate(args):
    orders_a = args.pmf or OrderSizeModel.fixed(args.n)
    orders_b = args.pmf_b or (OrderSizeModel.fixed(args.n_b) if args.n_b else None)
    cfg = _sim_config(args, strategy_a=args.strategy, orders_a=orders_a,
                      strategy_b=args.strategy_b, orders_b=orders_b, grid_points=args.grid)
    summ = run_simulation(cfg)
    summary = {
        "strategy_a": cfg.strategy_a.value,
        "strategy_b": cfg.strategy_b.value,
        "orders_a": str(cfg.orders_a),
        "orders_b": str(cfg.orders_b),
        "seed": cfg.base_seed,
        **summ.to_dict(),
    }
    ecdf = summ.empirical_cdf
    _emit(args, ("x", "F"), zip(ecdf.x, ecdf.values), summary)


def cmd_compare(args):
    base = _sim_config(args, strategy_a=args.strategies[0], orders_a=OrderSizeModel.fixed(1))
    scenario = Scenario(args.scenario, args.p)

    rows = compare_strategies(args.strategies, args.n, scenario, base)
    table = [(r.strategy.value, r.n, r.throughput, r.ci_low, r.ci_high) for r in rows]
    extra = None
    if args.format == "json":
        extra = {"avg_size": [r.avg_size for r in rows],
                 "mean_sojourn": [r.mean_sojourn for r in rows]}
    summary = {"scenario": args.scenario, "p": args.p, "seed": args.seed,
               "orders": args.orders, "warmup": args.warmup, "reps": args.reps}
    _emit(args, ("strategy", "n", "throughput", "ci_low", "ci_high"), table, summary, extra)


def cmd_validate(args):
    checks = run_checks(args.seed, _solver_config(args), orders=args.orders,
                        reps=args.reps, warmup=args.warmup)
    rows = [(c.name, c.value, c.tolerance, c.passed) for c in checks]
    _emit(args, ("check", "value", "tolerance", "passed"), rows,
          {"seed": args.seed, "passed": all(c.passed for c in checks)})
    failed = [c.name for c in checks if not c.passed]
    if failed:
        raise ValidationFailed(failed)


COMMANDS = {
    "solve": cmd_solve,
    "solve-variable": cmd_solve_variable,
    "convergence": cmd_convergence,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "validate": cmd_validate,
}


def _fail(code: int, kind: str, message: str, **extra) -> int:
    record = {"error": kind, "message": message, "exit_code": code, **extra}
    sys.stderr.write(json.dumps(_jsonable(record)) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    logging.basicConfig(level={0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    except DomainError as exc:
        return _fail(EXIT_USAGE, "domain", str(exc))
    except ConvergenceError as exc:
        return _fail(EXIT_NUMERICAL, "convergence", str(exc), residual=exc.residual,
                     iterations=exc.iterations)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERICAL, "numerical", str(exc))
    except ValidationFailed as exc:
        return _fail(EXIT_VALIDATION, "validation", str(exc), failed=exc.failed)
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head); not an error
        sys.stdout = open(os.devnull, "w")
    except OSError as exc:
        return _fail(EXIT_USAGE, "io", str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
