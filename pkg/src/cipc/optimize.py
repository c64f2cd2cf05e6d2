"""Minimization of the outage probability over the agreed receive power."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from cipc import model
from cipc.errors import InfeasibleError
from cipc.model import ConvexInterval, SystemConfig

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0  # 0.618...
PROBE_POINTS = 256
FALLBACK_POINTS = 10_000

CERTIFIED = "certified_convex"
GRID_FALLBACK = "grid_fallback"


@dataclass(frozen=True)
class OptimizationResult:
    q_star: float
    outage_star: float
    interval: Optional[ConvexInterval]
    method: str
    evaluations: int
    bracket_width: float


@dataclass(frozen=True)
class GoldenSectionResult:
    x: float
    fx: float
    evaluations: int
    width: float
    iterations: int


class SweepError(RuntimeError):
    def __init__(self, index: int, cause: Exception):
        super().__init__(f"sweep element {index} failed: {cause}")
        self.index = index
        self.cause = cause


def golden_section(
    f: Callable[[float], float], a: float, b: float, tol: float, trace: Optional[list] = None
) -> GoldenSectionResult:
    """Golden-section minimization of a unimodal ``f`` on [a, b].

    Stops once the bracket is no wider than ``tol`` and returns the best
    interior point that was actually evaluated. Ties move the lower end up.
    If ``trace`` is given, each bracket ``(a, b)`` is appended to it.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not a < b:
        raise ValueError(f"empty bracket [{a}, {b}]")
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    evaluations = 2
    iterations = 0
    if trace is not None:
        trace.append((a, b))
    while b - a > tol:
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
        evaluations += 1
        iterations += 1
        if trace is not None:
            trace.append((a, b))
    if f1 < f2:
        return GoldenSectionResult(x1, f1, evaluations, b - a, iterations)
    return GoldenSectionResult(x2, f2, evaluations, b - a, iterations)


def _outage(cfg: SystemConfig) -> Callable[[float], float]:
    return lambda q: model.outage_probability(cfg, q).outage


def _grid_best(objective, grid):
    values = [objective(q) for q in grid]
    i = int(np.argmin(values))
    return i, float(grid[i]), values[i]


def _fallback(cfg: SystemConfig, interval: Optional[ConvexInterval]) -> OptimizationResult:
    q_rate = cfg.q_rate
    upper = max(10.0 * q_rate, 100.0 * cfg.p_max)
    if not (math.isfinite(q_rate) and math.isfinite(upper) and q_rate > 0 and upper > q_rate):
        raise InfeasibleError(f"no finite search range for the rate constraint (q_rate={q_rate})")
    grid = np.geomspace(q_rate, upper, FALLBACK_POINTS)
    i, q, value = _grid_best(_outage(cfg), grid)
    step = grid[min(i + 1, len(grid) - 1)] - grid[max(i - 1, 0)]
    return OptimizationResult(
        q_star=q,
        outage_star=value,
        interval=interval,
        method=GRID_FALLBACK,
        evaluations=len(grid),
        bracket_width=float(step),
    )


def optimize_q(cfg: SystemConfig, tol: float = 1e-10) -> OptimizationResult:
    """Receive power minimizing the outage probability under the rate constraint.

    With unit noise variance and a nonempty convexity interval, golden-section
    search runs on that interval; the region between the rate bound and the
    interval's lower edge is probed on a grid as a guard. Any other case falls
    back to a logarithmic grid search.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not math.isfinite(cfg.p_max):
        raise InfeasibleError("p_max must be finite to bound the search range")
    if cfg.noise_var != 1.0:
        return _fallback(cfg, None)
    interval = model.convex_interval(cfg)
    if not interval.nonempty:
        return _fallback(cfg, interval)

    objective = _outage(cfg)
    gs = golden_section(objective, interval.lo, interval.hi_admissible, tol)
    q_star, best, method = gs.x, gs.fx, CERTIFIED
    width = gs.width
    evaluations = gs.evaluations
    if interval.q_rate < interval.lo:
        grid = np.linspace(interval.q_rate, interval.lo, PROBE_POINTS)
        i, q, value = _grid_best(objective, grid)
        evaluations += PROBE_POINTS
        if value < best:
            q_star, best, method = q, value, GRID_FALLBACK
            width = float(grid[1] - grid[0])
            # local refinement between the neighbours of the best probe point
            a, b = float(grid[max(i - 1, 0)]), float(grid[min(i + 1, PROBE_POINTS - 1)])
            local = golden_section(objective, a, b, tol)
            evaluations += local.evaluations
            if local.fx < best:
                q_star, best, width = local.x, local.fx, local.width
    return OptimizationResult(
        q_star=q_star,
        outage_star=best,
        interval=interval,
        method=method,
        evaluations=evaluations,
        bracket_width=width,
    )


def sweep_optimal(
    cfgs: Sequence[SystemConfig], tol: float = 1e-10, workers: Optional[int] = None
) -> list[OptimizationResult]:
    """``optimize_q`` over each configuration, in input order."""
    cfgs = list(cfgs)
    if not cfgs:
        raise ValueError("sweep_optimal needs at least one configuration")

    def run(item):
        index, cfg = item
        try:
            return optimize_q(cfg, tol)
        except Exception as exc:
            raise SweepError(index, exc) from exc

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, enumerate(cfgs)))
    return [run(item) for item in enumerate(cfgs)]
