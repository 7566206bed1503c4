"""Benchmark harness: times the reduction and search phases separately."""

from __future__ import annotations

import statistics
import time

import numpy as np

from . import geometry as geo
from .geometry import FamilyEvaluator
from .ladder import SearchRegion, minimize
from .levels import ReducedEvaluator, build_gradation, plan_levels
from .testkit import InstanceSpec, gen_instance


def _instance(n, seed, kind):
    if kind != "circle":
        raise ValueError("only the circle family is benchmarked")
    spec = InstanceSpec(kind=kind, n=n, noise=0.05, outlier_frac=0.1, seed=seed)
    data, _ = gen_instance(spec)
    return data


def time_reduction(n: int, eps: float, seed: int, kind: str = "circle") -> float:
    """Wall time (ms) of one family + gradation + plan construction."""
    data = _instance(n, seed, kind)
    t0 = time.perf_counter()
    family = geo.circle_cone_family(data)
    gradation = build_gradation(family.size, seed)
    plan_levels(family.size, eps, gradation)
    return (time.perf_counter() - t0) * 1e3


def bench_run(sizes, eps: float = 0.25, seed: int = 0, repeats: int = 3,
              kind: str = "circle", budget: int = 900,
              include_search: bool = True, search_grid: int = 6):
    """Median per-phase wall times across repeats, plus the search cost.

    The reduction phase covers family, gradation, and plan construction;
    the search phase covers the ladder-guided minimization on the
    already-reduced instance.  Returns row dicts with keys n, eps, phase,
    median_ms, cost.
    """
    rows = []
    search_eps = min(eps, 0.2499)
    for n in sizes:
        red_times = [time_reduction(n, eps, seed, kind) for _ in range(repeats)]
        cost = ""
        search_times = []
        if include_search:
            data = _instance(n, seed, kind)
            family = geo.circle_cone_family(data)
            gradation = build_gradation(family.size, seed)
            plan = plan_levels(family.size, eps, gradation)
            evaluator = ReducedEvaluator(family, gradation, plan)
            exact = FamilyEvaluator(family)
            pts = data.points
            lo, hi = pts.min(axis=0), pts.max(axis=0)
            diam = float(np.linalg.norm(hi - lo)) or 1.0
            region = SearchRegion(lo - diam, hi + diam, 0.0, 2 * diam)
            for _ in range(repeats):
                t0 = time.perf_counter()
                res = minimize(evaluator, search_eps, region, budget=budget,
                               seed=seed, grid=search_grid, top_k=4,
                               exact=exact)
                search_times.append((time.perf_counter() - t0) * 1e3)
                cost = res.cost
        rows.append({"n": n, "eps": eps, "phase": "reduction",
                     "median_ms": statistics.median(red_times), "cost": cost})
        if include_search:
            rows.append({"n": n, "eps": eps, "phase": "search",
                         "median_ms": statistics.median(search_times),
                         "cost": cost})
    return rows
