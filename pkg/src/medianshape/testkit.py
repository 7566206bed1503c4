"""Independent oracles and instance generators.

The brute-force oracle searches the same parameter chart as the fitters
(dense multistart grid plus derivative-free descent on the exact cost)
but shares none of the reduction/ladder machinery, so it can serve as
the reference side of every approximation check.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize as _nelder_mead

from . import geometry as geo
from .fitters import (FitResult, _cylinder_region, _point_region,
                      _two_lines_region)
from .geometry import (Circle, Cylinder, LinePair, MedianPoint, ParamPoint,
                       PointSet, Sphere)


@dataclass(frozen=True)
class InstanceSpec:
    kind: str                  # circle | sphere | cylinder | lines | two-lines | stack-1d
    n: int
    noise: float = 0.0
    outlier_frac: float = 0.0
    outlier_box_scale: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.noise < 0 or not 0 <= self.outlier_frac < 1:
            raise ValueError("invalid instance spec")


# ---------------------------------------------------------------------------
# 1D oracle
# ---------------------------------------------------------------------------

def oracle_1d(values, weights, query: float, objective: str = "l1") -> float:
    """Exact weighted cost at a query by direct compensated summation."""
    values = np.asarray(values, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    d = np.abs(values - query)
    if objective == "l2":
        d = d ** 2
    return math.fsum(weights * d)


def oracle_1d_minimize(values, weights, objective: str = "l1"):
    """Exact minimizer and minimum: weighted median (l1) / mean (l2)."""
    values = np.asarray(values, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    if objective == "l1":
        order = np.argsort(values, kind="stable")
        v, w = values[order], weights[order]
        cum = np.cumsum(w)
        half = cum[-1] / 2
        minimizer = float(v[int(np.searchsorted(cum, half))])
    elif objective == "l2":
        minimizer = float(math.fsum(weights * values) / math.fsum(weights))
    else:
        raise ValueError(f"unknown objective {objective!r}")
    return minimizer, oracle_1d(values, weights, minimizer, objective)


# ---------------------------------------------------------------------------
# Brute-force shape oracle
# ---------------------------------------------------------------------------

_ORACLE_RES = {2: 24, 3: 14, 4: 7, 5: 6}


def _exact_cost_grid(family, bases, heights, objective):
    vals = geo.surface_values_at(family, bases)
    w = family.weights.astype(float)
    a = np.abs(vals[:, None, :] - heights[None, :, None])
    if objective == "l2":
        a = a ** 2
    return a @ w


def _oracle_search(family, region, objective, resolution, restarts):
    bd = region.base_dim
    res_b = resolution if resolution is not None else _ORACLE_RES.get(bd + 1, 6)
    axes = [np.linspace(lo, hi, res_b) if hi > lo else np.array([lo])
            for lo, hi in zip(region.base_lo, region.base_hi)]
    mesh = np.meshgrid(*axes, indexing="ij") if axes else []
    bases = (np.stack([m.ravel() for m in mesh], axis=1)
             if axes else np.zeros((1, 0)))
    has_h = region.height_hi > region.height_lo
    heights = (np.linspace(region.height_lo, region.height_hi, res_b)
               if has_h else np.array([region.height_lo]))
    # chunk the grid to bound memory
    block = max(1, 2_000_000 // max(family.size * len(heights), 1))
    best_cells = []
    for i in range(0, len(bases), block):
        sub = bases[i:i + block]
        scores = _exact_cost_grid(family, sub, heights, objective)
        flat = np.argsort(scores, axis=None, kind="stable")[:restarts]
        for f in flat:
            bi, hi_ = divmod(int(f), scores.shape[1])
            best_cells.append((float(scores[bi, hi_]), i + bi, float(heights[hi_])))
    best_cells.sort(key=lambda t: (t[0], t[1], t[2]))
    best_cells = best_cells[:restarts]

    def f(x):
        base = np.clip(x[:bd], region.base_lo, region.base_hi)
        h = (float(np.clip(x[bd], region.height_lo, region.height_hi))
             if has_h else region.height_lo)
        return geo.cost(family, ParamPoint(base, h), objective)

    spans = np.concatenate([region.base_hi - region.base_lo,
                            [region.height_hi - region.height_lo]])
    best_x, best_val = None, np.inf
    # coarse chain finds the basin, fine chain polishes to full precision
    chains = ((1.0, dict(xatol=1e-6, fatol=1e-9, maxfev=700)),
              (1e-3, dict(xatol=1e-11, fatol=1e-14, maxfev=2500)))
    for _, bi, h in best_cells:
        x0 = np.concatenate([bases[bi], [h]])
        x = x0
        for scale, opts in chains:
            simplex = np.tile(x, (len(x) + 1, 1))
            for i in range(len(x)):
                simplex[i + 1, i] += max(spans[i] * 0.02 * scale, 1e-12)
            r = _nelder_mead(f, x, method="Nelder-Mead",
                             options=dict(initial_simplex=simplex, **opts))
            x = r.x
        val = f(x)
        if val < best_val:
            best_val, best_x = val, x
    base = np.clip(best_x[:bd], region.base_lo, region.base_hi)
    h = (float(np.clip(best_x[bd], region.height_lo, region.height_hi))
         if has_h else region.height_lo)
    return ParamPoint(base, h), best_val


def oracle_fit(data, kind: str, objective: str = "l1", resolution=None,
               restarts: int = 6, seed: int = 0, eps: float = 0.2,
               self_check: bool = False) -> FitResult:
    """Dense multistart brute-force reference fit on the exact cost.

    With self_check=True the search is repeated at doubled resolution and
    restarts; a >0.5% change sets the unstable flag on the result.
    """
    t0 = time.perf_counter()
    p, val, shape, family = _oracle_once(data, kind, objective, resolution,
                                         restarts)
    flags = {"budget_exhausted": False, "zero_cost_shortcut": False}
    if self_check:
        res2 = (resolution * 2 if resolution is not None
                else _ORACLE_RES.get(_chart_dim(kind, data), 6) * 2)
        _, val2, _, _ = _oracle_once(data, kind, objective, res2, restarts * 2)
        denom = max(abs(val), 1e-300)
        flags["self_check_unstable"] = abs(val - val2) / denom > 0.005
        if val2 < val:
            val = val2
    n = family.size
    return FitResult(shape=shape, cost=val, objective=objective, eps=eps,
                     method="oracle", seed=seed, n=n,
                     elapsed_ms=(time.perf_counter() - t0) * 1e3,
                     flags=flags, param_point=p)


def _chart_dim(kind, data):
    return {"circle": 3, "sphere": 4, "cylinder": 5,
            "two-lines": 3}.get(kind, 3)


def _oracle_once(data, kind, objective, resolution, restarts):
    if kind == "circle":
        pts = data if isinstance(data, PointSet) else PointSet(np.asarray(data))
        family = geo.circle_cone_family(pts)
        lo, hi, pad = _point_region(pts.points)
        region = _region(lo, hi, 0.0, 2 * pad)
        p, val = _oracle_search(family, region, objective, resolution, restarts)
        return p, val, Circle(tuple(p.base), p.height), family
    if kind == "sphere":
        pts = data if isinstance(data, PointSet) else PointSet(np.asarray(data))
        family = geo.sphere_cone_family(pts)
        lo, hi, pad = _point_region(pts.points)
        region = _region(lo, hi, 0.0, 2 * pad)
        p, val = _oracle_search(family, region, objective, resolution, restarts)
        return p, val, Sphere(tuple(p.base), p.height), family
    if kind == "cylinder":
        pts = data if isinstance(data, PointSet) else PointSet(np.asarray(data))
        best = None
        for axis in range(3):
            family = geo.cylinder_family(pts, axis=axis)
            region = _cylinder_region(pts.points, axis)
            p, val = _oracle_search(family, region, objective, resolution,
                                    restarts)
            if best is None or val < best[1]:
                best = (p, val, axis, family)
        p, val, axis, family = best
        q, v = geo.decode_cylinder_base(p.base, axis)
        return p, val, Cylinder(tuple(q), tuple(v), p.height), family
    if kind == "two-lines":
        pts = data if isinstance(data, PointSet) else PointSet(np.asarray(data))
        family = geo.line_pair_family(pts)
        region = _two_lines_region(pts.points)
        p, val = _oracle_search(family, region, objective, resolution, restarts)
        return p, val, LinePair(float(p.base[0]), float(p.base[1]),
                                p.height), family
    if kind == "flat-median":
        family = (data if isinstance(data, geo.SurfaceFamily)
                  else geo.flat_median_family(data))
        anchors = np.array([a for a, _ in family.flats])
        lo, hi, pad = _point_region(anchors)
        region = _region(lo, hi, 0.0, 0.0)
        p, val = _oracle_search(family, region, objective, resolution, restarts)
        return p, val, MedianPoint(tuple(p.base)), family
    raise ValueError(f"unknown oracle kind {kind!r}")


def _region(lo, hi, h_lo, h_hi):
    from .ladder import SearchRegion
    return SearchRegion(lo, hi, h_lo, h_hi)


# ---------------------------------------------------------------------------
# Instance generation
# ---------------------------------------------------------------------------

def _orthobasis(v):
    """Two unit vectors completing v to an orthonormal frame."""
    a = np.array([1.0, 0.0, 0.0]) if abs(v[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u1 = np.cross(v, a)
    u1 /= np.linalg.norm(u1)
    u2 = np.cross(v, u1)
    return u1, u2


def gen_instance(spec: InstanceSpec):
    """Deterministic instance plus its ground-truth shape (or None).

    Returns (data, truth).  For point kinds data is a PointSet; 'lines'
    yields a list of (anchor, basis) flats; 'stack-1d' a sorted value
    array.
    """
    rng = np.random.default_rng(spec.seed)
    k_out = int(round(spec.outlier_frac * spec.n))
    n_in = spec.n - k_out

    if spec.kind == "stack-1d":
        values = np.arange(spec.n, dtype=float)
        if spec.noise > 0:
            values = np.sort(values + rng.normal(0, spec.noise, spec.n))
        return values, None

    if spec.kind == "circle":
        center = rng.uniform(-1, 1, 2)
        r = rng.uniform(0.5, 2.0)
        ang = rng.uniform(0, 2 * math.pi, n_in)
        rad = np.full(n_in, r)
        if spec.noise > 0:
            rad = rad + rng.normal(0, spec.noise, n_in)
        pts = center + rad[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        pts = _add_outliers(pts, k_out, spec.outlier_box_scale, rng)
        return PointSet(pts), Circle(tuple(center), float(r))

    if spec.kind == "sphere":
        center = rng.uniform(-1, 1, 3)
        r = rng.uniform(0.5, 2.0)
        d = rng.normal(0, 1, (n_in, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        rad = np.full(n_in, r)
        if spec.noise > 0:
            rad = rad + rng.normal(0, spec.noise, n_in)
        pts = center + rad[:, None] * d
        pts = _add_outliers(pts, k_out, spec.outlier_box_scale, rng)
        return PointSet(pts), Sphere(tuple(center), float(r))

    if spec.kind == "cylinder":
        q = rng.uniform(-1, 1, 3)
        v = rng.normal(0, 1, 3)
        v /= np.linalg.norm(v)
        r = rng.uniform(0.5, 1.5)
        u1, u2 = _orthobasis(v)
        t = rng.uniform(-2, 2, n_in)
        ang = rng.uniform(0, 2 * math.pi, n_in)
        rad = np.full(n_in, r)
        if spec.noise > 0:
            rad = rad + rng.normal(0, spec.noise, n_in)
        pts = (q + t[:, None] * v
               + rad[:, None] * (np.cos(ang)[:, None] * u1
                                 + np.sin(ang)[:, None] * u2))
        pts = _add_outliers(pts, k_out, spec.outlier_box_scale, rng)
        return PointSet(pts), Cylinder(tuple(q), tuple(v), float(r))

    if spec.kind == "lines":
        hub = rng.uniform(-1, 1, 2)
        flats = []
        for _ in range(n_in):
            theta = rng.uniform(0, math.pi)
            d = np.array([math.cos(theta), math.sin(theta)])
            normal = np.array([-d[1], d[0]])
            off = rng.normal(0, spec.noise) if spec.noise > 0 else 0.0
            flats.append((hub + off * normal, d[None, :]))
        for _ in range(k_out):
            theta = rng.uniform(0, math.pi)
            d = np.array([math.cos(theta), math.sin(theta)])
            anchor = hub + rng.uniform(-spec.outlier_box_scale,
                                       spec.outlier_box_scale, 2)
            flats.append((anchor, d[None, :]))
        return flats, MedianPoint(tuple(hub))

    if spec.kind == "two-lines":
        theta = rng.uniform(0, math.pi)
        d = np.array([math.cos(theta), math.sin(theta)])
        normal = np.array([-d[1], d[0]])
        center = rng.uniform(-1, 1, 2)
        half_sep = rng.uniform(0.3, 1.0)
        t = rng.uniform(-2, 2, n_in)
        side = np.where(rng.random(n_in) < 0.5, 1.0, -1.0)
        off = side * half_sep
        if spec.noise > 0:
            off = off + rng.normal(0, spec.noise, n_in)
        pts = center + t[:, None] * d + off[:, None] * normal
        pts = _add_outliers(pts, k_out, spec.outlier_box_scale, rng)
        offset = float(center @ normal)
        return PointSet(pts), LinePair(float(theta), offset, float(half_sep))

    raise ValueError(f"unknown instance kind {spec.kind!r}")


def _add_outliers(pts, k_out, box_scale, rng):
    if k_out == 0:
        return pts
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    center = (lo + hi) / 2
    half = (hi - lo) / 2 * box_scale
    out = center + rng.uniform(-1, 1, (k_out, pts.shape[1])) * half
    return np.vstack([pts, out])


def gen_1d(kind: str, n: int, seed: int) -> np.ndarray:
    """Sorted 1D multisets for the coreset suites."""
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        v = rng.uniform(0, 100, n)
    elif kind == "clustered":
        centers = rng.uniform(0, 100, 5)
        which = rng.integers(0, 5, n)
        v = centers[which] + rng.normal(0, 0.5, n)
    elif kind == "heavy-tailed":
        v = rng.pareto(1.5, n) * 10
    else:
        raise ValueError(f"unknown 1D kind {kind!r}")
    return np.sort(v)
