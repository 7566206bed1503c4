"""Stabbing segments, the quantization ladder, and the search driver.

The ladder replaces each vertical distance by the smallest ladder value
above it, which never underestimates the cost and overestimates it by at
most a (1 + eps/5) factor wherever the cost is at least the stabbing
segment length.  The minimization driver scores a coarse grid with the
quantized cost, refines the best cells, and polishes the winner with
derivative-free descent on the exact cost.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize as _nelder_mead

from .geometry import ParamPoint


class ZeroCostCandidate(Exception):
    """Raised when the stabbing segment has zero length: a shape fitting
    every surface exactly exists and the caller should short-circuit."""


@dataclass(frozen=True)
class SearchRegion:
    """Axis-aligned box in base space plus a height interval."""

    base_lo: np.ndarray
    base_hi: np.ndarray
    height_lo: float
    height_hi: float

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.base_lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.base_hi, dtype=float))
        if lo.shape != hi.shape or np.any(hi < lo) or self.height_hi < self.height_lo:
            raise ValueError("degenerate search region")
        object.__setattr__(self, "base_lo", lo)
        object.__setattr__(self, "base_hi", hi)

    @property
    def base_dim(self) -> int:
        return len(self.base_lo)


@dataclass(frozen=True)
class StabInfo:
    """A short vertical segment stabbing all surfaces at some base."""

    base: np.ndarray
    length: float
    mid_height: float


@dataclass(frozen=True)
class Ladder:
    """Distance quantization values u_1..u_M: linear steps of size u up
    to m_linear, then geometric growth by (1 + eps/20) past W^2 * |sigma|."""

    u: float
    values: np.ndarray
    m_linear: int
    W: int
    eps: float

    @property
    def top(self) -> float:
        return float(self.values[-1])


def max_threads() -> int:
    try:
        return max(1, int(os.environ.get("MEDIANSHAPE_THREADS", "1")))
    except ValueError:
        return 1


def _grid_counts(region: SearchRegion, grid) -> np.ndarray:
    """Per-axis grid resolutions; a scalar grid applies to every axis."""
    counts = np.broadcast_to(np.asarray(grid, dtype=int),
                             (region.base_dim,)).copy()
    if region.base_dim and counts.min() < 1:
        raise ValueError("grid resolutions must be positive")
    return counts


def _grid_axes(region: SearchRegion, counts):
    return [np.linspace(lo, hi, c) if hi > lo else np.array([lo])
            for lo, hi, c in zip(region.base_lo, region.base_hi, counts)]


def _cartesian(axes):
    if not axes:
        return np.zeros((1, 0))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _profile(evaluator, bases):
    nthreads = max_threads()
    if nthreads <= 1 or len(bases) < 2 * nthreads:
        return evaluator.profile(bases)
    blocks = np.array_split(np.asarray(bases, dtype=float), nthreads)
    with ThreadPoolExecutor(max_workers=nthreads) as pool:
        parts = list(pool.map(lambda b: evaluator.profile(b)[0], blocks))
    return np.concatenate(parts, axis=0), evaluator.weights


def find_stab(evaluator, region: SearchRegion, grid: int = 8,
              refine: int = 6) -> StabInfo:
    """Short vertical segment stabbing every surface within the region.

    Minimizes the (0,0)-extent over a base grid with local shrinking
    refinement; empirically within 2x of the true regional minimum.
    """
    if grid < 2:
        raise ValueError("grid must be >= 2")
    lo = region.base_lo.copy()
    hi = region.base_hi.copy()
    best = None
    for _ in range(max(1, refine)):
        axes = [np.linspace(a, b, grid) if b > a else np.array([a])
                for a, b in zip(lo, hi)]
        bases = _cartesian(axes)
        vals, _ = _profile(evaluator, bases)
        ext = vals.max(axis=1) - vals.min(axis=1)
        i = int(np.argmin(ext))
        cand = (float(ext[i]), bases[i],
                float((vals[i].max() + vals[i].min()) / 2))
        if best is None or cand[0] < best[0]:
            best = cand
        if region.base_dim == 0:
            break
        span = (hi - lo) / max(grid - 1, 1)
        center = best[1]
        lo = np.maximum(region.base_lo, center - 1.2 * span)
        hi = np.minimum(region.base_hi, center + 1.2 * span)
    length, base, mid = best
    return StabInfo(base=base, length=length, mid_height=mid)


def build_ladder(sigma_len: float, W: int, eps: float) -> Ladder:
    """Quantization ladder for a stab length and total weight W."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if W < 1:
        raise ValueError("W must be a positive integer")
    if sigma_len <= 0:
        raise ZeroCostCandidate(
            "stabbing segment has zero length; an exact fit exists")
    u = eps * sigma_len / (10 * W ** 2)
    m_linear = math.ceil(10 / eps)
    values = [u * i for i in range(1, m_linear + 1)]
    top = W ** 2 * sigma_len
    growth = 1 + eps / 20
    while values[-1] <= top:
        values.append(values[-1] * growth)
    return Ladder(u=u, values=np.array(values), m_linear=m_linear,
                  W=W, eps=eps)


def _quantize_idx(a: np.ndarray, ladder: Ladder) -> np.ndarray:
    """Index of the smallest ladder value >= a, or len(values) past the top.

    Exploits the linear-then-geometric structure for an O(1) closed-form
    estimate, then corrects float rounding against the actual rung values
    so the result matches a binary search exactly.
    """
    v = ladder.values
    m = len(v)
    lin_top = v[ladder.m_linear - 1]
    growth = 1 + ladder.eps / 20
    a = np.asarray(a, dtype=float)
    idx = np.ceil(a / ladder.u).astype(np.int64) - 1
    geom = a > lin_top
    if np.any(geom):
        j = np.ceil(np.log(np.maximum(a, lin_top) / lin_top)
                    / math.log(growth)).astype(np.int64)
        idx = np.where(geom, ladder.m_linear - 1 + j, idx)
    idx = np.clip(idx, 0, m)
    # fix-up: the estimate is off by at most a couple of rungs
    while True:
        over = (idx > 0) & (v[np.clip(idx - 1, 0, m - 1)] >= a)
        if not over.any():
            break
        idx[over] -= 1
    while True:
        under = (idx < m) & (v[np.minimum(idx, m - 1)] < a)
        if not under.any():
            break
        idx[under] += 1
    return idx


def quantize_distances(a: np.ndarray, ladder: Ladder):
    """Round distances up to ladder values; returns (b, saturated mask)."""
    idx = _quantize_idx(np.asarray(a, dtype=float), ladder)
    saturated = idx >= len(ladder.values)
    b = ladder.values[np.minimum(idx, len(ladder.values) - 1)]
    return b, saturated


@dataclass(frozen=True)
class QuantizedCost:
    value: float
    saturated: bool


def quantized_cost(evaluator, ladder: Ladder, p: ParamPoint,
                   objective: str = "l1") -> QuantizedCost:
    """Ladder-quantized cost at a point; saturation is flagged, not fatal."""
    vals, w = evaluator.profile(p.base)
    a = np.abs(vals[0] - p.height)
    b, sat = quantize_distances(a, ladder)
    if objective == "l2":
        b = b ** 2
    return QuantizedCost(value=math.fsum(w * b), saturated=bool(sat.any()))


def _best_heights(vals, weights, region, objective):
    """Per-base optimal height: weighted median (l1) or mean (l2).

    At a fixed base the cost is one-dimensional and convex in the height,
    so the height axis never needs to be gridded.
    """
    if objective == "l2":
        h = vals @ weights / weights.sum()
    else:
        order = np.argsort(vals, axis=1, kind="stable")
        sv = np.take_along_axis(vals, order, axis=1)
        cw = np.cumsum(weights[order], axis=1)
        idx = np.argmax(cw >= cw[:, -1:] / 2, axis=1)
        h = sv[np.arange(len(vals)), idx]
    return np.clip(h, region.height_lo, region.height_hi)


def _score_bases(vals, weights, ladder, region, objective):
    """Quantized scores of a (B, E) profile at each base's best height.

    Returns (scores, heights); saturated bases score +inf.
    """
    h = _best_heights(vals, weights, region, objective)
    a = np.abs(vals - h[:, None])
    idx = _quantize_idx(a, ladder)
    sat = (idx >= len(ladder.values)).any(axis=1)
    b = ladder.values[np.minimum(idx, len(ladder.values) - 1)]
    if objective == "l2":
        b = b ** 2
    scores = b @ weights
    scores[sat] = np.inf
    return scores, h


@dataclass
class MinimizeResult:
    point: ParamPoint
    cost: float
    budget_exhausted: bool = False
    evaluations: int = 0
    stab: StabInfo | None = None


_DEFAULT_GRID = {0: 1, 1: 48, 2: 16, 3: 10, 4: (10, 10, 5, 5)}


def minimize(evaluator, eps: float, region: SearchRegion, budget: int = 4000,
             seed: int = 0, objective: str = "l1",
             grid: int | tuple | None = None, top_k: int = 24,
             exact=None) -> MinimizeResult:
    """Ladder-guided adaptive search for the minimum-cost parameter point.

    Phase 1 scores a coarse base grid with the quantized cost, each base
    taken at its exact optimal height; phase 2 refines the best cells by
    recursive subdivision (all survivors advanced in lockstep) until
    improvement stalls below eps/10 of the incumbent; phase 3 polishes
    the leading candidates with Nelder-Mead on the exact cost.  `grid`
    may be a scalar or a per-axis resolution tuple (translational axes
    usually need more density than bounded slope axes).  Deterministic
    for fixed inputs and seed.
    """
    if exact is None:
        exact = evaluator
    bd = region.base_dim
    grid = grid if grid is not None else _DEFAULT_GRID.get(bd, 4)
    counts = _grid_counts(region, grid)
    n_grid = int(counts.prod()) if bd else 1
    if budget < max(n_grid, 1):
        raise ValueError("budget below coarse grid size")
    evals = 0

    # the stab only anchors the ladder scale, so its grid can stay coarse
    # in high dimensions where a dense one would eat the whole budget
    stab_cap = {0: 8, 1: 8, 2: 8, 3: 6}.get(bd, 4)
    stab_grid = max(2, min(int(counts.max()) if bd else 1, stab_cap))
    stab = find_stab(evaluator, region, grid=stab_grid, refine=5)
    evals += stab_grid ** bd * 5
    try:
        ladder = build_ladder(stab.length, evaluator.total_weight, eps)
    except ZeroCostCandidate:
        p = ParamPoint(stab.base, _clip_height(stab.mid_height, region))
        return MinimizeResult(point=p, cost=exact.cost(p, objective),
                              evaluations=evals, stab=stab)

    bases = _cartesian(_grid_axes(region, counts))
    vals, w = _profile(evaluator, bases)
    evals += len(bases)
    scores, hstar = _score_bases(vals, w, ladder, region, objective)

    base_span = ((region.base_hi - region.base_lo)
                 / np.maximum(counts - 1, 1))

    order = np.argsort(scores, kind="stable")[:top_k]
    center = bases[order].copy()
    hbest = hstar[order].copy()
    cur = scores[order].copy()
    n_start = len(order)
    hw = np.tile(base_span, (n_start, 1))
    active = np.ones(n_start, dtype=bool) if bd else np.zeros(n_start, dtype=bool)
    offsets = _cartesian([np.array([-1.0, 0.0, 1.0])] * bd) if bd else None
    exhausted = False
    for _ in range(14):
        if not active.any():
            break
        ai = np.flatnonzero(active)
        need = len(ai) * len(offsets)
        if evals + need > budget:
            exhausted = True
            break
        sub = center[ai][:, None, :] + offsets[None, :, :] * hw[ai][:, None, :]
        sub = np.clip(sub, region.base_lo, region.base_hi)
        sv, _ = _profile(evaluator, sub.reshape(-1, bd))
        evals += need
        ss, sh = _score_bases(sv, w, ladder, region, objective)
        ss = ss.reshape(len(ai), -1)
        sh = sh.reshape(len(ai), -1)
        j = np.argmin(ss, axis=1)
        rows = np.arange(len(ai))
        new = ss[rows, j]
        # fully saturated starts stay at +inf; count them as stalled
        with np.errstate(invalid="ignore"):
            improved = np.where(np.isinf(cur[ai]) & np.isinf(new),
                                0.0, cur[ai] - new)
        center[ai] = sub[rows, j]
        hbest[ai] = sh[rows, j]
        cur[ai] = np.minimum(cur[ai], new)
        hw[ai] *= 0.5
        incumbent = float(cur.min())
        stall = improved < (eps / 10) * np.maximum(
            np.minimum(incumbent, cur[ai]), 1e-300)
        active[ai[stall]] = False

    rank = np.argsort(cur, kind="stable")
    candidates = [(float(cur[i]), center[i], float(hbest[i])) for i in rank]

    point, cost_val, polish_evals = _polish(exact, region, candidates,
                                            objective, budget - evals)
    evals += polish_evals
    return MinimizeResult(point=point, cost=cost_val,
                          budget_exhausted=exhausted, evaluations=evals,
                          stab=stab)


def _clip_height(h, region):
    return float(np.clip(h, region.height_lo, region.height_hi))


def _polish_k(bd: int) -> int:
    return 4 if bd >= 4 else 6


def _polish(exact, region: SearchRegion, candidates, objective, budget_left):
    """Nelder-Mead descents on the exact cost.

    Each of the leading candidates gets a short coarse descent; the best
    landing point then gets the full two-stage (coarse then fine) chain.
    Polishing several starts guards against the quantized grid ranking a
    shallow local basin above the global one.
    """
    bd = region.base_dim
    has_h = region.height_hi > region.height_lo

    def f(x):
        base = np.clip(x[:bd], region.base_lo, region.base_hi)
        h = _clip_height(x[bd], region) if has_h else region.height_lo
        return exact.cost(ParamPoint(base, h), objective)

    if bd == 0 and not has_h:
        p = ParamPoint(np.zeros(0), region.height_lo)
        return p, exact.cost(p, objective), 1
    maxfev = max(200, min(4000, budget_left if budget_left > 0 else 200))
    evals = 0
    best_x = None
    best_val = np.inf
    for _, cb, ch in candidates[:_polish_k(bd)]:
        x0 = np.concatenate([cb, [ch if has_h else region.height_lo]])
        res = _nelder_mead(
            f, x0, method="Nelder-Mead",
            options=dict(xatol=1e-6, fatol=1e-9, maxfev=min(maxfev, 400),
                         initial_simplex=_simplex(x0, region, 1.0, has_h)))
        evals += res.nfev
        if res.fun < best_val:
            best_val = float(res.fun)
            best_x = res.x
    x = best_x
    for scale in (1.0, 1e-3):
        res = _nelder_mead(
            f, x, method="Nelder-Mead",
            options=dict(xatol=1e-11, fatol=1e-14, maxfev=maxfev,
                         initial_simplex=_simplex(x, region, scale, has_h)))
        evals += res.nfev
        x = res.x
    base = np.clip(x[:bd], region.base_lo, region.base_hi)
    h = _clip_height(x[bd], region) if has_h else region.height_lo
    p = ParamPoint(base, h)
    return p, exact.cost(p, objective), evals


def _simplex(x, region: SearchRegion, scale, has_h):
    n = len(x)
    spans = np.concatenate([region.base_hi - region.base_lo,
                            [region.height_hi - region.height_lo]])
    steps = np.maximum(spans * 0.02 * scale, 1e-12)
    simplex = np.tile(x, (n + 1, 1))
    for i in range(n):
        simplex[i + 1, i] += steps[i]
    return simplex
