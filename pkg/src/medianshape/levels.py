"""Arrangement-level machinery: exact k-levels along vertical lines,
extents, gradation sampling, and the reduction of a large surface family
to a small weighted set of (sampled) level surfaces.

Levels are evaluated per query base by order statistics over the surface
values, which keeps every approximation guarantee of the sampled-level
reduction while avoiding explicit level-surface construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coreset1d import build_chunks
from .geometry import ParamPoint, SurfaceFamily, surface_values_at

DEFAULT_CHERNOFF_C = 4.0
DEFAULT_M_C = 1.0


def level_value(family: SurfaceFamily, base, k: int, side: str = "bottom",
                subset=None) -> float:
    """Value of the bottom/top k-level at a base point.

    The bottom k-level is the (k+1)-th smallest surface value; the top
    k-level mirrors it from above.  Selection runs in expected linear
    time (introselect).
    """
    vals = surface_values_at(family, base)[0]
    if subset is not None:
        vals = vals[np.asarray(subset)]
    n = len(vals)
    if not 0 <= k < n:
        raise ValueError(f"level {k} out of range for {n} active surfaces")
    if side == "top":
        k = n - 1 - k
    elif side != "bottom":
        raise ValueError(f"unknown side {side!r}")
    return float(np.partition(vals, k)[k])


def extent(family: SurfaceFamily, base, k: int, r: int, subset=None) -> float:
    """Vertical gap between the top k-level and the bottom r-level."""
    n = family.size if subset is None else len(subset)
    if k < 0 or r < 0 or k + r > n - 1:
        raise ValueError(f"invalid depths k={k}, r={r} for {n} surfaces")
    top = level_value(family, base, k, "top", subset)
    bot = level_value(family, base, r, "bottom", subset)
    return top - bot


@dataclass(frozen=True)
class Gradation:
    """Nested half-probability samples of member indices; samples[0] is
    the full index set."""

    samples: tuple
    seed: int

    @property
    def depth(self) -> int:
        return len(self.samples) - 1

    def rate(self, j: int) -> float:
        return 0.5 ** j


def build_gradation(family_or_n, seed: int) -> Gradation:
    """Draw the nested samples; deterministic given the seed."""
    n = family_or_n if isinstance(family_or_n, int) else family_or_n.size
    if n < 1:
        raise ValueError("family must be nonempty")
    rng = np.random.default_rng(seed)
    samples = [np.arange(n)]
    levels = math.ceil(math.log2(n)) + 1 if n > 1 else 1
    for _ in range(levels):
        prev = samples[-1]
        keep = rng.random(len(prev)) < 0.5
        nxt = prev[keep]
        if len(nxt) == 0:
            break
        samples.append(nxt)
    return Gradation(samples=tuple(samples), seed=seed)


@dataclass(frozen=True)
class PlanEntry:
    side: str           # "bottom" or "top"
    sample_index: int   # which gradation sample the level is read from
    depth: int          # level within that sample
    weight: int         # chunk size this level stands in for


@dataclass(frozen=True)
class LevelPlan:
    """Which levels, of which samples, at which weights, replace the
    full family along every vertical line."""

    n: int
    eps: float
    prefix: int                # exact boundary levels per side, weight 1
    has_middle: bool
    entries: tuple

    def total_weight(self) -> int:
        return (2 * self.prefix + (1 if self.has_middle else 0)
                + sum(e.weight for e in self.entries))


def plan_levels(n: int, eps: float, gradation: Gradation,
                chernoff_c: float = DEFAULT_CHERNOFF_C,
                m_c: float = DEFAULT_M_C) -> LevelPlan:
    """Plan the level selection for a family of n surfaces.

    The singleton prefix is m = max(ceil(10/eps), ceil(m_c ln(n)/eps^2)).
    For each geometric chunk pair, the target level k = (1+eps/20) *
    alpha_{i-1} is read from the gradation sample whose rate is nearest
    above zeta = min(c k^-1 delta^-2 ln n, 1) with delta = eps/40, at
    depth round(rate * k).
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if len(gradation.samples[0]) != n:
        raise ValueError("gradation was built for a different family size")
    m = max(math.ceil(10 / eps), math.ceil(m_c * math.log(n) / eps ** 2))
    part = build_chunks(n, eps, m_override=m)
    prefix = min(m, part.half)
    delta = eps / 40
    entries = []
    for i in range(prefix, part.num_pairs):
        lo, hi = part.left_range(i)     # 0-based level range [lo, hi)
        k = (1 + eps / 20) * lo
        zeta = min(chernoff_c * delta ** -2 * math.log(n) / k, 1.0)
        j = 0 if zeta >= 1.0 else int(math.floor(-math.log2(zeta)))
        j = min(j, gradation.depth)
        while len(gradation.samples[j]) == 0:
            j -= 1
        size_j = len(gradation.samples[j])
        if j == 0:
            depth = min(max(int(round(k)), lo), hi - 1)
        else:
            depth = min(max(int(round(gradation.rate(j) * k)), 0), size_j - 1)
        w = hi - lo
        entries.append(PlanEntry("bottom", j, depth, w))
        entries.append(PlanEntry("top", j, depth, w))
    plan = LevelPlan(n=n, eps=eps, prefix=prefix,
                     has_middle=(n % 2 == 1), entries=tuple(entries))
    assert plan.total_weight() == n
    return plan


class ReducedEvaluator:
    """Evaluates the weighted reduced cost defined by a level plan.

    Shares the profile/cost interface with FamilyEvaluator: profile()
    returns, per base, the heights of all planned level surfaces together
    with their weights.
    """

    def __init__(self, family: SurfaceFamily, gradation: Gradation,
                 plan: LevelPlan):
        if family.size != plan.n:
            raise ValueError("plan was built for a different family size")
        if len(gradation.samples[0]) != plan.n:
            raise ValueError("gradation does not match the plan")
        self.family = family
        self.gradation = gradation
        self.plan = plan
        self.base_dim = family.base_dim
        self.total_weight = plan.total_weight()
        n, s = plan.n, plan.prefix
        weights = [np.ones(s), np.ones(s)]
        if plan.has_middle:
            weights.append(np.ones(1))
        weights.append(np.array([e.weight for e in plan.entries], dtype=float))
        self.weights = np.concatenate(weights)
        # group plan entries by gradation sample for batch evaluation
        self._samples_used = sorted({e.sample_index for e in plan.entries})

    def profile(self, bases, batch: int | None = None):
        bases = np.asarray(bases, dtype=float)
        if bases.ndim == 1:
            bases = bases[None, :]
        n = self.plan.n
        if batch is None:
            batch = max(1, 4_000_000 // max(n, 1))
        chunks = [self._profile_block(bases[i:i + batch])
                  for i in range(0, len(bases), batch)]
        return np.concatenate(chunks, axis=0), self.weights

    def _profile_block(self, bases):
        plan = self.plan
        n, s = plan.n, plan.prefix
        vals = surface_values_at(self.family, bases)
        svals = np.sort(vals, axis=1)
        cols = [svals[:, :s], svals[:, n - s:][:, ::-1]]
        if plan.has_middle:
            cols.append(svals[:, n // 2][:, None])
        if plan.entries:
            sub_sorted = {}
            for j in self._samples_used:
                if j == 0:
                    sub_sorted[j] = svals
                else:
                    idx = self.gradation.samples[j]
                    sub_sorted[j] = np.sort(vals[:, idx], axis=1)
            entry_cols = np.empty((len(bases), len(plan.entries)))
            for e_i, e in enumerate(plan.entries):
                sv = sub_sorted[e.sample_index]
                k = e.depth if e.side == "bottom" else sv.shape[1] - 1 - e.depth
                entry_cols[:, e_i] = sv[:, k]
            cols.append(entry_cols)
        return np.concatenate(cols, axis=1)

    def cost(self, p: ParamPoint, objective: str = "l1") -> float:
        vals, w = self.profile(p.base)
        d = np.abs(vals[0] - p.height)
        if objective == "l2":
            d = d ** 2
        return math.fsum(w * d)


def reduced_cost_l1(family, gradation, plan, p: ParamPoint) -> float:
    """Weighted reduced L1 cost at a parameter point."""
    return ReducedEvaluator(family, gradation, plan).cost(p, "l1")


def reduced_cost_l2(family, gradation, plan, p: ParamPoint) -> float:
    return ReducedEvaluator(family, gradation, plan).cost(p, "l2")
