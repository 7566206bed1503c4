"""Exponential-chunk partition and weighted 1-median coresets on the line.

A sorted multiset is partitioned symmetrically into chunks whose sizes
grow geometrically toward the middle; one weighted representative per
chunk approximates the 1-median cost function (and its squared and
monotone-transformed variants) everywhere, within a relative error
controlled by eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChunkPartition:
    """Symmetric partition of indices 0..n-1 into chunk pairs.

    bounds[i-1]..bounds[i] is the (0-based, half-open) index range of the
    i-th left chunk; the i-th right chunk mirrors it from the top.  For
    odd n the middle element forms one extra singleton on the left side.
    """

    n: int
    eps: float
    m: int
    bounds: tuple

    @property
    def num_pairs(self) -> int:
        return len(self.bounds) - 1

    @property
    def half(self) -> int:
        return self.n // 2

    @property
    def has_middle(self) -> bool:
        return self.n % 2 == 1

    @property
    def alphas(self) -> tuple:
        """Boundary sequence alpha_m..alpha_M (geometric part only)."""
        s = min(self.m, self.half)
        return self.bounds[s:]

    def pair_sizes(self) -> np.ndarray:
        b = np.asarray(self.bounds)
        return b[1:] - b[:-1]

    def left_range(self, i: int) -> tuple:
        return self.bounds[i], self.bounds[i + 1]

    def right_range(self, i: int) -> tuple:
        lo, hi = self.left_range(i)
        return self.n - hi, self.n - lo


def build_chunks(n: int, eps: float, m_override: int | None = None) -> ChunkPartition:
    """Build the exponential chunk partition for n sorted values.

    m defaults to ceil(10/eps); callers may force a larger singleton
    prefix.  Chunk boundaries follow alpha_{i+1} =
    min(ceil((1+eps/10)*alpha_i), floor(n/2)) until the half mark.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    m = m_override if m_override is not None else math.ceil(10 / eps)
    if m < 1:
        raise ValueError("m must be >= 1")
    half = n // 2
    bounds = list(range(min(m, half) + 1))
    if bounds[-1] == m:  # geometric growth only past the singleton prefix
        a = m
        while a < half:
            a = min(math.ceil((1 + eps / 10) * a), half)
            bounds.append(a)
    return ChunkPartition(n=n, eps=eps, m=m, bounds=tuple(bounds))


@dataclass(frozen=True)
class Coreset1D:
    """Weighted representatives (l_i, r_i) of each chunk pair."""

    left: np.ndarray
    right: np.ndarray
    weights: np.ndarray
    middle: float | None
    eps: float
    source_n: int

    def __post_init__(self):
        object.__setattr__(self, "left", np.asarray(self.left, dtype=float))
        object.__setattr__(self, "right", np.asarray(self.right, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.int64))

    @property
    def total_weight(self) -> int:
        extra = 1 if self.middle is not None else 0
        return int(2 * self.weights.sum() + extra)

    @property
    def size(self) -> int:
        return 2 * len(self.left) + (1 if self.middle is not None else 0)

    def as_weighted(self) -> tuple[np.ndarray, np.ndarray]:
        """Flatten to (values, weights) in left..middle..right order."""
        vals = [self.left]
        wts = [self.weights]
        if self.middle is not None:
            vals.append([self.middle])
            wts.append([1])
        vals.append(self.right[::-1])
        wts.append(self.weights[::-1])
        return np.concatenate(vals), np.concatenate(wts)


def build_coreset(values, eps: float, rep_rule: str = "first") -> Coreset1D:
    """Pick one weighted representative per chunk of the sorted input."""
    values = np.asarray(values, dtype=float).ravel()
    if np.any(np.diff(values) < 0):
        raise ValueError("values must be sorted ascending")
    if rep_rule not in ("first", "median-of-chunk"):
        raise ValueError(f"unknown rep_rule {rep_rule!r}")
    part = build_chunks(len(values), eps)
    n = len(values)
    left, right, weights = [], [], []
    for i in range(part.num_pairs):
        llo, lhi = part.left_range(i)
        rlo, rhi = part.right_range(i)
        if rep_rule == "first":
            li, ri = llo, rlo
        else:
            li, ri = (llo + lhi - 1) // 2, (rlo + rhi - 1) // 2
        left.append(values[li])
        right.append(values[ri])
        weights.append(lhi - llo)
    middle = float(values[part.half]) if part.has_middle else None
    return Coreset1D(left=np.array(left), right=np.array(right),
                     weights=np.array(weights), middle=middle,
                     eps=eps, source_n=n)


def perturb(coreset: Coreset1D, offsets) -> Coreset1D:
    """Shift representatives by per-pair offsets, each bounded by
    (eps/20)|l_i - r_i| for its pair; the middle singleton stays put."""
    offsets = np.asarray(offsets, dtype=float)
    if offsets.shape != (len(coreset.left), 2):
        raise ValueError("offsets must be an (num_pairs, 2) array")
    bound = (coreset.eps / 20) * np.abs(coreset.left - coreset.right)
    slack = 1 + 1e-12
    for i in range(len(coreset.left)):
        for j, name in ((0, "left"), (1, "right")):
            if abs(offsets[i, j]) > bound[i] * slack:
                raise ValueError(
                    f"offset for {name} representative of pair {i} exceeds "
                    f"(eps/20)|l_i - r_i| = {bound[i]:.6g}")
    return Coreset1D(left=coreset.left + offsets[:, 0],
                     right=coreset.right + offsets[:, 1],
                     weights=coreset.weights, middle=coreset.middle,
                     eps=coreset.eps, source_n=coreset.source_n)


# ---------------------------------------------------------------------------
# Weighted cost evaluation
# ---------------------------------------------------------------------------

def _check_inputs(values, weights, query=None):
    values = np.asarray(values, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    if len(values) != len(weights) or np.any(weights <= 0):
        raise ValueError("weights must be positive and match values")
    if query is not None and not np.all(np.isfinite(np.atleast_1d(query))):
        raise ValueError("query must be finite")
    return values, weights


def eval_weighted_l1(values, weights, query: float) -> float:
    """Sum of w_i |v_i - query| with compensated summation."""
    values, weights = _check_inputs(values, weights, query)
    return math.fsum(weights * np.abs(values - query))


def eval_weighted_l2(values, weights, query: float) -> float:
    values, weights = _check_inputs(values, weights, query)
    return math.fsum(weights * (values - query) ** 2)


def eval_weighted_monotone(values, weights, query: float, transform) -> float:
    """Sum of w_i f(|v_i - query|) for a monotone increasing f on R+."""
    values, weights = _check_inputs(values, weights, query)
    return math.fsum(weights * np.asarray(transform(np.abs(values - query)),
                                          dtype=float))


def eval_weighted_l1_many(values, weights, queries) -> np.ndarray:
    """Exact L1 costs at many queries via sorted prefix sums, O((n+q) log n)."""
    values, weights = _check_inputs(values, weights)
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    cw = np.concatenate([[0.0], np.cumsum(w)])
    cwv = np.concatenate([[0.0], np.cumsum(w * v)])
    q = np.asarray(queries, dtype=float).ravel()
    k = np.searchsorted(v, q, side="right")
    below = q * cw[k] - cwv[k]
    above = (cwv[-1] - cwv[k]) - q * (cw[-1] - cw[k])
    return below + above


def eval_weighted_l2_many(values, weights, queries) -> np.ndarray:
    """Exact squared costs at many queries (moment expansion)."""
    values, weights = _check_inputs(values, weights)
    q = np.asarray(queries, dtype=float).ravel()
    # center at the weighted mean to keep the expansion well conditioned
    W = math.fsum(weights)
    mean = math.fsum(weights * values) / W
    s2 = math.fsum(weights * (values - mean) ** 2)
    return s2 + W * (q - mean) ** 2
