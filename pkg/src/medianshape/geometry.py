"""Surface families in parameter space and exact L1/L2 cost evaluation.

Every shape class is modeled as a family of nonnegative surfaces over a
base space: member i contributes a value f_i(base) (e.g. the distance of
input point i to the candidate center), and the candidate shape is a
point (base, height) whose vertical distance to surface i is
|f_i(base) - height|.  The L1 cost is the weighted sum of these vertical
distances, the L2 cost the weighted sum of their squares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Family kinds
CIRCLE_CONE = "circle-cone"
SPHERE_CONE = "sphere-cone"
CYLINDER = "cylinder"
FLAT_MEDIAN = "flat-median"
STACK_1D = "explicit-1d-stack"
LINE_PAIR = "line-pair"  # two parallel lines in the plane (2D cylinder analog)


@dataclass(frozen=True)
class PointSet:
    """Input points in R^D, D in {2, 3}."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise ValueError("points must be an (n, D) array with D in {2, 3}")
        if pts.shape[0] == 0:
            raise ValueError("point set is empty")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain non-finite coordinates")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def bbox(self):
        return self.points.min(axis=0), self.points.max(axis=0)

    def diameter(self) -> float:
        """Bounding-box diagonal; a 1..sqrt(D) factor of the true diameter."""
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))


@dataclass(frozen=True)
class ParamPoint:
    """A point in the lifted parameter space: base coordinates plus height."""

    base: np.ndarray
    height: float = 0.0

    def __post_init__(self):
        base = np.atleast_1d(np.asarray(self.base, dtype=float))
        if not np.all(np.isfinite(base)) or not math.isfinite(self.height):
            raise ValueError("parameter point has non-finite components")
        object.__setattr__(self, "base", base)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.base, [self.height]])


# ---------------------------------------------------------------------------
# Shapes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Circle:
    center: tuple
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("negative radius")


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("negative radius")


@dataclass(frozen=True)
class Cylinder:
    axis_point: tuple
    axis_dir: tuple
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("negative radius")
        if abs(np.linalg.norm(self.axis_dir) - 1.0) > 1e-9:
            raise ValueError("axis direction must be a unit vector")


@dataclass(frozen=True)
class MedianPoint:
    coords: tuple


@dataclass(frozen=True)
class LinePair:
    """Two parallel lines in the plane: the pair at signed distance
    offset +/- half_separation from the origin along normal
    (-sin angle, cos angle)."""

    angle: float
    offset: float
    half_separation: float

    def __post_init__(self):
        if self.half_separation < 0:
            raise ValueError("negative separation")


# ---------------------------------------------------------------------------
# Surface families
# ---------------------------------------------------------------------------

def _other_axes(axis: int):
    return [a for a in range(3) if a != axis]


@dataclass(frozen=True)
class SurfaceFamily:
    """A weighted family of nonnegative surfaces over the base space.

    Immutable after construction; all evaluation helpers are pure.
    """

    kind: str
    base_dim: int
    weights: np.ndarray
    sources: np.ndarray | None = None        # point-backed kinds
    values: np.ndarray | None = None         # explicit-1d-stack
    flats: tuple = ()                        # flat-median: ((anchor, basis), ...)
    axis: int = 2                            # cylinder dominant axis

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.int64)
        if w.ndim != 1 or len(w) != self.size or np.any(w <= 0):
            raise ValueError("weights must be positive integers, one per member")
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        if self.kind == STACK_1D:
            return len(self.values)
        if self.kind == FLAT_MEDIAN:
            return len(self.flats)
        return self.sources.shape[0]

    @property
    def total_weight(self) -> int:
        return int(self.weights.sum())


def circle_cone_family(points: PointSet, weights=None) -> SurfaceFamily:
    if points.dim != 2:
        raise ValueError("circle fitting needs 2D points")
    return SurfaceFamily(CIRCLE_CONE, 2, _unit_weights(points.n, weights),
                         sources=points.points)


def sphere_cone_family(points: PointSet, weights=None) -> SurfaceFamily:
    if points.dim != 3:
        raise ValueError("sphere fitting needs 3D points")
    return SurfaceFamily(SPHERE_CONE, 3, _unit_weights(points.n, weights),
                         sources=points.points)


def cylinder_family(points: PointSet, axis: int = 2, weights=None) -> SurfaceFamily:
    """5-parameter chart: base = (q_u, q_v, s_u, s_v), height = radius.

    The axis line passes through q = q_u*e_u + q_v*e_v (in the plane
    orthogonal to the dominant axis) with direction
    normalize(e_axis + s_u*e_u + s_v*e_v); the chart excludes directions
    orthogonal to the dominant axis.
    """
    if points.dim != 3:
        raise ValueError("cylinder fitting needs 3D points")
    if axis not in (0, 1, 2):
        raise ValueError("axis must be 0, 1 or 2")
    return SurfaceFamily(CYLINDER, 4, _unit_weights(points.n, weights),
                         sources=points.points, axis=axis)


def line_pair_family(points: PointSet, weights=None) -> SurfaceFamily:
    """2D analog of the cylinder chart: base = (angle, offset), height =
    half separation of the two parallel lines."""
    if points.dim != 2:
        raise ValueError("two-lines fitting needs 2D points")
    return SurfaceFamily(LINE_PAIR, 2, _unit_weights(points.n, weights),
                         sources=points.points)


def flat_median_family(flats, weights=None) -> SurfaceFamily:
    """Each member is the distance function to one flat (affine subspace).

    flats: sequence of (anchor, basis) with basis a (k, D) array of
    orthonormal row vectors (k may be 0 for a point-flat).
    """
    norm = []
    dim = None
    for anchor, basis in flats:
        anchor = np.asarray(anchor, dtype=float)
        basis = np.asarray(basis, dtype=float).reshape(-1, anchor.shape[0])
        if dim is None:
            dim = anchor.shape[0]
        if anchor.shape[0] != dim:
            raise ValueError("flats live in different dimensions")
        if basis.size:
            gram = basis @ basis.T
            if not np.allclose(gram, np.eye(basis.shape[0]), atol=1e-9):
                raise ValueError("flat basis is not orthonormal")
        norm.append((anchor, basis))
    if dim not in (2, 3):
        raise ValueError("flats must live in R^2 or R^3")
    return SurfaceFamily(FLAT_MEDIAN, dim, _unit_weights(len(norm), weights),
                         flats=tuple(norm))


def stack_family(values, weights=None) -> SurfaceFamily:
    """Constant surfaces; the 1D multiset case (base space is empty)."""
    values = np.asarray(values, dtype=float).ravel()
    return SurfaceFamily(STACK_1D, 0, _unit_weights(len(values), weights),
                         values=values)


def _unit_weights(n, weights):
    if weights is None:
        return np.ones(n, dtype=np.int64)
    return np.asarray(weights, dtype=np.int64)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def decode_cylinder_base(base, axis: int):
    """Map chart coordinates (q_u, q_v, s_u, s_v) to (point, unit direction)."""
    u, v = _other_axes(axis)
    q = np.zeros(3)
    q[u], q[v] = base[0], base[1]
    d = np.zeros(3)
    d[axis] = 1.0
    d[u], d[v] = base[2], base[3]
    d /= np.linalg.norm(d)
    return q, d


def encode_cylinder_base(axis_point, axis_dir):
    """Inverse of decode_cylinder_base: chart coordinates and the dominant
    axis (the coordinate axis closest to the direction)."""
    q = np.asarray(axis_point, dtype=float)
    d = np.asarray(axis_dir, dtype=float)
    axis = int(np.argmax(np.abs(d)))
    if d[axis] == 0:
        raise ValueError("degenerate axis direction")
    d = d / d[axis]
    u, v = _other_axes(axis)
    p = q - q[axis] * d  # slide along the line to the x_axis = 0 plane
    return np.array([p[u], p[v], d[u], d[v]]), axis


def surface_values_at(family: SurfaceFamily, bases) -> np.ndarray:
    """Evaluate every member surface at a batch of bases.

    bases: (B, base_dim) array.  Returns a (B, n) array of f_i values.
    """
    bases = np.asarray(bases, dtype=float)
    if bases.ndim == 1:
        bases = bases[None, :]
    if bases.shape[1] != family.base_dim:
        raise ValueError(
            f"base has {bases.shape[1]} components, family expects {family.base_dim}")
    B = bases.shape[0]

    if family.kind == STACK_1D:
        return np.broadcast_to(family.values, (B, family.size)).copy()

    if family.kind in (CIRCLE_CONE, SPHERE_CONE):
        diff = bases[:, None, :] - family.sources[None, :, :]
        return np.sqrt(np.einsum("bnd,bnd->bn", diff, diff))

    if family.kind == LINE_PAIR:
        theta = bases[:, 0]
        normal = np.stack([-np.sin(theta), np.cos(theta)], axis=1)  # (B, 2)
        proj = normal @ family.sources.T                            # (B, n)
        return np.abs(proj - bases[:, 1:2])

    if family.kind == CYLINDER:
        u, v = _other_axes(family.axis)
        q = np.zeros((B, 3))
        q[:, u], q[:, v] = bases[:, 0], bases[:, 1]
        d = np.zeros((B, 3))
        d[:, family.axis] = 1.0
        d[:, u], d[:, v] = bases[:, 2], bases[:, 3]
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        diff = family.sources[None, :, :] - q[:, None, :]           # (B, n, 3)
        t = np.einsum("bnd,bd->bn", diff, d)
        perp = diff - t[:, :, None] * d[:, None, :]
        return np.sqrt(np.einsum("bnd,bnd->bn", perp, perp))

    if family.kind == FLAT_MEDIAN:
        out = np.empty((B, family.size))
        for i, (anchor, basis) in enumerate(family.flats):
            diff = bases - anchor[None, :]
            if basis.size:
                coeff = diff @ basis.T
                diff = diff - coeff @ basis
            out[:, i] = np.sqrt(np.einsum("bd,bd->b", diff, diff))
        return out

    raise ValueError(f"unknown family kind {family.kind!r}")


def surface_value(family: SurfaceFamily, member_index: int, base) -> float:
    """f_i at a single base point."""
    if not 0 <= member_index < family.size:
        raise IndexError(f"member index {member_index} out of range")
    return float(surface_values_at(family, base)[0, member_index])


def cost_l1(family: SurfaceFamily, p: ParamPoint) -> float:
    """Weighted sum of vertical distances, exactly summed."""
    vals = surface_values_at(family, p.base)[0]
    return math.fsum(np.abs(vals - p.height) * family.weights)


def cost_l2(family: SurfaceFamily, p: ParamPoint) -> float:
    """Weighted sum of squared vertical distances, exactly summed."""
    vals = surface_values_at(family, p.base)[0]
    return math.fsum((vals - p.height) ** 2 * family.weights)


def cost(family: SurfaceFamily, p: ParamPoint, objective: str = "l1") -> float:
    if objective == "l1":
        return cost_l1(family, p)
    if objective == "l2":
        return cost_l2(family, p)
    raise ValueError(f"unknown objective {objective!r}")


def approx_eq(x: float, y: float, eps: float) -> bool:
    """The symmetric (1 +/- eps) approximation relation on nonneg reals."""
    if not 0 < eps < 0.25:
        raise ValueError("eps must lie in (0, 1/4)")
    if x < 0 or y < 0:
        raise ValueError("approx_eq is defined for nonnegative values")
    return ((1 - eps) * x <= y <= (1 + eps) * x
            and (1 - eps) * y <= x <= (1 + eps) * y)


class FamilyEvaluator:
    """Exact-cost evaluator over the full surface family.

    Exposes the profile/cost interface shared with the reduced evaluator
    so the ladder search can run on either.
    """

    def __init__(self, family: SurfaceFamily):
        self.family = family
        self.weights = family.weights.astype(float)
        self.total_weight = family.total_weight
        self.base_dim = family.base_dim

    def profile(self, bases) -> tuple[np.ndarray, np.ndarray]:
        return surface_values_at(self.family, bases), self.weights

    def cost(self, p: ParamPoint, objective: str = "l1") -> float:
        return cost(self.family, p, objective)
