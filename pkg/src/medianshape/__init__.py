"""L1/L2 shape fitting via 1D median coresets, sampled arrangement levels,
and ladder-quantized cost minimization."""

__version__ = "0.1.0"

from .coreset1d import (Coreset1D, build_chunks, build_coreset,
                        eval_weighted_l1, eval_weighted_l2,
                        eval_weighted_monotone, perturb)
from .fitters import (FitConfig, FitResult, fit, fit_circle, fit_cylinder,
                      fit_flat_median, fit_sphere, two_lines_fit)
from .geometry import (Circle, Cylinder, FamilyEvaluator, LinePair,
                       MedianPoint, ParamPoint, PointSet, Sphere,
                       SurfaceFamily, approx_eq, cost_l1, cost_l2,
                       surface_value)
from .ladder import (Ladder, SearchRegion, StabInfo, ZeroCostCandidate,
                     build_ladder, find_stab, minimize, quantized_cost)
from .levels import (Gradation, LevelPlan, ReducedEvaluator, build_gradation,
                     extent, level_value, plan_levels, reduced_cost_l1,
                     reduced_cost_l2)
from .testkit import (InstanceSpec, gen_1d, gen_instance, oracle_1d,
                      oracle_1d_minimize, oracle_fit)

__all__ = [name for name in dir() if not name.startswith("_")]
