"""Memory-rate bounds, gap certification and bit-level simulation for coded caching."""
from .bounds import (
    InclusionProfile,
    OutOfDomain,
    ProblemInstance,
    RateCurve,
    RequestDistribution,
    SubsetRequestDistribution,
    convex_envelope,
    convexified_rate_mn,
    inclusion_coefficients,
    inclusion_marginals,
    lower_avg,
    lower_cutset,
    lower_uniform,
    prefix_cache_rate,
    rate_mn,
    rate_upper_relaxed,
    single_user_optimal_rate,
)
from .gap import GAP_CONSTANT, GapReport, analytic_constants, corner_points, gap_sweep

__all__ = [
    "InclusionProfile", "OutOfDomain", "ProblemInstance", "RateCurve", "RequestDistribution",
    "SubsetRequestDistribution", "convex_envelope", "convexified_rate_mn", "inclusion_coefficients",
    "inclusion_marginals", "lower_avg", "lower_cutset", "lower_uniform", "prefix_cache_rate",
    "rate_mn", "rate_upper_relaxed", "single_user_optimal_rate",
    "GAP_CONSTANT", "GapReport", "analytic_constants", "corner_points", "gap_sweep",
]
