"""Unions of offset convex shapes and vulnerability of planar networks."""
from .config import TOL, Tolerances
from .depth import DepthReport, depth, max_depth, shallow_vertex_count
from .geometry import (
    BoundaryCurve,
    ConvexCore,
    CurveIntersection,
    DegenerateInputError,
    GeometryError,
    OffsetShape,
    Point,
    Segment,
    boundary_intersections,
    contains,
    dist_point_core,
    offset,
)
from .models import (
    Density,
    DistributionSpec,
    GenerationError,
    Instance,
    Permutation,
    assign_radii,
    gen_adversarial,
    gen_disjoint_polygons,
    gen_disjoint_segments,
)
from .union import UnionStats, UnionVertex, classify_rr_terminal, union_stats, union_vertices
from .vulnerability import (
    ApproxParams,
    DiscretizationSpec,
    FailureFunction,
    VulnResult,
    approx_most_vulnerable,
    brute_force_phi_max,
    discretize,
    phi_point,
)

__version__ = "0.1.0"
