"""crflab: curvature flows on circle-packing metrics of disk triangulations.

A numerical laboratory for combinatorial Ricci flows in Euclidean and
hyperbolic background geometry: truncation builders, the Dirichlet flow with
its monitors, the hexagonal-lattice semilinear reformulation, vertex extremal
length estimation, and circle-packing layouts.
"""

from .geometry import (
    EUCLIDEAN,
    HYPERBOLIC,
    BackgroundGeometry,
    DegenerateTriangleError,
    FaceAngles,
    MetricDomainError,
    PackingMetric,
    angle_derivative_ratio,
    angle_jacobian,
    curvature,
    curvature_jacobian_row,
    edge_length,
    factor_from_radius,
    radius_from_factor,
    triangle_angles,
)
from .triangulation import (
    Triangulation,
    TriangulationError,
    Truncation,
    ball,
    build_constant_degree,
    build_hexagonal,
    load,
    save,
    truncate,
)
from .flow import (
    ExhaustionReport,
    FlowProblem,
    FlowState,
    StepperConfig,
    Trajectory,
    curvature_bound_monitor,
    hyperbolic_barrier,
    max_principle_monitor,
    rhs,
    solve_exhaustion,
    solve_finite,
    uniqueness_harness,
    uniqueness_weights,
)
from .hexlab import HexField, evolve, semilinear_rhs, stencil_F
from .layout import Embedding, LayoutError, embed, emit_svg
from .vel import TrendReport, VelEstimate, classify, vel_between

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
