"""Jacobi fields, saddle circles and conjugate points on Liouville surfaces."""

from .errors import *  # noqa: F401,F403
from .expr import DiffExpr, derivative, evaluate, parse
from .metrics import (
    ConformalChartMetric,
    KolokoltsovSphereMetric,
    LiouvilleTorusMetric,
    RejectionReport,
    example_torus,
    flat_chart,
    round_sphere_chart,
    validate_kolokoltsov,
)
from .flow import Trajectory, frame_decompose, frame_vectors, integrate_geodesic
from .jacobi import integrate_jacobi_frame, jacobi_from_integral, solution_from_line_field
from .saddle import (
    SaddleCircle,
    circle_trajectory,
    enumerate_critical_circles,
    floquet_multipliers,
    fundamental_solution_torus,
    line_fields_on_saddle,
    orientability,
)
from .sphere import fundamental_solution_sphere, solve_conjugate_sphere
from .conjugacy import ConjugateReport, caustic_conjugates, count_N, find_conjugate_points

__version__ = "0.1.0"
