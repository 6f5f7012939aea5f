"""Directional technology adoption under CES job requirements and CET skills."""

__version__ = "0.1.0"

from .model_core import (
    ConvergenceError,
    ValidationError,
    WorkerJob,
    ces_output,
    cet_cost,
    concave_maximize,
    revenue_maximizer,
    unit_revenue,
)
from .autarky import (
    AutarkySolution,
    activity_shares,
    autarky_allocation,
    autarky_output_per_budget,
    autarky_prices,
    jevons_share_derivative,
    productivity_index,
    solve_autarky,
)
from .adoption import (
    AdoptionSolution,
    Technology,
    ThresholdPair,
    absolute_advantage,
    classify,
    corner_threshold,
    entry_threshold,
    optimal_intensity,
    threshold_pair,
)
from .cone import ConeSpec, adoption_measure, curvature_sweep, half_angle, in_cone, sqrt_approximation_error
from .multitech import MultiTechSolution, all_in_next, entry_next, k_unit_revenue, solve_multi
