"""Numerical construction of a layered finite-time blow-up for the forced 2D Boussinesq system."""

from ._accel import BACKEND
from .dynamics import LayerChainTrajectory, integrate_chain
from .fields import layer_fields, total_fields
from .forces import force_breakdown, residual_oracle, total_forces
from .norms import HolderStrategy, NormReport, holder_estimate
from .pendulum import IdealLayerModel, cos_integral, pendulum_sin
from .schedule import ParamSchedule, ScheduleConfig, ScheduleError, feasibility_margins, optimal_exponents, plan
from .verify import blowup_tracker, convergence_probe, regularity_sweep, run_invariant_suite

__all__ = [
    "BACKEND", "LayerChainTrajectory", "integrate_chain", "layer_fields", "total_fields",
    "force_breakdown", "residual_oracle", "total_forces", "HolderStrategy", "NormReport",
    "holder_estimate", "IdealLayerModel", "cos_integral", "pendulum_sin", "ParamSchedule",
    "ScheduleConfig", "ScheduleError", "feasibility_margins", "optimal_exponents", "plan",
    "blowup_tracker", "convergence_probe", "regularity_sweep", "run_invariant_suite",
]
