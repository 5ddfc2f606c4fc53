"""Optimal release scheduling for Wolbachia-based population replacement.

Two-population competition model with cytoplasmic incompatibility, its
slow-fast scaling, the closed-form bang-bang solution of the scalar limit
problem, and adjoint-gradient optimization of the full problem under
box-plus-budget control constraints.
"""

from ._kernels import BACKEND
from .adjoint import (AdjointTrajectory, GradientSignal, SwitchingReport,
                      adjoint_full, adjoint_reduced, adjoint_slowfast,
                      cost_full, gradient_full, gradient_reduced,
                      gradient_slowfast, switching_analysis)
from .errors import (ConfigError, HorizonTooShort, InsufficientFlux,
                     MaxIterReached, NewtonDivergence, NoCoexistence,
                     PopulationCollapse, WolbactrlError)
from .integrator import (ControlSignal, NewtonOpts, TimeGrid, Trajectory,
                         convergence_order, default_dt, integrate,
                         lobatto_iiic_step)
from .model import (FIG1_PARAMS, ModelParams, StabilityReport, SteadyStates,
                    check_coexistence, check_viability, classify_stability,
                    jacobian, rhs_full, steady_states)
from .optimizer import (AdmissibleSet, OptimOpts, OptimResult, Problem,
                        StructureReport, default_inits, l1_distance,
                        optimize, project, structure_report)
from .reduced import (AnalyticSolution, C_star, G_M, J0, ReducedModel,
                      build_reduced_model, derived_constants, f_of_p, g_of_p,
                      integrate_reduced, solve_reduced_analytic)
from .slowfast import (TABLE1_PARAMS, SlowFastParams, UniformBounds, J_eps,
                       a_of_p, Z_of_p, bounds, from_slowfast,
                       integrate_full_fast, integrate_slowfast, rhs_slowfast,
                       to_slowfast)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
