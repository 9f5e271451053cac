"""Static, Newton-Raphson, modal and transient solvers."""
from .modal import ModeSet, modal_analysis, modal_residuals, solve_modal
from .nonlinear import ConvergenceHistory, NonlinearResult, solve_newton_raphson
from .static import StaticResult, element_stresses, prestress, solve_static, von_mises
from .transient import RayleighDamping, TransientResult, damping_sweep, fit_rayleigh, solve_newmark, transient_analysis

__all__ = [
    "ConvergenceHistory",
    "ModeSet",
    "NonlinearResult",
    "RayleighDamping",
    "StaticResult",
    "TransientResult",
    "damping_sweep",
    "element_stresses",
    "fit_rayleigh",
    "modal_analysis",
    "modal_residuals",
    "prestress",
    "solve_modal",
    "solve_newmark",
    "solve_newton_raphson",
    "solve_static",
    "transient_analysis",
    "von_mises",
]
