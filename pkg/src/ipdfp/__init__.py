"""Inertial primal-dual fixed point algorithms for composite convex problems."""
from .kernels import BACKEND
from .solver import CONSENSUS, SolveOptions, run, suggest_schedule

__version__ = "0.1.0"
__all__ = ["BACKEND", "CONSENSUS", "SolveOptions", "run", "suggest_schedule", "__version__"]
