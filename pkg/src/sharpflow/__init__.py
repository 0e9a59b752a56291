"""Spectral simulation and diagnostics for the stochastic Cahn-Hilliard equation near its sharp-interface limit."""
from .experiments import __version__
from .sch_solver import SolverConfig, run
from .spectral_core import SpectralField

__all__ = ["SpectralField", "SolverConfig", "run", "__version__"]
