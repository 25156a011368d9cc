"""Self-dual Chern-Simons vortices on conformally flat surfaces.

Solves for w = log |phi|^2 with prescribed vortex points, splitting off the
closed-form singular part so that only a smooth regular part is computed.
"""

__version__ = "0.1.0"

from .grid import FaceValues, Grid, GridError, ScalarGrid, gradient0, integrate_metric, laplacian0
from .metric import (
    ConformalFactor,
    Flat,
    GaussianBump,
    MetricBounds,
    MetricError,
    MetricRangeError,
    PowerGrowth,
    RadialTable,
    certify_bounds,
    evaluate,
    metric_from_dict,
    growth_ratio,
)
from .observables import (
    DecayFitError,
    ObservableSet,
    VortexSolution,
    fit_decay,
    magnetic_field,
    observe,
    total_energy,
    total_flux,
)
from .radial import RadialError, RadialProblem, RadialProfile, compare_with_2d, solve_radial
from .solver import SolveReport, SolveSettings, SolverError, discrete_energy, residual, solve
from .vortices import BackgroundFields, Vortex, VortexConfiguration

__all__ = [
    "BackgroundFields",
    "ConformalFactor",
    "DecayFitError",
    "FaceValues",
    "Flat",
    "GaussianBump",
    "Grid",
    "GridError",
    "MetricBounds",
    "MetricError",
    "MetricRangeError",
    "ObservableSet",
    "PowerGrowth",
    "RadialError",
    "RadialProblem",
    "RadialProfile",
    "RadialTable",
    "ScalarGrid",
    "SolveReport",
    "SolveSettings",
    "SolverError",
    "Vortex",
    "VortexConfiguration",
    "VortexSolution",
    "certify_bounds",
    "compare_with_2d",
    "discrete_energy",
    "evaluate",
    "fit_decay",
    "gradient0",
    "integrate_metric",
    "laplacian0",
    "magnetic_field",
    "metric_from_dict",
    "observe",
    "growth_ratio",
    "residual",
    "solve",
    "solve_radial",
    "total_energy",
    "total_flux",
]
