"""Solver laboratory for a noise-driven linearized Cahn-Hilliard equation in 1D.

The package has three layers: exact sine-mode machinery (:mod:`~chclab.spectral`,
:mod:`~chclab.canvas`) that serves as ground truth, a C1-spline IMEX finite
element solver (:mod:`~chclab.splines`, :mod:`~chclab.fem`), and a study driver
(:mod:`~chclab.harness`, :mod:`~chclab.cli`) that measures convergence rates
against the exact layer.
"""

__version__ = "0.1.0"

from .canvas import (
    CanvasError,
    WeightTable,
    canvas_error,
    canvas_second_moment,
    canvas_solution,
    canvas_step,
    canvas_weight_table,
    time_discrete_solution,
    time_discrete_weight_table,
    time_discretization_error,
    time_discretization_profile,
)
from .noise import (
    NoiseGrid,
    NoiseMatrix,
    forcing_coefficients,
    load_noise,
    projection_identity,
    sample_noise,
    sample_seed,
    save_noise,
    slab_overlap,
)
from .spectral import (
    ModeRates,
    SpectralField,
    biharmonic_solve,
    elliptic_solve,
    evaluate_field,
    evolve,
    mild_second_moment,
    mode_rates,
    time_discrete_evolve,
)

__all__ = [
    "__version__",
    "CanvasError",
    "ModeRates",
    "NoiseGrid",
    "NoiseMatrix",
    "SpectralField",
    "WeightTable",
    "biharmonic_solve",
    "canvas_error",
    "canvas_second_moment",
    "canvas_solution",
    "canvas_step",
    "canvas_weight_table",
    "elliptic_solve",
    "evaluate_field",
    "evolve",
    "forcing_coefficients",
    "load_noise",
    "mild_second_moment",
    "mode_rates",
    "projection_identity",
    "sample_noise",
    "sample_seed",
    "save_noise",
    "slab_overlap",
    "time_discrete_evolve",
    "time_discrete_solution",
    "time_discrete_weight_table",
    "time_discretization_error",
    "time_discretization_profile",
]
