"""Simulation and verification tools for arithmetic random waves on the 2-torus."""

from .errors import (
    ArwError,
    DegenerateSpectrum,
    InsufficientData,
    NotSumOfTwoSquares,
    ResolutionTooLow,
    SchemaMismatch,
    UnknownFrequency,
    UnresolvedCriticalCell,
)
from .lattice import (
    FrequencySet,
    LatticePoint,
    enumerate_frequencies,
    moment_sum,
    mu_hat_4,
    mu_hat_4_exact,
    spectral_correlations,
)
from .sampler import (
    CoefficientDraw,
    GridField,
    covariance_function,
    draw_coefficients,
    evaluate_on_grid,
    inject_coefficients,
)

__version__ = "0.1.0"
