"""Computer-model calibration with Matérn kernels: interpolation, penalized least squares, MCMC and rate studies."""
from .errors import (
    CalibrationError,
    ConditioningError,
    ConfigError,
    DataError,
    InputError,
    KocalError,
    SimulatorError,
    SlopeFitError,
    TheoryDomainError,
)
from .kernel import Design, GramMatrix, MaternKernel, cross_cov, gram, matern, spectral_bounds, spectral_density
from .native import (
    Interpolant,
    NativeElement,
    fill_distance,
    inner_product,
    interpolate,
    native_norm_sq,
    power_function,
)
from .regress import CalibrationFit, CalibrationProblem, calibrate, predict, profile_objective, smoothing_schedule

__version__ = "0.1.0"

__all__ = [
    "CalibrationError",
    "ConditioningError",
    "ConfigError",
    "DataError",
    "InputError",
    "KocalError",
    "SimulatorError",
    "SlopeFitError",
    "TheoryDomainError",
    "Design",
    "GramMatrix",
    "MaternKernel",
    "cross_cov",
    "gram",
    "matern",
    "spectral_bounds",
    "spectral_density",
    "Interpolant",
    "NativeElement",
    "fill_distance",
    "inner_product",
    "interpolate",
    "native_norm_sq",
    "power_function",
    "CalibrationFit",
    "CalibrationProblem",
    "calibrate",
    "predict",
    "profile_objective",
    "smoothing_schedule",
]
