"""Simulation and maximum-likelihood fitting of Hawkes processes with a
time-varying baseline and non-exponential excitation kernels, observed under
infill asymptotics."""
from .baseline import (BSplineBaseline, ConstantBaseline, REFERENCE_BASELINE, QuadraticExpBaseline,
                       baseline_bounds, baseline_derivs, baseline_integral_derivs, parse_baseline)
from .errors import (DataError, DomainError, EnvelopeViolation, ExplosionError, HawkesError,
                     IllConditionedError, InvalidParameterError, InvalidSpecError, NumericFailure, StudyFailure)
from .kernel import (KernelFamily, KernelParams, cdf, cdf_grad, density_derivs, parse_kernel, sup_after,
                     validate_kernel)
from .likelihood import (LikelihoodWorkspace, compensator, loglik, observed_information, rescaled_residuals,
                         score)
from .model import EventSequence, ModelSpec, reference_model, read_events
from .simulator import intensity_at, simulate_hawkes, simulate_stationary, stream_seed
from .estimator import FitOptions, FitResult, covariance_estimate, fit_mle, param_transform, param_untransform
from .ergodicity import (BlockPlan, FunctionalSpec, MCOptions, block_averages, ergodic_limit,
                         ergodicity_report, time_average)
from .study import StudyConfig, StudyReport, kolmogorov_sf, ks_normal_test, qq_points, run_study, write_report

__version__ = "0.1.0"

__all__ = [
    "BSplineBaseline", "ConstantBaseline", "REFERENCE_BASELINE", "QuadraticExpBaseline", "baseline_bounds",
    "baseline_derivs", "baseline_integral_derivs", "parse_baseline",
    "DataError", "DomainError", "EnvelopeViolation", "ExplosionError", "HawkesError", "IllConditionedError",
    "InvalidParameterError", "InvalidSpecError", "NumericFailure", "StudyFailure",
    "KernelFamily", "KernelParams", "cdf", "cdf_grad", "density_derivs", "parse_kernel", "sup_after",
    "validate_kernel",
    "LikelihoodWorkspace", "compensator", "loglik", "observed_information", "rescaled_residuals", "score",
    "EventSequence", "ModelSpec", "reference_model", "read_events",
    "intensity_at", "simulate_hawkes", "simulate_stationary", "stream_seed",
    "FitOptions", "FitResult", "covariance_estimate", "fit_mle", "param_transform", "param_untransform",
    "BlockPlan", "FunctionalSpec", "MCOptions", "block_averages", "ergodic_limit", "ergodicity_report",
    "time_average",
    "StudyConfig", "StudyReport", "kolmogorov_sf", "ks_normal_test", "qq_points", "run_study", "write_report",
]
