"""Streaming nonparametric regression with online bootstrap inference.

Functional SGD in a Mercer-kernel RKHS with Polyak averaging, a one-pass
multiplier-bootstrap ensemble, pointwise intervals and simultaneous bands,
a closed-form oracle for the leading bias and variance, and a Monte Carlo
harness for coverage studies.
"""
__version__ = "0.1.0"

from ._backend import BACKEND
from .bootstrap import (BootstrapEnsemble, MultiplierLaw, centered_deviations, draw_multiplier,
                        ensemble_ingest, perturbed_trajectory)
from .inference import (ConfidenceBand, ConfidenceInterval, empirical_quantile, normal_interval,
                        percentile_interval, pointwise_intervals, simultaneous_band)
from .mercer import (ConfigurationError, DomainError, MercerBasis, eigenfunction, eigenvalue,
                     kernel_eval, kernel_tail_bound, project_coefficients)
from .offline import KrrFit, krr_eval, krr_fit, residual_bootstrap_intervals, timing_bench
from .oracle import (TheoryContext, leading_bias, noise_variance, omega_weight, rate_prediction,
                     variation_vector)
from .schedules import Constant, Polynomial, Undersmoothed, effective_regularization, step_size
from .sgd import (DataError, SgdTrajectory, StateError, averaged_coefficients, eval_averaged,
                  eval_raw, perturbed_update, sgd_update)
from .simulate import (CoverageReport, ExperimentConfig, band_experiment, beta_density,
                       coverage_experiment, gen_stream, kolmogorov_distance, truth_eval)
from .streamio import emit_stream, parse_stream

MercerBasisSpec = MercerBasis

__all__ = [name for name in dir() if not name.startswith("_")]
