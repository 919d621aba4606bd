"""Expected improvement, log-transformed-objective EI and a small BO loop."""

from .acquisition import (
    AcquisitionSpec,
    AcquisitionValue,
    Incumbent,
    PosteriorGaussian,
    Variant,
    ei_closed,
    incumbent_from,
    log_of_ei_stable,
    log_transformed_ei_closed,
    standardize,
)
from .bo import BOConfig, SearchSpace, TrialRecord, run, suggest
from .errors import AcquisitionOverflowError, DomainError, LogEIBOError, NumericError, ShapeError
from .gp import (
    Dataset,
    GPHyperparams,
    GPModel,
    Observation,
    fit,
    kernel_matern52,
    log_marginal_likelihood,
    predict,
    tune_hyperparams,
)
from .oracle import (
    QuadratureConfig,
    ei_integral_mc,
    ei_integral_quadrature,
    log_ei_integral_quadrature,
)
from .special import log_normal_cdf, normal_cdf, normal_pdf

__version__ = "0.1.0"
