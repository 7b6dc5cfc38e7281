"""Dynamic generalized linear models fitted by Kullback-Leibler projection
onto conjugate families, with a Gaussian state layer and discount evolution."""

from ._jit import backend
from .errors import (ConfigurationError, DataError, DomainError, FilterError, ForecastError,
                     KDGLMError, NumericalError, SolverError)
from .families import (Bernoulli, ConjugateParams, LinearGaussian, Multinomial, Normal, Poisson,
                       conjugate_to_predictor, conjugate_update, get_family, log_predictive,
                       prior_to_conjugate)
from .filter import (FilterRecord, FilterTrajectory, InterventionSpec, ObservationSeries,
                     filter_series, filter_step, linear_bayes)
from .kl_oracle import (QuadratureGrid, kl_estimate, moments_by_quadrature,
                        oracle_prior_to_conjugate, projection_objective)
from .simkit import SimOutput, simulate
from .smoother import ForecastBundle, SmoothedTrajectory, forecast, smooth
from .special import digamma, inv_digamma, inv_digamma_minus_log, log_gamma, trigamma
from .state_space import (BlockSpec, GaussianMoments, StateModel, build_structure, discount_W,
                          evolve, harmonic, polynomial, predictor_prior, regression)

__version__ = "0.1.0"
