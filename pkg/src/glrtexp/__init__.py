"""Error exponents for generalized likelihood ratio tests.

Compute Chernoff indices (pairwise and composite-versus-composite),
non-separated error exponents via exponential tilting, fixed-design GLM
model-selection rates, and validate all of them by direct and
importance-sampled Monte Carlo.
"""

from . import chernoff, families, glm, integrate, mgf, nonsep, simulate
from .chernoff import (ChernoffResult, IndexConfig, RateGrid, contour_grid,
                       generalized_index, multi_family_rate, pairwise_index,
                       rate_function)
from .errors import (ConfigError, ConvergenceError, DivergenceError,
                     DomainError, FitError, GlrtExpError, NumericError,
                     ParameterError, RangeError)
from .families import (FamilyModel, ParamBox, Support, check_separation,
                       make_family)
from .glm import (CUMULANTS, GlmDesign, GlmTilt, gaussian_joint_rate,
                  gaussian_joint_tilt, glm_rate, glm_tilt,
                  glm_tilted_sampler, in_Bn, rho_tilde, rho_tilde_dlambda)
from .mgf import LogMgfSpec, log_mgf, log_mgf_deriv, pairwise_spec
from .nonsep import (EulerReport, NonsepConfig, TiltedMeasure, euler_check,
                     feasibility_b, rate_nonsep, solve_tilt, tilted_sampler)
from .simulate import (DecayCurve, ISEstimate, TestSpec, decay_curve,
                       direct_mc, glm_error_mc, glrt_statistic, is_mc,
                       max_error_probe)

__version__ = "0.1.0"
