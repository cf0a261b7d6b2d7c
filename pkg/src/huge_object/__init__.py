"""Distribution testing in the Huge Object model.

Distributions over ``{0,1}^n`` with exact rational arithmetic, detailings
and their index, earth mover distances, the sampling-and-query estimators,
the canonical tester predictor and the tolerant tester built on top of them.
"""

from .core_dist import (
    Distribution,
    QuantizedDistribution,
    adjust,
    join,
    marginal,
    parse_builtin,
    point_mass,
    product_bernoulli,
    project,
    quantize,
    restrict,
    tv_distance,
    two_point,
    uniform,
    uniform_bits,
)
from .detailing import (
    Detailing,
    find_weakly_robust_exact,
    index,
    is_eps_independent,
    is_good,
    is_weakly_robust,
    refine_by_variables,
    refined_index,
    type_distribution,
    variable_detailing,
    weight_distribution,
)
from .emd import emd, emd_value, emd_weighted_types, hamming, kronecker, weighted_l1
from .errors import *  # noqa: F401,F403
from .estimators import (
    EstimatorConfig,
    Verdict,
    estimate_index,
    estimate_parameters,
    find_weakly_robust_detailing,
    test_weakly_robust_detailing,
)
from .oracle import CanonicalTester, HugeObjectOracle, acceptance_probability_exact, rows_constant, rows_equal
from .predictor import accept_probability, simulate, simulated_distribution_exact
from .tolerant import (
    PropertySpec,
    TolerantConfig,
    change_types,
    change_types_exact,
    constant_support_property,
    estimate_distance,
    point_mass_property,
    tolerant_tester,
)
from .typedist import Implementation, TransferImplementation, TypeDistribution

__version__ = "0.1.0"
