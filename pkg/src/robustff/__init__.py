"""Model-robustness evaluation and search for two-level fractional factorial designs."""

from .criteria import (
    CriterionSpec,
    check_proposition_orderings,
    closed_form_s2,
    coefficients_s31,
    coefficients_sf0,
    coefficients_sFg,
    d_fg,
    gma_compare,
    information_matrix,
    s2_oracle,
    ss_offdiagonal,
)
from .design import Design, Encoding, bs_spectrum, indicator_ratio, j_vector, parse_design, transform
from .f2 import affine_dimension, is_affinely_full_dimensional
from .models import ModelPair, Scenario, ScenarioCounts, enumerate_models, is_hierarchically_consistent
from .reference import hadamard_designs, optimal_12x5
from .search import SearchConfig, canonicalize, exchange_search, exhaustive_search

__version__ = "0.1.0"
