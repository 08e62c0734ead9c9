"""Secrecy rate regions and random-coding simulations for physically
degraded broadcast channels observed by a wiretapper."""

from .channel_model import DegradedBcSpec, DiscreteChannel, bsc, marginal_channel, validate
from .errors import (
    BudgetExceeded,
    DocumentError,
    InconsistencyError,
    InvalidDistribution,
    LabelError,
    SecrecyError,
    ValidationError,
)
from .probkit import (
    Distribution,
    conditional_mutual_information,
    entropy,
    marginal,
    mutual_information,
)
from .region import (
    ChainDistribution,
    OptimizerOptions,
    check_code_rates,
    maximize_weighted_sum,
    randomization_rates,
    rate_tuple,
    trace_boundary,
)
from .wiretap_sim import CodeParams, decode_ml, decode_typical, encode, estimate_error_prob, generate_codebooks, transmit
from .equivocation import exact_equivocation, leakage_report, mc_equivocation, wiretapper_subcode_error

__version__ = "0.1.0"
