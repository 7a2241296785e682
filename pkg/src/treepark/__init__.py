"""Parking on trees: exact laws of root arrivals, certified bounds on the critical density."""

__version__ = "0.1.0"

from .bounds import (  # noqa: E402
    BoundCertificate,
    Refusal,
    certify_upper,
    lower_bound_count,
    search_upper,
    upper_bound_percolation,
)
from .dist import ArrivalLaw, IntDist, bernoulli2, parse_arrival, pmf_law, threes  # noqa: E402
from .numerics import FixedDec  # noqa: E402
from .recursion import ModelConfig, iterate, run  # noqa: E402

__all__ = [
    "ArrivalLaw", "BoundCertificate", "FixedDec", "IntDist", "ModelConfig", "Refusal",
    "bernoulli2", "certify_upper", "iterate", "lower_bound_count", "parse_arrival",
    "pmf_law", "run", "search_upper", "threes", "upper_bound_percolation",
]
