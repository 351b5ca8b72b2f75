"""Market-implied probability distributions from volatility skews.

Converts a quadratic volatility skew into the probability distribution the
market is pricing in (via strike-derivatives of put prices), and estimates
that skew from sparse quotes with a grid Bayesian posterior, fuzzy-smile
rasters, and posterior-averaged densities.
"""

from .bayes import (
    PosteriorGrid,
    QuoteSet,
    RankDeficiencyError,
    build_posterior,
    default_bounds,
    least_squares_fit,
    log_marginal_likelihood,
    marginal_1d,
    marginal_2d,
)
from .ensemble import AveragedDensity, FuzzyGrid, averaged_pdf, fuzzy_smile
from .implied import (
    DensityCurve,
    InvalidVolError,
    density_curve,
    distribution_moments,
    expected_payoff,
    implied_cdf,
    implied_pdf,
    moment_domain,
    smile_put_price,
)
from .pricing import (
    MarketEnv,
    OptionQuote,
    call_price,
    norm_cdf,
    put_price,
    put_strike_delta,
    vega,
)
from .skewmodel import (
    SkewParams,
    Violation,
    plausibility_check,
    vol_at,
    vol_curvature,
    vol_slope,
)

__version__ = "0.1.0"

__all__ = [
    "AveragedDensity",
    "DensityCurve",
    "FuzzyGrid",
    "InvalidVolError",
    "MarketEnv",
    "OptionQuote",
    "PosteriorGrid",
    "QuoteSet",
    "RankDeficiencyError",
    "SkewParams",
    "Violation",
    "averaged_pdf",
    "build_posterior",
    "call_price",
    "default_bounds",
    "density_curve",
    "distribution_moments",
    "expected_payoff",
    "fuzzy_smile",
    "implied_cdf",
    "implied_pdf",
    "least_squares_fit",
    "log_marginal_likelihood",
    "marginal_1d",
    "marginal_2d",
    "moment_domain",
    "norm_cdf",
    "plausibility_check",
    "put_price",
    "put_strike_delta",
    "smile_put_price",
    "vega",
    "vol_at",
    "vol_curvature",
    "vol_slope",
    "__version__",
]
