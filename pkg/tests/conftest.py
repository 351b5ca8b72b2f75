import numpy as np
import pytest

from skewdist import MarketEnv, QuoteSet, SkewParams, plausibility_check

# The worked-example market used throughout: 10% rate, 2% dividend yield,
# one year to expiry, spot normalized to 1.
ENV = MarketEnv(rate=0.10, div_yield=0.02, expiry=1.0)

# Fixed-seed synthetic quote set: 15 quotes from the true skew below with
# Gaussian noise, sd 0.005. tests/data/noisy_quotes.csv holds the same set.
TRUE_SKEW = SkewParams(0.3, -0.2, 0.5)
FIXTURE_SEED = 42
FIXTURE_X = (0.7, 1.3)
FIXTURE_N = 15
FIXTURE_NOISE_SD = 0.005


def make_noisy_quotes(seed: int = FIXTURE_SEED, n: int = FIXTURE_N) -> QuoteSet:
    rng = np.random.default_rng(seed)
    xs = np.linspace(FIXTURE_X[0], FIXTURE_X[1], n)
    t = xs - 1.0
    vols = TRUE_SKEW.a + TRUE_SKEW.b * t + TRUE_SKEW.c * t * t
    vols = vols + rng.normal(0.0, FIXTURE_NOISE_SD, n)
    return QuoteSet.from_pairs(zip(xs, vols))


@pytest.fixture(scope="session")
def env() -> MarketEnv:
    return ENV


@pytest.fixture(scope="session")
def noisy_quotes() -> QuoteSet:
    return make_noisy_quotes()


def random_plausible_skews(count: int, seed: int, x_range=(0.5, 1.5)):
    """Seeded draws from a moderate parameter box, filtered for plausibility."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        skew = SkewParams(
            rng.uniform(0.1, 0.5), rng.uniform(-0.6, 0.6), rng.uniform(0.0, 1.0)
        )
        if not plausibility_check(ENV, skew, x_range, 81):
            out.append(skew)
    return out
