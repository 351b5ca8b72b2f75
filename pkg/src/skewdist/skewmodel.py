"""Quadratic volatility skew: evaluation, derivatives, and plausibility.

The smile is sigma(x) = a + b (x - 1) + c (x - 1)^2 with x = strike / spot.
``a`` is the at-the-money vol, ``b`` the at-the-money slope, and ``c`` half
the (constant) second derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pricing import MarketEnv, put_strike_delta, vega


@dataclass(frozen=True)
class SkewParams:
    """Coefficients of the quadratic smile."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b) and math.isfinite(self.c)):
            raise ValueError("skew parameters must be finite")
        if not self.a > 0:
            raise ValueError(f"at-the-money vol a must be positive, got {self.a}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.a, self.b, self.c)


@dataclass(frozen=True)
class Violation:
    """One sampled moneyness point where the skew fails a sanity requirement.

    ``kind`` is "nonpositive_vol" (the smile dips to sigma <= 0) or
    "decreasing_put" (the smile-consistent put price falls as strike rises,
    i.e. the implied CDF would be negative).
    """

    x: float
    kind: str


def vol_at(skew: SkewParams, x):
    """Smile vol at moneyness x. May be <= 0 for extreme parameters; callers
    that need a usable vol must check (see plausibility_check)."""
    t = np.asarray(x, dtype=float) - 1.0
    out = skew.a + skew.b * t + skew.c * t * t
    return float(out) if np.ndim(out) == 0 else out


def vol_slope(skew: SkewParams, x):
    "First derivative of the smile in moneyness: b + 2c (x - 1)."
    t = np.asarray(x, dtype=float) - 1.0
    out = skew.b + 2.0 * skew.c * t
    return float(out) if np.ndim(out) == 0 else out


def vol_curvature(skew: SkewParams) -> float:
    "Second derivative of the smile in moneyness: 2c, constant."
    return 2.0 * skew.c


def _smile_put_slope(env: MarketEnv, skew: SkewParams, x):
    """Total derivative of the smile-consistent put price in strike.

    dP/dE = dP/dE|_sigma + vega * dsigma/dE, with dsigma/dE = sigma'(x)/spot.
    Only valid where vol_at(skew, x) > 0.
    """
    x = np.asarray(x, dtype=float)
    strike = x * env.spot
    sigma = vol_at(skew, x)
    return put_strike_delta(env, strike, sigma) + vega(env, strike, sigma) * vol_slope(
        skew, x
    ) / env.spot


def plausibility_check(
    env: MarketEnv,
    skew: SkewParams,
    x_range: tuple[float, float] = (0.5, 1.5),
    n_samples: int = 101,
) -> list[Violation]:
    """Scan a moneyness interval for signs the skew is not a sensible model.

    Samples ``n_samples`` uniform points and reports every point where the
    smile vol is nonpositive or where the put price would decrease with
    strike. An empty list means the skew is plausible on the sample.
    """
    lo, hi = float(x_range[0]), float(x_range[1])
    if not (0.0 < lo < hi) or not math.isfinite(hi):
        raise ValueError(f"x_range must satisfy 0 < lo < hi, got ({lo}, {hi})")
    if n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {n_samples}")

    xs = np.linspace(lo, hi, n_samples)
    vols = vol_at(skew, xs)
    bad_vol = vols <= 0.0

    violations = [Violation(float(x), "nonpositive_vol") for x in xs[bad_vol]]
    ok = ~bad_vol
    if np.any(ok):
        slope = _smile_put_slope(env, skew, xs[ok])
        for x, s in zip(xs[ok], np.atleast_1d(slope)):
            if s < 0.0:
                violations.append(Violation(float(x), "decreasing_put"))
    violations.sort(key=lambda v: v.x)
    return violations
