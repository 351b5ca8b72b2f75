"""Black-Scholes European put/call pricing with continuous dividend yield.

All functions accept scalars or numpy arrays for ``strike`` and ``vol`` and
broadcast elementwise. Strikes are plain currency amounts; moneyness handling
(strike / spot) lives in the callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class MarketEnv:
    """Shared Black-Scholes context: rates, dividend yield, expiry, spot.

    ``rate`` and ``div_yield`` are continuously compounded per year, ``expiry``
    is in years. ``spot`` defaults to 1 so strikes can be read as moneyness.
    """

    rate: float
    div_yield: float
    expiry: float
    spot: float = 1.0

    def __post_init__(self):
        if not self.expiry > 0:
            raise ValueError(f"expiry must be positive, got {self.expiry}")
        if not self.spot > 0:
            raise ValueError(f"spot must be positive, got {self.spot}")
        if not (math.isfinite(self.rate) and math.isfinite(self.div_yield)):
            raise ValueError("rate and div_yield must be finite")

    @property
    def discount(self) -> float:
        "e^{-rt}, the bond price for the expiry."
        return math.exp(-self.rate * self.expiry)

    @property
    def carry_discount(self) -> float:
        "e^{-qt}, the dividend carry factor."
        return math.exp(-self.div_yield * self.expiry)


@dataclass(frozen=True)
class OptionQuote:
    """One observed quote: moneyness (strike over spot) and implied vol."""

    moneyness: float
    vol: float

    def __post_init__(self):
        if not (math.isfinite(self.moneyness) and self.moneyness > 0):
            raise ValueError(f"moneyness must be positive, got {self.moneyness}")
        if not (math.isfinite(self.vol) and self.vol > 0):
            raise ValueError(f"vol must be positive, got {self.vol}")


def norm_phi(z):
    "Standard normal density."
    z = np.asarray(z, dtype=float)
    return _maybe_scalar(np.exp(-0.5 * z * z) / SQRT_2PI)


def norm_cdf(z):
    "Standard normal CDF, accurate to machine precision."
    return _maybe_scalar(ndtr(np.asarray(z, dtype=float)))


def _maybe_scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def _check_nonnegative(strike, vol):
    if np.any(strike < 0):
        raise ValueError("strike must be nonnegative")
    if np.any(vol < 0):
        raise ValueError("vol must be nonnegative")


def _d1_d2(env: MarketEnv, strike, vol):
    # Only meaningful where strike > 0 and vol > 0; callers mask the rest.
    sig_sqrt_t = vol * math.sqrt(env.expiry)
    d1 = (
        np.log(env.spot / strike)
        + (env.rate - env.div_yield + 0.5 * vol * vol) * env.expiry
    ) / sig_sqrt_t
    return d1, d1 - sig_sqrt_t


def put_price(env: MarketEnv, strike, vol):
    """European put under Black-Scholes.

    ``vol = 0`` falls back to the deterministic forward limit
    max(K e^{-rt} - S e^{-qt}, 0); ``strike = 0`` prices to zero.
    """
    strike = np.asarray(strike, dtype=float)
    vol = np.asarray(vol, dtype=float)
    _check_nonnegative(strike, vol)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1, d2 = _d1_d2(env, strike, vol)
        bs = strike * env.discount * ndtr(-d2) - env.spot * env.carry_discount * ndtr(-d1)
    intrinsic = np.maximum(strike * env.discount - env.spot * env.carry_discount, 0.0)
    out = np.where(strike == 0, 0.0, np.where(vol > 0, bs, intrinsic))
    return _maybe_scalar(out)


def call_price(env: MarketEnv, strike, vol):
    """European call under Black-Scholes, same edge handling as put_price."""
    strike = np.asarray(strike, dtype=float)
    vol = np.asarray(vol, dtype=float)
    _check_nonnegative(strike, vol)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1, d2 = _d1_d2(env, strike, vol)
        bs = env.spot * env.carry_discount * ndtr(d1) - strike * env.discount * ndtr(d2)
    intrinsic = np.maximum(env.spot * env.carry_discount - strike * env.discount, 0.0)
    out = np.where(strike == 0, env.spot * env.carry_discount, np.where(vol > 0, bs, intrinsic))
    return _maybe_scalar(out)


def put_strike_delta(env: MarketEnv, strike, vol):
    """Partial derivative of the put price in strike at fixed vol: e^{-rt} N(-d2).

    Lies in [0, e^{-rt}]; requires strike > 0 and vol > 0.
    """
    strike = np.asarray(strike, dtype=float)
    vol = np.asarray(vol, dtype=float)
    _check_nonnegative(strike, vol)
    d1, d2 = _d1_d2(env, strike, vol)
    return _maybe_scalar(env.discount * ndtr(-d2))


def vega(env: MarketEnv, strike, vol):
    """Price sensitivity to vol: S e^{-qt} sqrt(t) phi(d1). Same for put and call."""
    strike = np.asarray(strike, dtype=float)
    vol = np.asarray(vol, dtype=float)
    _check_nonnegative(strike, vol)
    d1, _ = _d1_d2(env, strike, vol)
    return _maybe_scalar(env.spot * env.carry_discount * math.sqrt(env.expiry) * norm_phi(d1))
