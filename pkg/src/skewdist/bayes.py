"""Grid posterior over quadratic skew parameters from sparse vol quotes.

The model is linear in (a, b, c), so the best fit is a plain regression.
The likelihood of a parameter triple is Gaussian with an unknown common
noise scale integrated out under a log-uniform scale prior, which collapses
to SSR^{-n/2}; the parameter prior is uniform over a bounded box. The
posterior is evaluated on a dense rectangular grid in log-space and
normalized by direct summation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .pricing import OptionQuote
from .skewmodel import SkewParams

PARAM_NAMES = ("a", "b", "c")

DEFAULT_RESOLUTION = (41, 41, 41)
MIN_RESOLUTION = 11
# Half-width of the default prior box, in classical standard errors of the
# regression. Six sigma leaves negligible mass on the faces for any sane fit.
PRIOR_BOX_SIGMAS = 6.0
# Absolute floor on the half-width so exact-fit data still yields a proper box.
PRIOR_BOX_MIN_HALFWIDTH = 1e-8
BOUNDARY_MASS_WARN = 0.01


class RankDeficiencyError(ValueError):
    """Fewer than three distinct moneyness values: the quadratic is not identified."""


@dataclass(frozen=True)
class QuoteSet:
    """Observed (moneyness, vol) quotes to be fitted."""

    quotes: tuple[OptionQuote, ...]

    def __post_init__(self):
        if len(self.quotes) == 0:
            raise ValueError("QuoteSet must contain at least one quote")

    @classmethod
    def from_pairs(cls, pairs) -> "QuoteSet":
        return cls(tuple(OptionQuote(float(x), float(v)) for x, v in pairs))

    def __len__(self) -> int:
        return len(self.quotes)

    @property
    def moneyness(self) -> np.ndarray:
        return np.array([q.moneyness for q in self.quotes])

    @property
    def vols(self) -> np.ndarray:
        return np.array([q.vol for q in self.quotes])

    def n_distinct_moneyness(self) -> int:
        return len({q.moneyness for q in self.quotes})

    def canonical(self) -> "QuoteSet":
        """Quotes sorted by (moneyness, vol).

        All posterior arithmetic runs on the canonical order, which makes the
        grids bit-identical under any permutation of the input quotes.
        """
        return QuoteSet(tuple(sorted(self.quotes, key=lambda q: (q.moneyness, q.vol))))


@dataclass(frozen=True, eq=False)
class PosteriorGrid:
    """Discretized posterior over (a, b, c): uniform axes and normalized weights.

    ``log_norm`` is the log of the pre-normalization sum of likelihood values
    (infinite when the grid contains an exact fit).
    """

    a_axis: np.ndarray
    b_axis: np.ndarray
    c_axis: np.ndarray
    weights: np.ndarray
    log_norm: float

    def __post_init__(self):
        shape = (len(self.a_axis), len(self.b_axis), len(self.c_axis))
        if self.weights.shape != shape:
            raise ValueError(f"weights shape {self.weights.shape} != axes {shape}")
        for name, ax in zip(PARAM_NAMES, (self.a_axis, self.b_axis, self.c_axis)):
            steps = np.diff(ax)
            if np.any(steps <= 0):
                raise ValueError(f"{name}_axis must be strictly increasing")
            if np.max(steps) - np.min(steps) > 1e-9 * np.max(steps):
                raise ValueError(f"{name}_axis must be uniformly spaced")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        total = float(np.sum(self.weights))
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {total!r}")

    def axis(self, name: str) -> np.ndarray:
        return (self.a_axis, self.b_axis, self.c_axis)[_axis_index(name)]

    def cell_params(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(a, b, c) of every cell, flattened in C order (the cell index order)."""
        A, B, C = np.meshgrid(self.a_axis, self.b_axis, self.c_axis, indexing="ij")
        return A.ravel(), B.ravel(), C.ravel()

    def flat_weights(self) -> np.ndarray:
        return self.weights.ravel()

    def mode_params(self) -> tuple[float, float, float]:
        i, j, k = np.unravel_index(int(np.argmax(self.weights)), self.weights.shape)
        return float(self.a_axis[i]), float(self.b_axis[j]), float(self.c_axis[k])


def _axis_index(name: str) -> int:
    try:
        return PARAM_NAMES.index(name)
    except ValueError:
        raise ValueError(f"unknown parameter {name!r}, expected one of {PARAM_NAMES}") from None


def _design_matrix(xs: np.ndarray) -> np.ndarray:
    t = xs - 1.0
    return np.column_stack([np.ones_like(t), t, t * t])


def _require_identifiable(quotes: QuoteSet, n_min: int):
    if len(quotes) < n_min:
        raise ValueError(f"need at least {n_min} quotes, got {len(quotes)}")
    if quotes.n_distinct_moneyness() < 3:
        raise RankDeficiencyError(
            f"need at least 3 distinct moneyness values, got {quotes.n_distinct_moneyness()}"
        )


def least_squares_fit(quotes: QuoteSet) -> SkewParams:
    """Ordinary least squares for the quadratic smile coefficients.

    Solved through an SVD (numpy.linalg.lstsq), never through the raw normal
    equations.
    """
    _require_identifiable(quotes, n_min=3)
    q = quotes.canonical()
    phi = _design_matrix(q.moneyness)
    coef, _, rank, _ = np.linalg.lstsq(phi, q.vols, rcond=None)
    if rank < 3:
        raise RankDeficiencyError("design matrix is rank deficient")
    return SkewParams(float(coef[0]), float(coef[1]), float(coef[2]))


def _fit_standard_errors(quotes: QuoteSet, fit: SkewParams) -> np.ndarray:
    """Classical per-parameter standard errors with the SSR/(n-3) scale estimate."""
    q = quotes.canonical()
    phi = _design_matrix(q.moneyness)
    resid = q.vols - phi @ np.array(fit.as_tuple())
    ssr = float(resid @ resid)
    dof = len(q) - 3
    s2 = ssr / dof if dof > 0 else 0.0
    _, sing, vt = np.linalg.svd(phi, full_matrices=False)
    # (Phi^T Phi)^{-1} = V diag(1/s^2) V^T from the same SVD used for fitting
    xtx_inv = (vt.T / (sing * sing)) @ vt
    return np.sqrt(s2 * np.diag(xtx_inv))


def _sum_squared_residuals(quotes: QuoteSet, a, b, c):
    """SSR of the quadratic model, accumulated in canonical quote order.

    ``a``, ``b``, ``c`` may be scalars or broadcastable arrays (grid axes).
    """
    q = quotes.canonical()
    ssr = 0.0
    for quote in q.quotes:
        t = quote.moneyness - 1.0
        resid = quote.vol - (a + b * t + c * (t * t))
        ssr = ssr + resid * resid
    return ssr


def log_marginal_likelihood(quotes: QuoteSet, skew: SkewParams) -> float:
    """Unnormalized log-likelihood with the Gaussian noise scale integrated out.

    Equals -(n/2) ln SSR up to an additive constant in n. Returns +inf for an
    exact fit (SSR = 0); build_posterior treats that as the degenerate limit.
    """
    _require_identifiable(quotes, n_min=4)
    ssr = _sum_squared_residuals(quotes, skew.a, skew.b, skew.c)
    if ssr == 0.0:
        return math.inf
    return -0.5 * len(quotes) * math.log(ssr)


def default_bounds(quotes: QuoteSet) -> tuple[tuple[float, float], ...]:
    """Prior box centered on the least-squares fit, +- 6 standard errors.

    A small absolute floor keeps the box proper when the data fit exactly.
    """
    fit = least_squares_fit(quotes)
    half = PRIOR_BOX_SIGMAS * _fit_standard_errors(quotes, fit)
    half = np.maximum(half, PRIOR_BOX_MIN_HALFWIDTH)
    center = np.array(fit.as_tuple())
    return tuple((float(lo), float(hi)) for lo, hi in zip(center - half, center + half))


def build_posterior(
    quotes: QuoteSet,
    bounds: tuple[tuple[float, float], ...] | None = None,
    resolution: tuple[int, int, int] = DEFAULT_RESOLUTION,
) -> PosteriorGrid:
    """Evaluate the posterior on a rectangular (a, b, c) grid.

    Uniform prior over the box; weights proportional to SSR^{-n/2},
    exponentiated after subtracting the maximum log-likelihood and normalized
    by a single axis-major sum. If some cells fit the data exactly the
    posterior mass is split uniformly over the minimal-SSR cell set.
    """
    _require_identifiable(quotes, n_min=4)
    if any(r < MIN_RESOLUTION for r in resolution):
        raise ValueError(f"resolution must be >= {MIN_RESOLUTION} per axis, got {resolution}")
    fit = least_squares_fit(quotes)
    if bounds is None:
        bounds = default_bounds(quotes)
    for name, (lo, hi), center in zip(PARAM_NAMES, bounds, fit.as_tuple()):
        if not (lo < hi):
            raise ValueError(f"empty bounds for {name}: ({lo}, {hi})")
        if not (lo <= center <= hi):
            raise ValueError(
                f"bounds for {name} ({lo}, {hi}) do not contain the least-squares fit {center}"
            )

    a_axis = np.linspace(bounds[0][0], bounds[0][1], resolution[0])
    b_axis = np.linspace(bounds[1][0], bounds[1][1], resolution[1])
    c_axis = np.linspace(bounds[2][0], bounds[2][1], resolution[2])

    ssr = _sum_squared_residuals(
        quotes,
        a_axis[:, None, None],
        b_axis[None, :, None],
        c_axis[None, None, :],
    )

    exact = ssr == 0.0
    if np.any(exact):
        weights = exact / np.sum(exact)
        log_norm = math.inf
    else:
        log_like = -0.5 * len(quotes) * np.log(ssr)
        peak = float(np.max(log_like))
        raw = np.exp(log_like - peak)
        total = float(np.sum(raw))
        weights = raw / total
        log_norm = peak + math.log(total)

    boundary_mass = 1.0 - float(np.sum(weights[1:-1, 1:-1, 1:-1]))
    if boundary_mass > BOUNDARY_MASS_WARN:
        warnings.warn(
            f"{boundary_mass:.1%} of posterior mass sits on the prior box boundary; "
            "widen the bounds",
            UserWarning,
            stacklevel=2,
        )
    return PosteriorGrid(a_axis, b_axis, c_axis, weights, log_norm)


def marginal_1d(grid: PosteriorGrid, keep: str) -> np.ndarray:
    """Posterior marginal over one parameter (the other two integrated out)."""
    idx = _axis_index(keep)
    drop = tuple(d for d in range(3) if d != idx)
    return grid.weights.sum(axis=drop)


def marginal_2d(grid: PosteriorGrid, keep: tuple[str, str]) -> np.ndarray:
    """Posterior marginal over an ordered pair of parameters.

    Returns a table indexed [keep[0], keep[1]]; the dropped axis is summed out.
    """
    i = _axis_index(keep[0])
    j = _axis_index(keep[1])
    if i == j:
        raise ValueError(f"keep must name two distinct parameters, got {keep}")
    drop = 3 - i - j
    table = grid.weights.sum(axis=drop)
    return table if i < j else table.T
