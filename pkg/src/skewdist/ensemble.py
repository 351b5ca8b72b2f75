"""Posterior ensembles of skews: the fuzzy smile and the averaged density.

Both operations consume a normalized PosteriorGrid. The fuzzy smile bins the
smile vol of every posterior cell into a strike-by-vol probability raster;
the averaged density mixes the per-cell implied densities with their
posterior weights.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .bayes import PosteriorGrid
from .implied import DensityCurve, _cdf_core, _pdf_core, _stencil_valid
from .pricing import MarketEnv

# Cells carrying this share of posterior mass participate in averaging and
# vol auto-ranging; the remainder contributes at most 0.1% error.
MASS_FRACTION = 0.999
MIN_VOL_BINS = 10
SKIPPED_MASS_WARN = 0.01


@dataclass(frozen=True, eq=False)
class FuzzyGrid:
    """Strike-by-vol probability raster.

    ``mass[i, j]`` is the posterior probability that the smile vol at
    ``x_axis[j]`` falls into vol bin i; every column is a probability
    distribution over the bins. ``clamped[j]`` reports the mass that fell
    outside ``vol_edges`` and was accumulated into the edge bins.
    """

    x_axis: np.ndarray
    vol_edges: np.ndarray
    mass: np.ndarray
    clamped: np.ndarray

    def __post_init__(self):
        n_bins = len(self.vol_edges) - 1
        if self.mass.shape != (n_bins, len(self.x_axis)):
            raise ValueError(
                f"mass shape {self.mass.shape} != (bins, columns) ({n_bins}, {len(self.x_axis)})"
            )
        if np.any(self.mass < 0):
            raise ValueError("mass must be nonnegative")
        sums = self.mass.sum(axis=0)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError("every fuzzy column must sum to 1")


@dataclass(frozen=True, eq=False)
class AveragedDensity:
    """Posterior-averaged implied distribution plus the per-point skipped mass.

    ``skipped_mass[j]`` is the posterior weight of cells whose smile was not
    usable (nonpositive vol on the differencing stencil) at ``curve.xs[j]``;
    their contribution is omitted, not renormalized away. ``selected_mass``
    is the total weight of the cells that participated at all (the top-mass
    subset), so 1 - selected_mass bounds the subsampling error.
    """

    curve: DensityCurve
    skipped_mass: np.ndarray
    selected_mass: float


def _top_mass_cells(grid: PosteriorGrid, fraction: float = MASS_FRACTION) -> np.ndarray:
    """Flat indices of the cells carrying the top ``fraction`` of mass.

    Cells are ranked by weight descending with index-ascending tie-break;
    the result is returned sorted ascending for deterministic accumulation.
    """
    w = grid.flat_weights()
    order = np.argsort(-w, kind="stable")
    cumulative = np.cumsum(w[order])
    count = min(int(np.searchsorted(cumulative, fraction)) + 1, len(w))
    return np.sort(order[:count])


def _check_x_axis(x_axis: np.ndarray) -> np.ndarray:
    x_axis = np.asarray(x_axis, dtype=float)
    if len(x_axis) == 0 or np.any(x_axis <= 0) or np.any(np.diff(x_axis) <= 0):
        raise ValueError("x_axis must be nonempty, positive and strictly increasing")
    return x_axis


def fuzzy_smile(
    grid: PosteriorGrid,
    x_axis: np.ndarray,
    vol_bins: int,
    vol_range: tuple[float, float] | None = None,
) -> FuzzyGrid:
    """Histogram the posterior's smile vols into a strike-by-vol raster.

    Every posterior cell contributes its full weight at every strike, so each
    column is the exact posterior distribution of the smile value there.
    Without ``vol_range`` the bins span the vols seen across the top-mass
    cell set, padded by 5%.
    """
    x_axis = _check_x_axis(x_axis)
    if vol_bins < MIN_VOL_BINS:
        raise ValueError(f"vol_bins must be >= {MIN_VOL_BINS}, got {vol_bins}")
    a, b, c = grid.cell_params()
    w = grid.flat_weights()
    t = x_axis - 1.0

    if vol_range is None:
        sel = _top_mass_cells(grid)
        a_sel, b_sel, c_sel = a[sel], b[sel], c[sel]
        lo = float("inf")
        hi = float("-inf")
        for tj in t:
            vols = a_sel + b_sel * tj + c_sel * (tj * tj)
            lo = min(lo, float(vols.min()))
            hi = max(hi, float(vols.max()))
        span = hi - lo
        if span <= 0.0:
            raise ValueError(
                "auto vol range is degenerate (all smile vols equal); pass vol_range"
            )
        lo -= 0.05 * span
        hi += 0.05 * span
    else:
        lo, hi = float(vol_range[0]), float(vol_range[1])
        if not lo < hi:
            raise ValueError(f"vol_range must satisfy lo < hi, got ({lo}, {hi})")

    edges = np.linspace(lo, hi, vol_bins + 1)
    width = (hi - lo) / vol_bins
    mass = np.empty((vol_bins, len(x_axis)))
    clamped = np.empty(len(x_axis))
    for j, tj in enumerate(t):
        vols = a + b * tj + c * (tj * tj)
        outside = (vols < lo) | (vols > hi)
        clamped[j] = float(np.sum(w[outside]))
        idx = np.clip(np.floor((vols - lo) / width).astype(int), 0, vol_bins - 1)
        mass[:, j] = np.bincount(idx, weights=w, minlength=vol_bins)
    return FuzzyGrid(x_axis=x_axis, vol_edges=edges, mass=mass, clamped=clamped)


def averaged_pdf(env: MarketEnv, grid: PosteriorGrid, x_axis: np.ndarray) -> AveragedDensity:
    """Posterior-weighted mixture of the per-cell implied densities.

    Cells are accumulated one at a time in ascending cell-index order, so the
    output is bit-reproducible. Where a cell's smile vol is unusable its
    weight goes to ``skipped_mass`` instead of the mixture (reported, never
    renormalized). The companion CDF is averaged the same way.
    """
    x_axis = _check_x_axis(x_axis)
    a, b, c = grid.cell_params()
    w = grid.flat_weights()
    selected = _top_mass_cells(grid)

    pdf = np.zeros(len(x_axis))
    cdf = np.zeros(len(x_axis))
    skipped = np.zeros(len(x_axis))
    contributed = np.zeros(len(x_axis))
    for idx in selected:
        ai, bi, ci, wi = float(a[idx]), float(b[idx]), float(c[idx]), float(w[idx])
        ok = _stencil_valid(ai, bi, ci, x_axis)
        if np.all(ok):
            pdf += wi * _pdf_core(env, ai, bi, ci, x_axis)
            cdf += wi * _cdf_core(env, ai, bi, ci, x_axis)
            contributed += wi
        else:
            xs_ok = x_axis[ok]
            if len(xs_ok):
                pdf[ok] += wi * _pdf_core(env, ai, bi, ci, xs_ok)
                cdf[ok] += wi * _cdf_core(env, ai, bi, ci, xs_ok)
                contributed[ok] += wi
            skipped[~ok] += wi

    worst = float(np.max(skipped)) if len(skipped) else 0.0
    if worst > SKIPPED_MASS_WARN:
        warnings.warn(
            f"up to {worst:.1%} of posterior mass was skipped as implausible at some "
            "strikes; the averaged density is not renormalized",
            UserWarning,
            stacklevel=2,
        )
    curve = DensityCurve(xs=x_axis, pdf=pdf, cdf=cdf, valid=contributed > 0)
    return AveragedDensity(
        curve=curve,
        skipped_mass=skipped,
        selected_mass=float(np.sum(w[selected])),
    )
