import math

import numpy as np
import pytest

from skewdist import (
    FuzzyGrid,
    PosteriorGrid,
    SkewParams,
    averaged_pdf,
    build_posterior,
    density_curve,
    fuzzy_smile,
    implied_pdf,
    vol_at,
)

from conftest import ENV


def delta_grid(resolution=11, weight_at="center"):
    """Posterior concentrated on a single cell; middle cell is exactly
    (0.25, 0.0, 0.5) thanks to bit-friendly bounds."""
    mid = resolution // 2
    a_axis = np.linspace(0.125, 0.375, resolution)
    b_axis = np.linspace(-0.1, 0.1, resolution)
    c_axis = np.linspace(0.375, 0.625, resolution)
    w = np.zeros((resolution,) * 3)
    idx = (mid, mid, mid) if weight_at == "center" else weight_at
    w[idx] = 1.0
    return PosteriorGrid(a_axis, b_axis, c_axis, w, 0.0)


def two_cell_grid(delta=0.02):
    """Equal mass on two flat skews (a - delta, 0, 0) and (a + delta, 0, 0)."""
    a_axis = np.linspace(0.25 - 5 * delta, 0.25 + 5 * delta, 11)
    b_axis = np.linspace(-0.1, 0.1, 11)
    c_axis = np.linspace(-0.1, 0.1, 11)
    w = np.zeros((11, 11, 11))
    i_lo = int(np.argmin(np.abs(a_axis - (0.25 - delta))))
    i_hi = int(np.argmin(np.abs(a_axis - (0.25 + delta))))
    w[i_lo, 5, 5] = 0.5
    w[i_hi, 5, 5] = 0.5
    return PosteriorGrid(a_axis, b_axis, c_axis, w, 0.0)


def column_entropy(mass):
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(mass > 0, mass * np.log(mass), 0.0)
    return -np.sum(terms, axis=0)


class TestFuzzySmile:
    def test_delta_posterior_traces_single_skew(self):
        grid = delta_grid()
        skew = SkewParams(0.25, 0.0, 0.5)
        x_axis = np.linspace(0.6, 1.4, 33)
        fz = fuzzy_smile(grid, x_axis, vol_bins=40)
        for j, x in enumerate(x_axis):
            col = fz.mass[:, j]
            hot = np.nonzero(col)[0]
            assert len(hot) == 1
            assert col[hot[0]] == pytest.approx(1.0, abs=1e-12)
            v = vol_at(skew, float(x))
            assert fz.vol_edges[hot[0]] <= v <= fz.vol_edges[hot[0] + 1]

    def test_symmetric_two_cell_posterior(self):
        fz = fuzzy_smile(
            two_cell_grid(), np.linspace(0.7, 1.3, 13), vol_bins=20, vol_range=(0.2, 0.3)
        )
        for j in range(fz.mass.shape[1]):
            hot = np.nonzero(fz.mass[:, j])[0]
            assert len(hot) == 2
            assert fz.mass[hot[0], j] == 0.5 and fz.mass[hot[1], j] == 0.5

    def test_columns_sum_to_one_on_fixture(self, noisy_quotes):
        grid = build_posterior(noisy_quotes)
        fz = fuzzy_smile(grid, np.linspace(0.5, 1.5, 101), vol_bins=101)
        assert np.max(np.abs(fz.mass.sum(axis=0) - 1.0)) <= 1e-9

    def test_entropy_minimal_inside_quoted_range(self, noisy_quotes):
        # quotes live on [0.7, 1.3]; uncertainty (column entropy) should dip
        # inside that range and grow toward the extrapolated edges
        grid = build_posterior(noisy_quotes)
        x_axis = np.linspace(0.5, 1.5, 101)
        fz = fuzzy_smile(grid, x_axis, vol_bins=101)
        ent = column_entropy(fz.mass)
        x_min_ent = float(x_axis[int(np.argmin(ent))])
        assert 0.7 <= x_min_ent <= 1.3
        assert ent[0] > np.min(ent) and ent[-1] > np.min(ent)

    def test_out_of_range_vols_clamped_and_reported(self):
        grid = delta_grid()
        x_axis = np.linspace(0.6, 1.4, 9)
        fz = fuzzy_smile(grid, x_axis, vol_bins=10, vol_range=(0.26, 0.28))
        # vol at the wings exceeds 0.28: clamped into edge bins, reported
        assert np.any(fz.clamped > 0)
        assert np.max(np.abs(fz.mass.sum(axis=0) - 1.0)) <= 1e-9

    def test_degenerate_auto_range_rejected(self):
        grid = delta_grid(weight_at=(5, 5, 5))
        # make the single cell a flat skew: c axis must hit exactly zero
        flat = PosteriorGrid(
            grid.a_axis, grid.b_axis, np.linspace(-0.1, 0.1, 11), grid.weights, 0.0
        )
        with pytest.raises(ValueError, match="degenerate"):
            fuzzy_smile(flat, np.linspace(0.8, 1.2, 5), vol_bins=10)

    def test_vol_bins_floor(self):
        with pytest.raises(ValueError):
            fuzzy_smile(delta_grid(), np.linspace(0.8, 1.2, 5), vol_bins=9)

    def test_column_normalization_enforced_by_type(self):
        x_axis = np.linspace(0.9, 1.1, 3)
        edges = np.linspace(0.1, 0.5, 5)
        bad = np.full((4, 3), 0.2)
        with pytest.raises(ValueError, match="sum to 1"):
            FuzzyGrid(x_axis, edges, bad, np.zeros(3))


class TestAveragedPdf:
    def test_delta_posterior_equals_density_curve_exactly(self):
        grid = delta_grid()
        skew = SkewParams(0.25, 0.0, 0.5)
        xs = np.linspace(0.5, 1.5, 201)
        avg = averaged_pdf(ENV, grid, xs)
        single = density_curve(ENV, skew, 0.5, 1.5, 201)
        assert np.array_equal(avg.curve.xs, single.xs)
        assert np.array_equal(avg.curve.pdf, single.pdf)
        assert np.array_equal(avg.curve.cdf, single.cdf)
        assert np.array_equal(avg.curve.valid, single.valid)
        assert np.all(avg.skipped_mass == 0.0)

    def test_refinement_invariance_in_delta_limit(self):
        xs = np.linspace(0.6, 1.4, 101)
        coarse = averaged_pdf(ENV, delta_grid(11), xs)
        fine = averaged_pdf(ENV, delta_grid(21, weight_at=(10, 10, 10)), xs)
        assert np.array_equal(coarse.curve.pdf, fine.curve.pdf)
        assert np.array_equal(coarse.curve.cdf, fine.curve.cdf)

    def test_convex_combination_bounds(self):
        grid = two_cell_grid()
        xs = np.linspace(0.6, 1.4, 81)
        avg = averaged_pdf(ENV, grid, xs)
        lo_pdf = implied_pdf(ENV, SkewParams(0.23, 0.0, 0.0), xs)
        hi_pdf = implied_pdf(ENV, SkewParams(0.27, 0.0, 0.0), xs)
        lower = np.minimum(lo_pdf, hi_pdf)
        upper = np.maximum(lo_pdf, hi_pdf)
        assert np.all(avg.curve.pdf >= lower - 1e-15)
        assert np.all(avg.curve.pdf <= upper + 1e-15)

    def test_mixture_mass_stays_normalized(self):
        grid = two_cell_grid()
        xs = np.linspace(0.05, 10.0, 2000)
        avg = averaged_pdf(ENV, grid, xs)
        mass = float(np.sum(0.5 * (avg.curve.pdf[1:] + avg.curve.pdf[:-1]) * np.diff(xs)))
        assert mass == pytest.approx(1.0, abs=2e-3)

    def test_skipped_mass_reported_and_warned(self):
        # one of two cells has nonpositive vol on the left part of the axis
        a_axis = np.linspace(0.05, 0.55, 11)  # [2] = 0.15, [5] = 0.3
        b_axis = np.linspace(0.0, 1.0, 11)  # [5] = 0.5
        c_axis = np.linspace(-0.1, 0.1, 11)
        w = np.zeros((11, 11, 11))
        w[2, 5, 5] = 0.5  # vol(x) = 0.15 + 0.5 (x-1): nonpositive for x <= 0.7
        w[5, 0, 5] = 0.5  # flat 0.3: valid everywhere
        grid = PosteriorGrid(a_axis, b_axis, c_axis, w, 0.0)
        xs = np.linspace(0.5, 1.5, 101)
        with pytest.warns(UserWarning, match="skipped"):
            avg = averaged_pdf(ENV, grid, xs)
        left = xs <= 0.69
        assert np.all(avg.skipped_mass[left] == 0.5)
        assert np.all(avg.skipped_mass[xs >= 0.75] == 0.0)
        # the valid cell still contributes its half everywhere
        flat_pdf = implied_pdf(ENV, SkewParams(0.3, 0.0, 0.0), xs[left])
        assert np.allclose(avg.curve.pdf[left], 0.5 * flat_pdf, rtol=0, atol=1e-15)

    def test_determinism_across_runs(self, noisy_quotes):
        grid = build_posterior(noisy_quotes, resolution=(15, 15, 15))
        xs = np.linspace(0.5, 1.5, 51)
        first = averaged_pdf(ENV, grid, xs)
        second = averaged_pdf(ENV, grid, xs)
        assert np.array_equal(first.curve.pdf, second.curve.pdf)
        assert np.array_equal(first.curve.cdf, second.curve.cdf)
        assert np.array_equal(first.skipped_mass, second.skipped_mass)
