import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from pcuq.analysis import (
    CHUNK,
    canonical_chunks,
    exceedance_probability,
    kde,
    percentiles,
    robust_silverman_bandwidth,
    sample,
    sample_moments,
    silverman_bandwidth,
)
from pcuq.basis import build_basis
from pcuq.projection import PcSurrogate, moments

IDENTITY = PcSurrogate(build_basis(1, 1), [0.0, 1.0])
POROSITY = PcSurrogate(build_basis(1, 1), [-1.8971, 0.2], log_transformed=True)


class TestSample:
    def test_constant(self):
        batch = sample(PcSurrogate(build_basis(2, 2), [4.25, 0, 0, 0, 0, 0]), 1000, 0)
        assert (batch.draws == 4.25).all() and batch.n == 1000

    def test_identity_mean(self):
        x = sample(IDENTITY, 10**6, 11).draws[:, 0]
        assert abs(x.mean()) < 3 / math.sqrt(x.size)

    def test_lognormal_mean(self):
        x = sample(POROSITY, 10**6, 12).draws[:, 0]
        exact = math.exp(-1.8971 + 0.02)
        assert exact == pytest.approx(0.1530, abs=5e-5)
        assert abs(x.mean() - exact) < 3 * x.std() / math.sqrt(x.size)

    def test_seed_determinism(self):
        sur = PcSurrogate(build_basis(3, 2, ["hermite", "legendre", "hermite"]), np.arange(10.0))
        a, b = sample(sur, 3 * CHUNK + 17, 5), sample(sur, 3 * CHUNK + 17, 5)
        assert a.draws.tobytes() == b.draws.tobytes()
        assert not np.array_equal(a.draws, sample(sur, 3 * CHUNK + 17, 6).draws)

    def test_prefix_stability(self):
        # chunked streams: a longer run extends a shorter one
        short = sample(IDENTITY, CHUNK + 5, 3).draws
        long = sample(IDENTITY, 2 * CHUNK, 3).draws
        np.testing.assert_array_equal(long[: CHUNK + 5], short)

    def test_germ_distributions(self):
        xi = np.concatenate(list(canonical_chunks(["hermite", "legendre"], 200_000, 9)))
        assert stats.kstest(xi[:, 0], "norm").pvalue > 1e-3
        assert stats.kstest(xi[:, 1], stats.uniform(-1, 2).cdf).pvalue > 1e-3

    def test_family_mismatch(self):
        with pytest.raises(ValueError, match="uniform"):
            sample(IDENTITY, 10, 0, input_families=["uniform"])
        sample(IDENTITY, 10, 0, input_families=["normal"])

    def test_bad_size(self):
        with pytest.raises(ValueError):
            sample(IDENTITY, 0, 0)


class TestKde:
    def test_normal_density_at_zero(self):
        x = sample(IDENTITY, 10**6, 21).draws[:, 0]
        est = kde(x)
        assert np.interp(0.0, est.grid, est.density) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=0.02)
        assert est.integral() == pytest.approx(1.0, abs=1e-3)
        assert est.bandwidth == pytest.approx(silverman_bandwidth(x))

    def test_matches_direct_sum(self, rng):
        x = rng.standard_normal(2000)
        grid = np.linspace(-3, 3, 31)
        est = kde(x, grid=grid)
        h = est.bandwidth
        direct = np.exp(-0.5 * ((grid[:, None] - x[None, :]) / h) ** 2).sum(axis=1) / (x.size * h * math.sqrt(2 * math.pi))
        np.testing.assert_allclose(est.density, direct, atol=2e-3 * direct.max())

    @pytest.mark.xfail(
        strict=True,
        reason="1.06*std*N^-0.2 oversmooths the lognormal peak (mode ~0.44); see silverman-robust test",
    )
    def test_lognormal_mode_default_bandwidth(self):
        y = np.exp(sample(IDENTITY, 10**6, 22).draws[:, 0])
        est = kde(y, grid=np.linspace(0, 3, 30001))
        assert est.mode() == pytest.approx(math.exp(-1), rel=0.05)

    def test_lognormal_mode_robust_bandwidth(self):
        y = np.exp(sample(IDENTITY, 10**6, 22).draws[:, 0])
        est = kde(y, grid=np.linspace(0, 3, 30001), bandwidth="silverman-robust")
        assert est.bandwidth == pytest.approx(robust_silverman_bandwidth(y))
        assert est.mode() == pytest.approx(math.exp(-1), rel=0.05)

    def test_degenerate(self):
        with pytest.raises(ValueError, match="degenerate"):
            kde([0.0, 0.0])
        with pytest.raises(ValueError):
            kde([1.0])

    def test_bad_bandwidth(self):
        with pytest.raises(ValueError):
            kde([0.0, 1.0], bandwidth="scott")
        with pytest.raises(ValueError):
            kde([0.0, 1.0], bandwidth=0.0)


class TestPercentiles:
    def test_constant(self):
        sur = PcSurrogate(build_basis(1, 2), [[2.5, -1.0], [0, 0], [0, 0]])
        np.testing.assert_array_equal(percentiles(sur, n=1000), [[2.5] * 5, [-1.0] * 5])

    def test_identity_median(self):
        assert abs(percentiles(IDENTITY, [0.5], 10**6, 31)[0, 0]) < 0.005

    def test_lognormal_q95(self):
        q = percentiles(POROSITY, [0.95], 10**6, 32)[0, 0]
        assert q == pytest.approx(math.exp(-1.8971 + 1.6449 * 0.2), rel=0.01)

    def test_linear_interpolation(self):
        sur = PcSurrogate(build_basis(2, 2), [1.0, 2.0, -1.0, 0.3, 0.1, 0.0])
        draws = sample(sur, 5000, 4).draws[:, 0]
        np.testing.assert_array_equal(percentiles(sur, [0.1, 0.9], 5000, 4)[0], np.quantile(draws, [0.1, 0.9]))

    @pytest.mark.parametrize("q", [[0.0], [1.0], [0.5, 1.2]])
    def test_bad_quantiles(self, q):
        with pytest.raises(ValueError):
            percentiles(IDENTITY, q, 10)

    @settings(max_examples=25, deadline=None)
    @given(coeffs=st.lists(st.floats(-3, 3), min_size=6, max_size=6), seed=st.integers(0, 2**32))
    def test_monotone_in_quantile(self, coeffs, seed):
        table = percentiles(PcSurrogate(build_basis(2, 2), coeffs), [0.05, 0.25, 0.5, 0.75, 0.95], 2000, seed)
        assert (np.diff(table, axis=1) >= 0).all()


class TestExceedance:
    def test_constant_below_min(self):
        sur = PcSurrogate(build_basis(1, 1), [2.0, 0.0])
        assert exceedance_probability(sur, 1.0, 100).prob[0] == 1.0

    def test_identity_half(self):
        assert exceedance_probability(IDENTITY, 0.0, 10**6, 41).prob[0] == pytest.approx(0.5, abs=0.002)

    def test_lognormal_median(self):
        assert exceedance_probability(POROSITY, math.exp(-1.8971), 10**6, 42).prob[0] == pytest.approx(0.5, abs=0.002)

    def test_normal_tail_with_stderr(self):
        ex = exceedance_probability(IDENTITY, 1.6449, 10**6, 43)
        assert ex.stderr[0] == pytest.approx(math.sqrt(ex.prob[0] * (1 - ex.prob[0]) / 10**6))
        assert abs(ex.prob[0] - 0.05) < 3 * ex.stderr[0]

    def test_nan_threshold(self):
        with pytest.raises(ValueError):
            exceedance_probability(IDENTITY, float("nan"), 10)

    @settings(max_examples=25, deadline=None)
    @given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 2**32))
    def test_monotone_in_threshold(self, a, b, seed):
        lo, hi = min(a, b), max(a, b)
        sur = PcSurrogate(build_basis(1, 2), [[0.1, 1.0], [1.0, -0.5], [0.3, 0.2]])
        assert (exceedance_probability(sur, lo, 3000, seed).prob >= exceedance_probability(sur, hi, 3000, seed).prob).all()


def test_moment_cross_check(rng):
    basis = build_basis(3, 2, ["hermite", "legendre", "hermite"])
    sur = PcSurrogate(basis, rng.standard_normal((basis.n_terms, 3)))
    mean, var = moments(sur)
    m, v, se_m, se_v = sample_moments(sur, 10**6, 51)
    assert (np.abs(m - mean) < 5 * se_m).all()
    assert (np.abs(v - var) < 5 * se_v).all()
