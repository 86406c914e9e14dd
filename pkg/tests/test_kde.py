import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from ringlab.errors import ConfigurationError
from ringlab.triggers import (
    CONV_AS_WRITTEN,
    CONV_DIM_CONSISTENT,
    ConvolvedDist,
    EmpiricalDist,
    convolved_cdf,
    required_sample_size,
    sample_scalar,
    silverman_bandwidth,
)


def small_dist(seed=0, n=50, lo=2.0, hi=5.0):
    rng = np.random.default_rng(seed)
    return EmpiricalDist.fit(rng.uniform(lo, hi, n))


class TestKde:
    def test_single_sample_cdf_half_at_mean(self):
        d = EmpiricalDist(np.array([3.0]), bandwidth=0.5, support=(3.0, 3.0))
        assert d.cdf(3.0) == pytest.approx(0.5, abs=1e-15)

    def test_tail_bound(self):
        d = small_dist()
        assert d.cdf(d.support[1] + 10 * d.bandwidth) > 0.999

    def test_cdf_matches_quadrature_of_pdf(self):
        d = small_dist(n=20)
        lo = d.support[0] - 10 * d.bandwidth
        for x in np.linspace(d.support[0], d.support[1] + 3 * d.bandwidth, 7):
            num, err = quad(d.pdf, lo, x, limit=200)
            assert abs(num - d.cdf(x)) < 1e-6

    def test_pdf_integrates_to_one(self):
        d = small_dist(n=30)
        lo = d.support[0] - 12 * d.bandwidth
        hi = d.support[1] + 12 * d.bandwidth
        total, _ = quad(d.pdf, lo, hi, limit=300)
        assert total == pytest.approx(1.0, abs=1e-6)

    @given(st.floats(-10, 10), st.floats(-10, 10))
    @settings(max_examples=60, deadline=None)
    def test_cdf_monotone_bounded(self, a, b):
        d = small_dist(seed=4)
        lo_x, hi_x = min(a, b), max(a, b)
        c1, c2 = d.cdf(lo_x), d.cdf(hi_x)
        assert 0.0 <= c1 <= c2 <= 1.0

    def test_samples_outside_support_rejected(self):
        with pytest.raises(ConfigurationError):
            EmpiricalDist(np.array([1.0, 9.0]), 0.1, (0.0, 5.0))


class TestSilverman:
    def test_direct_arithmetic(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=1024)
        x = (x - x.mean()) / np.std(x, ddof=1)  # sigma_hat exactly 1
        assert silverman_bandwidth(x) == pytest.approx(1.06 * 1024 ** -0.2, rel=1e-12)
        assert 1.06 * 1024 ** -0.2 == pytest.approx(0.265, abs=1e-12)

    def test_scale_homogeneity(self):
        x = np.random.default_rng(1).uniform(0, 1, 200)
        assert silverman_bandwidth(3.7 * x) == pytest.approx(
            3.7 * silverman_bandwidth(x), rel=1e-12)

    def test_sample_size_exponent_law(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=400)
        x = (x - x.mean()) / np.std(x, ddof=1)
        y = rng.normal(size=800)
        y = (y - y.mean()) / np.std(y, ddof=1)
        assert silverman_bandwidth(y) / silverman_bandwidth(x) == pytest.approx(
            2.0 ** -0.2, rel=1e-12)

    def test_degenerate_rejected(self):
        with pytest.raises(ConfigurationError):
            silverman_bandwidth(np.ones(10))
        with pytest.raises(ConfigurationError):
            silverman_bandwidth(np.array([1.0]))


class TestSampling:
    def test_degenerate_mixture_concentrates(self, rng):
        d = EmpiricalDist(np.array([2.5]), bandwidth=1e-9, support=(2.5, 2.5))
        draws = d.sample(rng, size=100)
        assert np.all(np.abs(draws - 2.5) < 1e-6)

    def test_seeded_determinism(self):
        d = small_dist()
        r1 = np.random.Generator(np.random.PCG64(5))
        r2 = np.random.Generator(np.random.PCG64(5))
        assert np.array_equal(d.sample(r1, 50), d.sample(r2, 50))

    def test_dkw_band_against_kde_cdf(self, rng):
        d = small_dist(seed=7, n=40)
        n = 100_000
        draws = np.sort(d.sample(rng, size=n))
        # DKW band at 99% confidence
        eps = np.sqrt(np.log(2.0 / 0.01) / (2.0 * n))
        ecdf_hi = np.arange(1, n + 1) / n
        model = d.cdf(draws)
        assert np.max(np.abs(model - ecdf_hi)) < eps + 1.0 / n


class TestConvolution:
    def test_single_sample_collapse_as_written(self):
        t = EmpiricalDist(np.array([1.0]), 0.05, (1.0, 1.0))
        dm = EmpiricalDist(np.array([5.0]), 0.1, (5.0, 5.0))
        conv = convolved_cdf(t, dm, v_adv=2.0, eps_ins=0.05)
        c = 2.0 - 0.05
        mu = 1.0 + c * 5.0
        spread = 0.05 + c * 0.1
        from scipy.special import ndtr
        for x in (mu - 1.0, mu, mu + 0.5):
            assert conv.cdf(x) == pytest.approx(float(ndtr((x - mu) / spread)), abs=1e-12)

    def test_invalid_speed_rejected(self):
        t = small_dist(0)
        with pytest.raises(ConfigurationError):
            convolved_cdf(t, t, v_adv=0.01, eps_ins=0.05)

    @pytest.mark.parametrize("mode", [CONV_AS_WRITTEN, CONV_DIM_CONSISTENT])
    def test_monte_carlo_oracle(self, mode, rng):
        t = EmpiricalDist.fit(np.random.default_rng(1).uniform(0.9, 1.1, 60))
        dm = EmpiricalDist.fit(np.random.default_rng(2).uniform(4.5, 5.5, 60))
        v_adv, eps = 2.0, 0.05
        c = v_adv - eps
        conv = ConvolvedDist(t, dm, v_adv, eps, mode)
        n = 1_000_000
        t_draws = t.sample(rng, n)
        d_draws = dm.sample(rng, n)
        mc = t_draws + (c * d_draws if mode == CONV_AS_WRITTEN else d_draws / c)
        mc.sort()
        grid = np.linspace(mc[0], mc[-1], 80)
        ecdf = np.searchsorted(mc, grid, side="right") / n
        model = conv.cdf(grid)
        assert np.max(np.abs(model - ecdf)) < 0.01

    def test_three_step_sampling_matches_cdf(self, rng):
        t = EmpiricalDist.fit(np.random.default_rng(3).uniform(0.9, 1.1, 30))
        dm = EmpiricalDist.fit(np.random.default_rng(4).uniform(4.5, 5.5, 30))
        conv = ConvolvedDist(t, dm, 2.0, 0.05)
        draws = np.sort(conv.sample(rng, 100_000))
        eps = np.sqrt(np.log(2.0 / 0.01) / (2.0 * len(draws)))
        ecdf = np.arange(1, len(draws) + 1) / len(draws)
        assert np.max(np.abs(conv.cdf(draws) - ecdf)) < eps + 1e-4


class TestRequiredSampleSize:
    def test_arithmetic_oracle(self):
        import math
        first = (4.0 * math.sqrt(math.pi) * 1.0 / 0.5) ** 5
        second = 2.0 * 1.0 / 0.25 * math.log(1.0 / 0.05)
        assert math.ceil(max(first, second)) == 573_225
        assert required_sample_size(0.0, 1.0, 0.5, 0.05) == 573_225
        assert second == pytest.approx(23.97, abs=0.01)

    def test_fifth_power_law(self):
        big = required_sample_size(0.0, 1.0, 0.25, 0.05)
        small = required_sample_size(0.0, 1.0, 0.5, 0.05)
        assert big == pytest.approx(32 * small, rel=1e-4)

    def test_delta_to_one_second_term_vanishes(self):
        # with eps at the range, the first term is (4 sqrt(pi))^5 ~ 17914
        n_tight = required_sample_size(0.0, 1.0, 1.0, 0.999999)
        import math
        assert n_tight == math.ceil((4 * math.sqrt(math.pi)) ** 5)

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            required_sample_size(1.0, 0.0, 0.5, 0.05)
        with pytest.raises(ConfigurationError):
            required_sample_size(0.0, 1.0, -1.0, 0.05)
        with pytest.raises(ConfigurationError):
            required_sample_size(0.0, 1.0, 0.5, 1.5)
