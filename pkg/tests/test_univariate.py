import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import kstest

from selectrand.errors import InvalidInputError, SelectionViolatedError
from selectrand.noise import NoiseDistribution
from selectrand.univariate import (
    FileDrawerConfig,
    invert_selective_ci,
    nonrandomized_pivot,
    population_gaussian,
    population_shifted_bernoulli,
    population_skewed,
    randomized_pivot,
    sample_reported_means,
    sample_selected_means,
    selection_rate,
    selective_law,
    simulate_file_drawer,
)

LOGISTIC = NoiseDistribution("logistic", 0.5)


class TestNonrandomizedPivot:
    def test_truncated_normal_ratio(self):
        # P(Z > 3) / P(Z > 2) at n=100, xbar=0.3, mu0=0, threshold 2
        assert nonrandomized_pivot(0.3, 100, 0.0) == pytest.approx(
            0.059335833071426744, rel=1e-12)

    def test_unit_at_threshold_limit(self):
        # just above the threshold the pivot approaches 1
        assert nonrandomized_pivot(0.2 + 1e-12, 100, 0.0) == pytest.approx(
            1.0, abs=1e-9)

    def test_selection_violation(self):
        with pytest.raises(SelectionViolatedError):
            nonrandomized_pivot(0.19, 100, 0.0)

    def test_deep_tail_stable(self):
        # both tails underflow in linear space; the ratio stays in (0,1)
        p = nonrandomized_pivot(0.3, 100, -2.5)
        assert 0.0 < p < 1.0

    @given(mu0=st.floats(-1.0, 0.25))
    @settings(max_examples=60, deadline=None)
    def test_monotone_increasing_in_mu0(self, mu0):
        lo = nonrandomized_pivot(0.35, 100, mu0)
        hi = nonrandomized_pivot(0.35, 100, mu0 + 0.05)
        assert hi >= lo - 1e-12


class TestRandomizedPivot:
    def test_against_independent_quadrature(self):
        # oracle: direct adaptive integration of
        #   exp(-n(t-mu0)^2/2) * sigmoid(-kappa (2 - sqrt(n) t))
        # normalized over the upper tail at xbar (scipy.integrate.quad)
        assert randomized_pivot(-0.8, 100, -1.0, LOGISTIC) == pytest.approx(
            0.06647876113559101, rel=1e-10)

    def test_degenerate_reduces_to_truncated_normal(self):
        hard = NoiseDistribution("degenerate")
        assert randomized_pivot(0.3, 100, 0.0, hard) == pytest.approx(
            nonrandomized_pivot(0.3, 100, 0.0), rel=1e-12)

    def test_infinite_limits(self):
        assert randomized_pivot(-np.inf, 100, 0.0, LOGISTIC) == 1.0
        assert randomized_pivot(np.inf, 100, 0.0, LOGISTIC) == 0.0

    def test_uniform_under_truth(self):
        n, mu = 100, 0.0
        draws = sample_selected_means(n, mu, LOGISTIC, 4000, seed=21)
        law = selective_law(n, mu, LOGISTIC)
        pivots = np.asarray(law.survival(draws))
        assert kstest(pivots, "uniform").pvalue > 0.01

    def test_uniform_in_rare_regime(self):
        # acceptance ~ 3e-3 at mu=-1: sample by grid inversion of the law
        # itself would be circular, so use rejection with a big budget
        n, mu = 100, -1.0
        draws = sample_selected_means(n, mu, LOGISTIC, 1500, seed=3,
                                      max_attempts=10 ** 7)
        pivots = np.asarray(selective_law(n, mu, LOGISTIC).survival(draws))
        assert kstest(pivots, "uniform").pvalue > 0.01

    @given(mu0=st.floats(-1.2, 0.2))
    @settings(max_examples=40, deadline=None)
    def test_monotone_increasing_in_mu0(self, mu0):
        lo = randomized_pivot(-0.3, 100, mu0, LOGISTIC)
        hi = randomized_pivot(-0.3, 100, mu0 + 0.05, LOGISTIC)
        assert hi >= lo - 1e-10

    def test_nan_rejected(self):
        with pytest.raises(InvalidInputError):
            randomized_pivot(np.nan, 100, 0.0, LOGISTIC)


class TestSelectionRate:
    def test_degenerate_matches_normal_tail(self):
        from scipy.special import ndtr
        hard = NoiseDistribution("degenerate")
        # P(sqrt(n) xbar > 2) = P(Z > 2 - sqrt(n) mu)
        for n, mu in ((100, 0.0), (250, -1.0)):
            expected = ndtr(-(2.0 - np.sqrt(n) * mu))
            assert selection_rate(n, mu, hard) == pytest.approx(
                expected, rel=1e-8)

    def test_randomized_rate_by_monte_carlo(self):
        n, mu = 100, 0.0
        rng = np.random.default_rng(9)
        xb = mu + rng.standard_normal(400_000) / np.sqrt(n)
        w = LOGISTIC.sample_with(rng, 400_000)
        mc = np.mean(np.sqrt(n) * xb + w > 2.0)
        assert selection_rate(n, mu, LOGISTIC) == pytest.approx(
            mc, abs=4 * np.sqrt(mc * (1 - mc) / 400_000))


class TestReportedMeanSampling:
    def test_matches_rejection_sampler(self):
        n, mu = 100, 0.0
        quad_draws = sample_reported_means(n, mu, LOGISTIC, 5000, seed=4)
        rej_draws = sample_selected_means(n, mu, LOGISTIC, 5000, seed=5)
        ks = kstest(quad_draws, rej_draws)
        assert ks.pvalue > 0.01

    def test_deterministic(self):
        a = sample_reported_means(50, -0.2, LOGISTIC, 100, seed=8)
        b = sample_reported_means(50, -0.2, LOGISTIC, 100, seed=8)
        np.testing.assert_array_equal(a, b)


class TestConfidenceIntervals:
    def test_contains_pivot_inversion(self):
        # endpoints are exact pivot roots
        xbar, n = 0.1, 100
        lo, hi = invert_selective_ci(xbar, n, LOGISTIC, level=0.9)
        assert randomized_pivot(xbar, n, lo, LOGISTIC) == pytest.approx(
            0.05, abs=1e-6)
        assert randomized_pivot(xbar, n, hi, LOGISTIC) == pytest.approx(
            0.95, abs=1e-6)
        assert lo < xbar < hi

    def test_monotone_in_xbar(self):
        prev = invert_selective_ci(-0.5, 100, LOGISTIC)
        for xbar in (-0.3, -0.1, 0.1, 0.3):
            cur = invert_selective_ci(xbar, 100, LOGISTIC)
            assert cur[0] >= prev[0] - 1e-8
            assert cur[1] >= prev[1] - 1e-8
            prev = cur

    def test_level_validation(self):
        with pytest.raises(InvalidInputError):
            invert_selective_ci(0.1, 100, LOGISTIC, level=1.5)

    def test_gaussian_noise_deep_interval_width(self):
        # far below the threshold the law tends to a gaussian with
        # variance (1 - tau)/n, tau = 1/(1 + gamma^2)
        gauss = NoiseDistribution("gaussian", 1.0)
        n = 100
        lo, hi = invert_selective_ci(-4.0, n, gauss, level=0.9)
        from scipy.stats import norm
        nominal = 2 * norm.ppf(0.95) / np.sqrt(n)
        assert (hi - lo) / nominal == pytest.approx(np.sqrt(2.0), rel=1e-3)


class TestSimulationKernel:
    def test_nonrandomized_reports_only_above_threshold(self):
        cfg = FileDrawerConfig(100, NoiseDistribution("degenerate"),
                               population_gaussian(0.0))
        res = simulate_file_drawer(cfg, 4000, seed=13)
        means = res.selected_means()
        assert means.size > 0
        assert means.min() > 2.0 / np.sqrt(100)

    def test_randomized_can_report_below_threshold(self):
        cfg = FileDrawerConfig(100, LOGISTIC, population_gaussian(0.0))
        res = simulate_file_drawer(cfg, 4000, seed=13)
        assert res.selected_means().min() < 2.0 / np.sqrt(100)

    def test_deterministic_given_seed(self):
        cfg = FileDrawerConfig(50, LOGISTIC, population_skewed(0.0))
        a = simulate_file_drawer(cfg, 200, seed=2)
        b = simulate_file_drawer(cfg, 200, seed=2)
        assert [r.xbar for r in a.records] == [r.xbar for r in b.records]

    def test_population_moments(self):
        rng = np.random.default_rng(0)
        for pop in (population_gaussian(0.3),
                    population_shifted_bernoulli(-0.5),
                    population_skewed(0.1)):
            draws = pop.sample(rng, 200_000)
            assert draws.mean() == pytest.approx(pop.mu, abs=0.01)
            assert draws.std() == pytest.approx(1.0, abs=0.01)

    def test_bad_config(self):
        with pytest.raises(InvalidInputError):
            FileDrawerConfig(1, LOGISTIC, population_gaussian(0.0))
        with pytest.raises(InvalidInputError):
            FileDrawerConfig(10, LOGISTIC, population_gaussian(0.0),
                             threshold=np.inf)
