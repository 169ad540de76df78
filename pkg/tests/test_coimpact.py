"""Tests for the co-impact module: size laws, correlated-sign sampling, the
conditional impact of a focal metaorder, and the intercept/crossover fit."""

import math

import numpy as np
import pytest
import scipy.integrate
import scipy.stats

from impactlab.coimpact import (
    CoimpactCurve,
    DayFlows,
    GeometricCounts,
    HalfNormalSizes,
    ParetoSizes,
    aggregate_impact,
    conditional_impact,
    empirical_sign_correlation,
    f_delta,
    intercept_and_crossover,
    read_dayflows_csv,
    sample_day,
    sample_days,
    shortfall_vs_imbalance,
    sign_correlation,
    simulate_shortfall_days,
    write_dayflows_csv,
)
from impactlab.errors import RegimeError


class TestParetoSizes:
    LAW = ParetoSizes(alpha=1.5, xmin=1e-4, xmax=0.1)

    def quad_moment(self, k):
        a, xmin, xmax = self.LAW.alpha, self.LAW.xmin, self.LAW.xmax
        c = a * xmin**a / (1.0 - (xmin / xmax) ** a)
        val, _ = scipy.integrate.quad(
            lambda x: x**k * c * x ** -(a + 1.0), xmin, xmax
        )
        return val

    def test_moments_match_quadrature(self):
        assert self.LAW.moment(1) == pytest.approx(self.quad_moment(1), rel=1e-8)
        assert self.LAW.moment(2) == pytest.approx(self.quad_moment(2), rel=1e-7)
        # the k == alpha special case switches to the logarithmic formula
        assert self.LAW.moment(1.5) == pytest.approx(
            self.quad_moment(1.5), rel=1e-8
        )

    def test_sampler_matches_cdf(self):
        rng = np.random.default_rng(7)
        x = self.LAW.sample(rng, 20_000)
        assert x.min() >= self.LAW.xmin and x.max() <= self.LAW.xmax
        lo, hi = self.LAW.xmin, self.LAW.xmax

        def cdf(v):
            v = np.asarray(v, dtype=np.float64)
            return (lo**-1.5 - v**-1.5) / (lo**-1.5 - hi**-1.5)

        assert scipy.stats.kstest(x, cdf).pvalue > 0.01
        mean = x.mean()
        band = 4 * x.std() / math.sqrt(len(x))
        assert abs(mean - self.LAW.moment(1)) < band

    def test_validation(self):
        with pytest.raises(ValueError, match="xmin < xmax"):
            ParetoSizes(xmin=0.2, xmax=0.1)
        with pytest.raises(ValueError, match="alpha"):
            ParetoSizes(alpha=0.0)


class TestHalfNormalSizes:
    def test_moments(self):
        law = HalfNormalSizes(scale=0.02)
        assert law.moment(1) == pytest.approx(0.02 * math.sqrt(2 / math.pi))
        assert law.moment(2) == pytest.approx(4e-4)
        with pytest.raises(NotImplementedError):
            law.moment(3)

    def test_sampling(self):
        law = HalfNormalSizes(scale=0.5)
        x = law.sample(np.random.default_rng(0), 50_000)
        assert (x >= 0).all()
        assert x.mean() == pytest.approx(law.moment(1), rel=0.02)

    def test_validation(self):
        with pytest.raises(ValueError, match="scale"):
            HalfNormalSizes(scale=0.0)


class TestDayFlows:
    def test_basic_properties(self):
        day = DayFlows(phi=np.array([0.01, -0.02, 0.03]), rho=0.4)
        assert day.N == 3
        assert day.total == pytest.approx(0.02)

    def test_validation(self):
        with pytest.raises(ValueError, match="at least one"):
            DayFlows(phi=np.array([]))
        with pytest.raises(ValueError, match="nonzero"):
            DayFlows(phi=np.array([0.01, 0.0]))
        with pytest.raises(ValueError, match="rho"):
            DayFlows(phi=np.array([0.01]), rho=1.5)


class TestAggregateImpact:
    def test_concave_response(self):
        assert f_delta(4.0) == pytest.approx(2.0)
        assert f_delta(-4.0) == pytest.approx(-2.0)
        assert f_delta(0.09, delta=1.0) == pytest.approx(0.09)

    def test_day_and_array_inputs_agree(self):
        day = DayFlows(phi=np.array([0.01, -0.02, 0.05]))
        assert aggregate_impact(day, Y=1.3) == pytest.approx(
            1.3 * math.sqrt(0.04)
        )
        assert aggregate_impact(np.array([0.01, -0.02, 0.05]), Y=1.3) == (
            pytest.approx(aggregate_impact(day, Y=1.3))
        )


class TestSignSampling:
    def test_sign_correlation_formula(self):
        assert sign_correlation(0.0) == 0.0
        assert sign_correlation(1.0) == pytest.approx(1.0)
        assert sign_correlation(0.5) == pytest.approx(1.0 / 3.0)

    def test_empirical_matches_arcsine_law(self):
        flows = sample_days(4000, 10, 0.6, seed=5)
        assert flows.shape == (4000, 10)
        measured = empirical_sign_correlation(flows)
        assert measured == pytest.approx(sign_correlation(0.6), abs=0.02)

    def test_independent_signs_uncorrelated(self):
        flows = sample_days(4000, 10, 0.0, seed=2)
        assert abs(empirical_sign_correlation(flows)) < 0.02

    def test_exact_pairwise_value(self):
        phi = np.array([[0.1, 0.2, -0.3]])
        assert empirical_sign_correlation(phi) == pytest.approx(-1.0 / 3.0)
        with pytest.raises(ValueError, match="at least two"):
            empirical_sign_correlation(np.array([[0.1]]))

    def test_sample_day_wraps_matrix_sampler(self):
        day = sample_day(5, 0.3, seed=9)
        assert day.N == 5 and day.rho == 0.3
        np.testing.assert_array_equal(
            day.phi, sample_days(1, 5, 0.3, seed=9)[0]
        )

    def test_validation(self):
        with pytest.raises(ValueError, match="N must be >= 1"):
            sample_days(10, 0, 0.5)
        with pytest.raises(ValueError, match="rho"):
            sample_days(10, 3, -0.1)


class TestConditionalImpact:
    HN = HalfNormalSizes(scale=0.01)

    def dense_normal_oracle(self, phi, sd, delta=0.5):
        """E[sgn(phi+S)|phi+S|^delta], S ~ N(0, sd^2), by dense trapezoids
        split at the sign kink."""
        total = 0.0
        for xs, sgn in (
            (np.linspace(0.0, phi + 14 * sd, 200_001), 1.0),
            (np.linspace(phi - 14 * sd, 0.0, 200_001), -1.0),
        ):
            f = sgn * np.abs(xs) ** delta * scipy.stats.norm.pdf(xs, phi, sd)
            total += np.trapezoid(f, xs)
        return total

    def test_gaussian_method_exact_for_independent_gaussian_flows(self):
        N, phis = 6, np.array([0.001, 0.005, 0.02])
        curve = conditional_impact(phis, N, 0.0, size_law=self.HN,
                                   method="gaussian")
        sd = math.sqrt((N - 1) * self.HN.moment(2))
        oracle = np.array([self.dense_normal_oracle(p, sd) for p in phis])
        np.testing.assert_allclose(curve.impact, oracle, rtol=1e-7)

    def test_mc_agrees_with_gaussian_at_rho_zero(self):
        N, phis = 6, np.array([0.001, 0.02])
        g = conditional_impact(phis, N, 0.0, size_law=self.HN,
                               method="gaussian")
        m = conditional_impact(phis, N, 0.0, size_law=self.HN, method="mc",
                               n_mc=200_000, seed=3)
        assert np.all(np.abs(g.impact - m.impact) < 4 * m.stderr)

    def test_single_metaorder_reduces_to_bare_law(self):
        phis = np.array([1e-4, 1e-2])
        curve = conditional_impact(phis, 1, 0.0, Y=1.4, method="mc")
        np.testing.assert_allclose(curve.impact, 1.4 * np.sqrt(phis),
                                   rtol=1e-12)
        assert np.max(curve.stderr) < 1e-15

    def test_intercept_grows_with_sign_correlation(self):
        vals = [
            conditional_impact(np.array([1e-4]), 8, rho,
                               method="gaussian").impact[0]
            for rho in (0.0, 0.3, 0.6)
        ]
        assert vals[0] < vals[1] < vals[2]
        # no intercept at rho = 0: the curve through phi -> 0 passes the
        # origin with finite slope, so the value vanishes with phi
        tiny = conditional_impact(np.array([1e-6]), 8, 0.0,
                                  method="gaussian").impact[0]
        assert 0.0 < tiny < 1e-4

    def test_random_counts_supported(self):
        curve = conditional_impact(
            np.array([1e-3, 1e-2]), GeometricCounts(mean=4.0), 0.2,
            n_mc=5000, seed=1,
        )
        assert np.isfinite(curve.impact).all()
        assert curve.count == 5000

    def test_determinism(self):
        phis = np.logspace(-4, -1, 5)
        a = conditional_impact(phis, 5, 0.4, n_mc=2000, seed=12)
        b = conditional_impact(phis, 5, 0.4, n_mc=2000, seed=12)
        np.testing.assert_array_equal(a.impact, b.impact)

    def test_validation(self):
        with pytest.raises(ValueError, match="at least 1000"):
            conditional_impact(np.array([1e-3]), 5, 0.0, n_mc=10)
        with pytest.raises(ValueError, match="unknown method"):
            conditional_impact(np.array([1e-3]), 5, 0.0, method="laplace")
        with pytest.raises(ValueError, match="fixed integer N"):
            conditional_impact(np.array([1e-3]), GeometricCounts(), 0.0,
                               method="gaussian")
        with pytest.raises(ValueError, match="mean count"):
            GeometricCounts(mean=0.5)


class TestInterceptAndCrossover:
    def planted_curve(self, i0=0.02, slope=1.0, b=0.3):
        phi_lin = np.logspace(-4, math.log10(5e-3), 6)
        phi_mid = np.logspace(math.log10(8e-3), math.log10(3e-2), 6)
        phi_sq = np.logspace(math.log10(5e-2), 0, 6)
        phi = np.concatenate([phi_lin, phi_mid, phi_sq])
        impact = np.concatenate(
            [
                i0 + slope * phi_lin,
                np.maximum(i0 + slope * phi_mid, b * np.sqrt(phi_mid)),
                b * np.sqrt(phi_sq),
            ]
        )
        return CoimpactCurve(phi, impact, np.zeros(len(phi)), 0)

    def test_recovers_planted_branches(self):
        fit = intercept_and_crossover(self.planted_curve())
        assert fit.intercept == pytest.approx(0.02, rel=1e-9)
        assert fit.slope == pytest.approx(1.0, rel=1e-9)
        assert fit.sqrt_coef == pytest.approx(0.3, rel=1e-9)
        # two positive roots exist (0.01 and 0.04); the one nearest the
        # window gap is reported
        assert fit.phi_star == pytest.approx(0.01, rel=1e-6)
        assert fit.n_linear == 6 and fit.n_sqrt == 6
        assert fit.intercept_stderr == pytest.approx(0.0, abs=1e-12)

    def test_short_curve_rejected(self):
        curve = self.planted_curve()
        short = CoimpactCurve(curve.phi[:6], curve.impact[:6],
                              curve.stderr[:6], 0)
        with pytest.raises(RegimeError, match="too short"):
            intercept_and_crossover(short)

    def test_non_intersecting_branches_rejected(self):
        phi = np.logspace(-4, 0, 18)
        # large intercept, small sqrt branch: discriminant < 0
        impact = np.concatenate(
            [0.1 + phi[:12], 0.3 * np.sqrt(phi[12:])]
        )
        with pytest.raises(RegimeError, match="do not intersect"):
            intercept_and_crossover(CoimpactCurve(phi, impact,
                                                  np.zeros(18), 0))

    def test_nonpositive_sqrt_window_rejected(self):
        phi = np.logspace(-4, 0, 18)
        impact = np.linspace(0.1, -0.1, 18)
        with pytest.raises(RegimeError, match="non-positive"):
            intercept_and_crossover(CoimpactCurve(phi, impact,
                                                  np.zeros(18), 0))

    def test_unsorted_phi_rejected(self):
        curve = self.planted_curve()
        with pytest.raises(ValueError, match="strictly increasing"):
            intercept_and_crossover(
                CoimpactCurve(curve.phi[::-1], curve.impact,
                              curve.stderr, 0)
            )


class TestShortfallRegression:
    def test_exact_line_recovery(self):
        x = np.linspace(-1.0, 1.0, 40)
        y = 0.4 * x + 0.1
        fit = shortfall_vs_imbalance(y, x)
        assert fit.slope == pytest.approx(0.4, rel=1e-12)
        assert fit.intercept == pytest.approx(0.1, rel=1e-12)
        assert fit.r2 == pytest.approx(1.0, abs=1e-12)

    def test_simulated_days_show_positive_coupling(self):
        sf, im = simulate_shortfall_days(3000, 8, 0.0, seed=9)
        fit = shortfall_vs_imbalance(sf, im)
        assert fit.slope > 0
        assert fit.slope / fit.slope_stderr > 10

    def test_simulation_deterministic(self):
        a = simulate_shortfall_days(100, 4, 0.5, seed=3)
        b = simulate_shortfall_days(100, 4, 0.5, seed=3)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_validation(self):
        with pytest.raises(ValueError, match="at least 30"):
            shortfall_vs_imbalance(np.ones(5), np.ones(5))
        with pytest.raises(ValueError, match="zero-variance"):
            shortfall_vs_imbalance(np.arange(40.0), np.ones(40))
        with pytest.raises(ValueError, match="matching"):
            shortfall_vs_imbalance(np.ones(40), np.ones(41))


class TestDayflowsCsv:
    def test_round_trip(self, tmp_path):
        flows = sample_days(7, 3, 0.4, seed=1)
        path = tmp_path / "flows.csv"
        write_dayflows_csv(path, flows)
        back = read_dayflows_csv(path)
        np.testing.assert_array_equal(back, flows)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "flows.csv"
        write_dayflows_csv(path, np.empty((0, 0)))
        with pytest.raises(ValueError, match="no data rows"):
            read_dayflows_csv(path)
