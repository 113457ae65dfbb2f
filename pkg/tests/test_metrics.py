import math

import numpy as np
import pytest

from tglab.errors import QuadratureError
from tglab.heralding import DhContext, big_thetas, sample_clicks_array, success_probability
from tglab.leakage import CriticallyDamped, integrate, settings_for
from tglab.metrics import (
    compare_strategies,
    efsq_first_order,
    efsq_series,
    expected_f,
    expected_f_sq,
    fidelity_histogram,
    fidelity_value,
    first_attempt_success,
    resource_ratio,
    series_moments,
    window_mass,
)

QUARTER_PI = math.pi / 4
PA = CriticallyDamped(10.0)
PB = CriticallyDamped(12.5)
OVERLAP_CLOSED = 8.0 * (10.0 * 12.5) ** 1.5 / 22.5**3


class TestExpectedF:
    def test_identical_profiles_quarter(self):
        p = CriticallyDamped(10.0)
        assert expected_f(QUARTER_PI, QUARTER_PI, p, p).value == pytest.approx(0.25, abs=1e-8)

    def test_example_pair_value(self):
        res = expected_f(QUARTER_PI, QUARTER_PI, PA, PB)
        assert res.value == pytest.approx(0.240855, abs=1e-5)
        assert res.value == pytest.approx(0.25 * OVERLAP_CLOSED**2, abs=1e-9)

    @pytest.mark.parametrize("theta_a", np.linspace(0.25, 1.3, 5))
    @pytest.mark.parametrize("theta_b", np.linspace(0.3, 1.35, 5))
    def test_quadrature_cross_check(self, theta_a, theta_b):
        # int int sqrt(X Y) against the closed form, criterion-5 style
        th1, th2 = big_thetas(theta_a, theta_b)

        def integrand(t1, t2):
            x = th1 * PA.density(t1) * PB.density(t2)
            y = th2 * PB.density(t1) * PA.density(t2)
            return np.sqrt(x * y)

        val = integrate(integrand, settings_for(PA, PB, relative_tolerance=1e-7), ndim=2)
        assert val == pytest.approx(expected_f(theta_a, theta_b, PA, PB).value, abs=1e-6)

    def test_x_flip_invariance(self):
        for ta, tb in [(0.3, 0.9), (0.7, 1.2)]:
            a = expected_f(ta, tb, PA, PB).value
            b = expected_f(math.pi / 2 - ta, math.pi / 2 - tb, PA, PB).value
            assert a == pytest.approx(b, abs=1e-12)


class TestExpectedFSq:
    def test_degenerate_tilts_vanish(self):
        assert expected_f_sq(0.0, 0.7, PA, PB).value == 0.0
        assert expected_f_sq(0.4, math.pi / 2, PA, PB).value == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("theta", [0.3, 0.6, QUARTER_PI, 1.1])
    def test_diagonal_zero_order_exact(self, theta):
        th1, _ = big_thetas(theta, theta)
        i0 = series_moments(PA, PB, 0)[0]
        assert expected_f_sq(theta, theta, PA, PB).value == pytest.approx(th1 * i0, abs=1e-6)

    def test_diagonal_dominates_antidiagonal(self):
        # the Fig.-4 cross-section property on a grid of sin^2 offsets
        for d in np.linspace(0.0, 0.35, 8):
            ta = math.asin(math.sqrt(0.5 + d))
            tb = math.asin(math.sqrt(0.5 - d))
            diag = expected_f_sq(ta, ta, PA, PB).value
            anti = expected_f_sq(ta, tb, PA, PB).value
            assert diag >= anti - 1e-12

    def test_moment_and_variance_bounds(self):
        rng = np.random.default_rng(17)
        for _ in range(12):
            ta, tb = rng.uniform(0.15, 1.4, 2)
            ef = expected_f(ta, tb, PA, PB).value
            efsq = expected_f_sq(ta, tb, PA, PB).value
            assert efsq <= 0.5 * ef + 1e-12          # F never exceeds 1/2
            assert efsq >= ef**2 - 1e-12             # non-negative variance


class TestSeries:
    def test_i1_is_half_i0(self):
        mom = series_moments(PA, PB, 1)
        assert mom[1] / mom[0] == pytest.approx(0.5, abs=1e-9)

    def test_j_equals_i(self):
        i = series_moments(PA, PB, 4)
        j = series_moments(PA, PB, 4, numerator="U")
        assert np.abs(i - j).max() < 1e-9

    def test_terms_positive_decreasing(self):
        mom = series_moments(PA, PB, 6)
        assert np.all(mom > 0)
        assert np.all(np.diff(mom) < 0)

    def test_order8_matches_quadrature(self):
        res, terms = efsq_series(0.7, 0.8, PA, PB, 8)
        quad = expected_f_sq(0.7, 0.8, PA, PB)
        assert res.value == pytest.approx(quad.value, abs=1e-4)
        assert res.estimated_error < 1e-4

    def test_region_selection(self):
        # theta_a < theta_b puts Theta_1 > Theta_2... the smaller prefactor wins
        _, terms = efsq_series(0.7, 0.8, PA, PB, 4)
        assert terms.region == "R_J"
        _, terms = efsq_series(0.8, 0.7, PA, PB, 4)
        assert terms.region == "R_I"

    def test_union_covers_nondegenerate_tilts(self):
        # the two regions only exclude degenerate tilts; far off the diagonal
        # the surviving series converges slowly (large estimated error)
        res, terms = efsq_series(0.1, 1.45, PA, PB, 4)
        assert terms.region == "R_J"
        assert res.estimated_error > 1e-3

    def test_outside_both_regions(self):
        with pytest.raises(QuadratureError):
            efsq_series(0.0, 0.7, PA, PB, 4)      # degenerate tilt


class TestFirstOrder:
    def test_diagonal_reduces_to_zeroth(self):
        th1, _ = big_thetas(0.6, 0.6)
        i0 = series_moments(PA, PB, 0)[0]
        assert efsq_first_order(0.6, 0.6, PA, PB).value == pytest.approx(th1 * i0, abs=1e-12)

    def test_antidiagonal_agreement_near_centre(self):
        # the Fig.-9 green-curve comparison inside the convergent zone
        for s2 in (0.45, 0.48, 0.52, 0.55):
            ta = math.asin(math.sqrt(s2))
            tb = math.asin(math.sqrt(1.0 - s2))
            fo = efsq_first_order(ta, tb, PA, PB).value
            ex = expected_f_sq(ta, tb, PA, PB).value
            assert fo == pytest.approx(ex, rel=0.10)

    def test_shape_independent_ratio(self):
        pc, pd = CriticallyDamped(5.0), CriticallyDamped(6.0)
        for ta, tb in [(0.6, 0.9), (1.0, 0.8)]:
            r1 = efsq_first_order(ta, tb, PA, PB).value / series_moments(PA, PB, 0)[0]
            r2 = efsq_first_order(ta, tb, pc, pd).value / series_moments(pc, pd, 0)[0]
            assert r1 == pytest.approx(r2, abs=1e-9)


class TestFidelityHistogram:
    def test_total_mass_is_success_probability(self):
        for ta, tb in [(QUARTER_PI, QUARTER_PI), (0.6, 1.0)]:
            hist = fidelity_histogram(ta, tb, PA, PB, bins=40, nodes=400)
            assert hist.total_mass == pytest.approx(success_probability(ta, tb), abs=1e-6)

    def test_identical_profiles_all_mass_at_half(self):
        p = CriticallyDamped(10.0)
        hist = fidelity_histogram(QUARTER_PI, QUARTER_PI, p, p, bins=50, nodes=300)
        assert hist.masses[-1] == pytest.approx(0.5, abs=1e-9)
        assert hist.masses[:-1].sum() == pytest.approx(0.0, abs=1e-12)

    def test_window_mass_reproduces_postselect_number(self):
        mass = window_mass(QUARTER_PI, QUARTER_PI, PA, PB, 1e-4, nodes=2000)
        assert mass == pytest.approx(0.033, abs=0.003)

    def test_bin_count_enforced(self):
        with pytest.raises(QuadratureError):
            fidelity_histogram(QUARTER_PI, QUARTER_PI, PA, PB, bins=5)


class TestCompareStrategies:
    def test_3f2_mode_reproduces_reported_numbers(self):
        rep = compare_strategies(PA, PB, 1e-4, "3f2")
        assert rep.p_postselect == pytest.approx(0.033, abs=0.003)
        assert rep.p_outside_window == pytest.approx(0.357, abs=0.005)
        assert rep.p_total == pytest.approx(0.390, abs=0.006)
        assert rep.p_total == pytest.approx(rep.p_postselect + rep.p_outside_window, abs=1e-12)

    def test_exact_mode_reported_alongside(self):
        rep = compare_strategies(PA, PB, 1e-4, "exact")
        assert rep.mode == "exact"
        assert 0.0 < rep.p_outside_only < rep.p_outside_window
        approx = compare_strategies(PA, PB, 1e-4, "3f2")
        assert rep.p_outside_only < approx.p_outside_only   # 2F^2 + ... < 3F^2 below 1/2

    def test_first_attempt_forms(self):
        assert first_attempt_success(0.5, "3f2") == pytest.approx(0.75)
        assert first_attempt_success(0.5, "exact") == pytest.approx(0.75)
        f = 0.3
        assert first_attempt_success(f, "exact") == pytest.approx(
            2 * f**2 + 2 * f**4 / (1 - 2 * f**2))

    def test_wide_window_limit(self):
        rep = compare_strategies(PA, PB, 0.5, "3f2", nodes=600)
        assert rep.p_postselect == pytest.approx(0.5, abs=1e-9)
        assert rep.p_outside_only == pytest.approx(0.0, abs=1e-12)

    def test_monotone_in_window_width(self):
        reps = [compare_strategies(PA, PB, eps, "3f2", nodes=600)
                for eps in (1e-4, 1e-3, 1e-2, 0.1, 0.5)]
        posts = [r.p_postselect for r in reps]
        outs = [r.p_outside_only for r in reps]
        assert all(a <= b + 1e-12 for a, b in zip(posts, posts[1:]))
        assert all(a >= b - 1e-12 for a, b in zip(outs, outs[1:]))


class TestResourceRatio:
    def test_unit_probability(self):
        assert resource_ratio(1.0, 10.0) == 1.0
        assert resource_ratio(1.0, 1e6) == 1.0

    def test_order_of_magnitude_rule(self):
        n = 1e4
        ratio = resource_ratio(0.03, n) / resource_ratio(0.3, n)
        assert ratio == pytest.approx(0.1 ** -math.log(n), rel=1e-9)

    def test_example_overhead_ratio(self):
        n = 1e6
        got = resource_ratio(0.033, n) / resource_ratio(0.39, n)
        assert got == pytest.approx((0.033 / 0.39) ** -math.log(n), rel=1e-9)

    def test_validation(self):
        with pytest.raises(QuadratureError):
            resource_ratio(0.0, 10)
        with pytest.raises(QuadratureError):
            resource_ratio(0.5, 1.0)


class TestMonteCarloConsistency:
    def test_sampled_histogram_matches_quadrature(self):
        theta_a, theta_b = 0.6, 1.0
        ctx = DhContext(theta_a, theta_b, PA, PB)
        rng = np.random.default_rng(31)
        n = 100_000
        t1, t2 = sample_clicks_array(ctx, rng, n)
        f = fidelity_value(theta_a, theta_b, PA, PB, t1, t2)
        hist = fidelity_histogram(theta_a, theta_b, PA, PB, bins=10, nodes=2500)
        p = success_probability(theta_a, theta_b)
        counts, _ = np.histogram(f, bins=hist.edges)
        for k in range(10):
            frac = hist.masses[k] / p          # conditional bin probability
            se = math.sqrt(max(frac * (1 - frac), 1e-12) / n)
            # 3 sigma statistical plus the histogram's own bin-boundary
            # resolution at 2500 nodes per axis
            assert abs(counts[k] / n - frac) < 3 * se + 3e-4

    def test_sampled_moments_match_quadrature(self):
        theta_a, theta_b = 0.7, 1.0
        ctx = DhContext(theta_a, theta_b, PA, PB)
        rng = np.random.default_rng(4242)
        n = 100_000
        t1, t2 = sample_clicks_array(ctx, rng, n)
        f = fidelity_value(theta_a, theta_b, PA, PB, t1, t2)
        p = success_probability(theta_a, theta_b)
        ef = expected_f(theta_a, theta_b, PA, PB).value / p
        efsq = expected_f_sq(theta_a, theta_b, PA, PB).value / p
        for sample, target in ((f, ef), (f**2, efsq)):
            se = sample.std(ddof=1) / math.sqrt(n)
            assert abs(sample.mean() - target) < 3 * se
