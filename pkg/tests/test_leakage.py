import math

import numpy as np
import pytest

from tglab.errors import ProfileError, QuadratureError
from tglab.leakage import (
    CavityParams,
    CriticallyDamped,
    QuadratureSettings,
    Tabulated,
    critically_damped_density,
    integrate,
    load_profile_csv,
    overlap_integral,
    sample_time,
    save_profile_csv,
    settings_for,
    tabulate_profile,
)


def closed_form_overlap(ga, gb):
    return 8.0 * (ga * gb) ** 1.5 / (ga + gb) ** 3


class TestCriticallyDampedDensity:
    def test_heaviside_cutoff(self):
        assert critically_damped_density(10.0, 0.0) == 0.0
        assert critically_damped_density(10.0, -0.3) == 0.0

    def test_maximum_at_inverse_g(self):
        # maximising 4 g^3 t^2 exp(-2gt) gives t* = 1/g, value 4 g / e^2
        g = 10.0
        assert critically_damped_density(g, 1.0 / g) == pytest.approx(40.0 * math.exp(-2.0), rel=1e-12)
        t = np.linspace(1e-4, 1.0, 3000)
        assert critically_damped_density(g, t).max() <= 40.0 * math.exp(-2.0) + 1e-12

    @pytest.mark.parametrize("g", [0.5, 10.0, 12.5, 80.0])
    def test_unit_normalisation(self, g):
        prof = CriticallyDamped(g)
        val = integrate(prof.density, settings_for(prof), ndim=1)
        assert val == pytest.approx(1.0, abs=1e-9)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ProfileError):
            critically_damped_density(-1.0, 0.1)
        with pytest.raises(ProfileError):
            critically_damped_density(10.0, float("nan"))


class TestCavityParams:
    def test_validation(self):
        CavityParams(10.0, 40.0)
        with pytest.raises(ProfileError):
            CavityParams(0.0, 40.0)
        with pytest.raises(ProfileError):
            CavityParams(10.0, -1.0)

    def test_critically_damped_flag(self):
        assert CavityParams(10.0, 40.0).critically_damped
        assert not CavityParams(10.0, 39.0).critically_damped


class TestIntegrate:
    def test_zero_integrand(self):
        assert integrate(lambda t: np.zeros_like(t), QuadratureSettings(t_max=2.0)) == 0.0

    def test_product_of_normalised_densities(self):
        pa, pb = CriticallyDamped(10.0), CriticallyDamped(12.5)
        val = integrate(lambda t1, t2: pa.density(t1) * pb.density(t2),
                        settings_for(pa, pb), ndim=2)
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_determinism(self):
        s = QuadratureSettings(t_max=1.0)
        f = lambda t: np.exp(-3.0 * t) * t**2
        assert integrate(f, s) == integrate(f, s)

    def test_nonconvergence_reported(self):
        # panel budget of a 1-d integral is finite; a wild oscillator blows it
        s = QuadratureSettings(relative_tolerance=1e-9, t_max=1.0, panel_count=2)
        with pytest.raises(QuadratureError):
            integrate(lambda t: np.sin(2.0e9 * t) * t, s, ndim=1)

    def test_settings_validation(self):
        with pytest.raises(QuadratureError):
            QuadratureSettings(relative_tolerance=0.1)
        with pytest.raises(QuadratureError):
            QuadratureSettings(t_max=-1.0)
        with pytest.raises(QuadratureError):
            QuadratureSettings(panel_count=3)


class TestOverlapIntegral:
    def test_identical_profiles(self):
        p = CriticallyDamped(10.0)
        assert overlap_integral(p, p) == pytest.approx(1.0, abs=1e-9)

    def test_example_pair_closed_form(self):
        val = overlap_integral(CriticallyDamped(10.0), CriticallyDamped(12.5))
        assert val == pytest.approx(0.981539, abs=1e-6)
        assert val == pytest.approx(closed_form_overlap(10.0, 12.5), abs=1e-9)

    def test_symmetry_and_bound(self):
        pa, pb = CriticallyDamped(10.0), CriticallyDamped(25.0)
        ab = overlap_integral(pa, pb)
        assert ab == pytest.approx(overlap_integral(pb, pa), abs=1e-12)
        assert ab < 1.0

    def test_disjoint_support_limit(self):
        # overlap decreases monotonically as g_B runs away from g_A
        vals = [overlap_integral(CriticallyDamped(10.0), CriticallyDamped(gb))
                for gb in (12.5, 25.0, 50.0, 100.0, 400.0)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 0.1

    def test_tabulated_reproduces_closed_form(self):
        pa = CriticallyDamped(10.0)
        pb = CriticallyDamped(12.5)
        ta, tb = tabulate_profile(pa, 8193), tabulate_profile(pb, 8193)
        assert overlap_integral(ta, tb) == pytest.approx(overlap_integral(pa, pb), abs=1e-6)


class TestTabulated:
    def test_validation(self):
        with pytest.raises(ProfileError):
            Tabulated([0.1, 0.2], [1.0, 1.0])  # does not start at 0
        with pytest.raises(ProfileError):
            Tabulated([0.0, 0.0, 0.1], [1.0, 1.0, 1.0])  # not strictly ascending
        with pytest.raises(ProfileError):
            Tabulated([0.0, 0.1], [-1.0, 1.0])  # negative density
        with pytest.raises(ProfileError):
            Tabulated([0.0, 1.0], [0.0, 0.0])  # zero mass
        with pytest.raises(ProfileError):
            Tabulated([0.0, 1.0], [4.0, 4.0])  # mass above 1

    def test_sub_unit_mass_allowed(self):
        p = Tabulated([0.0, 1.0, 2.0], [0.0, 0.5, 0.0])
        assert p.total_mass == pytest.approx(0.5)

    def test_density_zero_outside_grid(self):
        p = Tabulated([0.0, 1.0], [0.5, 0.5])
        assert p.density(1.5) == 0.0
        assert p.density(0.25) == pytest.approx(0.5)

    def test_declared_mass_matches_quadrature(self):
        p = tabulate_profile(CriticallyDamped(10.0), 8193)
        val = integrate(p.density, settings_for(p, relative_tolerance=1e-9), ndim=1)
        assert val == pytest.approx(p.total_mass, abs=1e-8)

    def test_csv_round_trip_bit_exact(self, tmp_path):
        p = tabulate_profile(CriticallyDamped(12.5), 257)
        path = tmp_path / "prof.csv"
        save_profile_csv(p, path, points=257)
        q = load_profile_csv(path)
        assert np.array_equal(q.densities, p.density(np.linspace(0, p.t_max, 257)))

    def test_csv_header_required(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0.0,1.0\n1.0,0.0\n")
        with pytest.raises(ProfileError):
            load_profile_csv(path)


class TestSampling:
    def test_seeded_determinism(self):
        p = CriticallyDamped(10.0)
        a = p.sample(np.random.default_rng(42), size=100)
        b = p.sample(np.random.default_rng(42), size=100)
        assert np.array_equal(a, b)
        assert sample_time(p, np.random.default_rng(7)) == sample_time(p, np.random.default_rng(7))

    def test_empirical_mean_matches_gamma_shape(self):
        # mean of Gamma(3, rate 2g) is 3/(2g); 3 standard errors at 1e6 draws
        g = 10.0
        p = CriticallyDamped(g)
        draws = p.sample(np.random.default_rng(2024), size=1_000_000)
        mean, se = draws.mean(), draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(mean - 3.0 / (2.0 * g)) < 3.0 * se

    def test_kolmogorov_smirnov_against_analytic_cdf(self):
        # analytic CDF of Gamma(3, 2g): 1 - e^{-x}(1 + x + x^2/2), x = 2 g t
        g = 12.5
        p = CriticallyDamped(g)
        draws = np.sort(p.sample(np.random.default_rng(99), size=1_000_000))
        x = 2.0 * g * draws
        cdf = 1.0 - np.exp(-x) * (1.0 + x + 0.5 * x**2)
        n = draws.size
        ks = max(np.max(np.arange(1, n + 1) / n - cdf), np.max(cdf - np.arange(0, n) / n))
        assert ks < 0.002

    def test_zero_mass_profile_rejected(self):
        with pytest.raises(ProfileError):
            Tabulated([0.0, 1.0, 2.0], [0.0, 0.0, 0.0])
