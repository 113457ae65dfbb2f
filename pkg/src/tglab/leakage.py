"""Calibrated photon-leakage densities of atom-cavity systems.

Conventions: hbar = 1, so the Jaynes-Cummings coupling g and the cavity
leakage rate kappa are inverse times and every density P(t) is a
probability per unit time on t >= 0.  A profile may carry total mass
below 1 to represent photon loss; sampling always renormalises.

The critically damped cavity (kappa = 4g) has the closed-form density
C(t, g) = 4 g^3 t^2 exp(-2 g t) for t > 0, which is the Gamma(3, 2g)
shape.  Arbitrary calibrated profiles are supported through tabulation
(linear interpolation inside the grid, zero outside).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ProfileError, QuadratureError

_CDF_TABLE_SIZE = 8193


@dataclass(frozen=True)
class CavityParams:
    """Jaynes-Cummings coupling strength and cavity leakage rate."""

    g: float
    kappa: float

    def __post_init__(self):
        if not (np.isfinite(self.g) and self.g > 0):
            raise ProfileError(f"coupling strength must be positive and finite, got {self.g}")
        if not (np.isfinite(self.kappa) and self.kappa > 0):
            raise ProfileError(f"cavity leakage rate must be positive and finite, got {self.kappa}")

    @property
    def critically_damped(self) -> bool:
        return bool(np.isclose(self.kappa, 4.0 * self.g))


def critically_damped_density(g: float, t):
    """Density 4 g^3 t^2 exp(-2 g t) with a Heaviside cutoff at t = 0.

    Accepts scalar or ndarray t; rejects non-finite input.
    """
    if not (np.isfinite(g) and g > 0):
        raise ProfileError(f"coupling strength must be positive and finite, got {g}")
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ProfileError("non-finite time passed to critically_damped_density")
    out = np.where(t > 0, 4.0 * g**3 * t**2 * np.exp(-2.0 * g * np.where(t > 0, t, 0.0)), 0.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------

class LeakageProfile:
    """Base class: a calibrated emission density P(t) with mass in (0, 1]."""

    def density(self, t):
        raise NotImplementedError

    @property
    def total_mass(self) -> float:
        raise NotImplementedError

    @property
    def t_max(self) -> float:
        """Truncation point: integrated tail mass beyond it is < 1e-12."""
        raise NotImplementedError

    @cached_property
    def _inverse_cdf_table(self):
        t = np.linspace(0.0, self.t_max, _CDF_TABLE_SIZE)
        p = self.density(t)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(t))])
        if cdf[-1] <= 0.0:
            raise ProfileError("cannot sample from a zero-mass profile")
        return t, cdf / cdf[-1]

    def sample(self, rng: np.random.Generator, size=None):
        """Draw times from the renormalised density via the tabulated inverse CDF."""
        t, cdf = self._inverse_cdf_table
        u = rng.random(size)
        return np.interp(u, cdf, t)

    def cdf(self, t):
        """Renormalised cumulative distribution, linear between table nodes."""
        grid, cdf = self._inverse_cdf_table
        return np.interp(t, grid, cdf)

    def inverse_cdf(self, u):
        """Quantile function of the renormalised density (tabulated)."""
        grid, cdf = self._inverse_cdf_table
        return np.interp(u, cdf, grid)


class CriticallyDamped(LeakageProfile):
    """Closed-form critically damped cavity profile, unit mass."""

    def __init__(self, g: float):
        if not (np.isfinite(g) and g > 0):
            raise ProfileError(f"coupling strength must be positive and finite, got {g}")
        self.g = float(g)

    def density(self, t):
        return critically_damped_density(self.g, t)

    @property
    def total_mass(self) -> float:
        return 1.0

    @property
    def t_max(self) -> float:
        # Gamma(3, 2g) survival at t = 20/g is ~4e-15.
        return 20.0 / self.g

    def __repr__(self):
        return f"CriticallyDamped(g={self.g})"


class Tabulated(LeakageProfile):
    """Profile given on a strictly ascending time grid starting at 0.

    Linear interpolation between grid points, implicit zero outside.
    """

    def __init__(self, times, densities):
        times = np.asarray(times, dtype=float)
        densities = np.asarray(densities, dtype=float)
        if times.ndim != 1 or times.shape != densities.shape or times.size < 2:
            raise ProfileError("tabulated profile needs matching 1-d time/density arrays of length >= 2")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(densities))):
            raise ProfileError("tabulated profile contains non-finite entries")
        if times[0] != 0.0:
            raise ProfileError("tabulated time grid must start at 0")
        if np.any(np.diff(times) <= 0):
            raise ProfileError("tabulated time grid must be strictly ascending")
        if np.any(densities < 0):
            raise ProfileError("tabulated densities must be non-negative")
        mass = float(np.trapezoid(densities, times))
        if mass <= 0.0:
            raise ProfileError("tabulated profile has zero mass")
        if mass > 1.0 + 1e-9:
            raise ProfileError(f"tabulated profile mass {mass} exceeds 1")
        self.times = times
        self.densities = densities
        self._mass = min(mass, 1.0)

    def density(self, t):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.times, self.densities, left=0.0, right=0.0)
        return float(out) if out.ndim == 0 else out

    @property
    def total_mass(self) -> float:
        return self._mass

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    def __repr__(self):
        return f"Tabulated({self.times.size} points, mass={self._mass:.6g})"


def tabulate_profile(profile: LeakageProfile, points: int = 4097) -> Tabulated:
    """Sample any profile onto a uniform grid (used by calibration output)."""
    t = np.linspace(0.0, profile.t_max, points)
    return Tabulated(t, profile.density(t))


def load_profile_csv(path) -> Tabulated:
    """Load a two-column `time,density` CSV (UTF-8, header row required)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ProfileError(f"{path}: empty profile file") from None
        if [h.strip().lower() for h in header[:2]] != ["time", "density"]:
            raise ProfileError(f"{path}: expected header 'time,density', got {header!r}")
        times, densities = [], []
        for row in reader:
            if not row:
                continue
            try:
                times.append(float(row[0]))
                densities.append(float(row[1]))
            except (ValueError, IndexError):
                raise ProfileError(f"{path}: malformed row {row!r}") from None
    return Tabulated(times, densities)


def save_profile_csv(profile: LeakageProfile, path, points: int = 4097) -> None:
    """Write a profile as a `time,density` CSV with 17-significant-digit floats."""
    t = np.linspace(0.0, profile.t_max, points)
    p = profile.density(t)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("time,density\n")
        for ti, pi in zip(t, p):
            fh.write(f"{ti:.17g},{pi:.17g}\n")


def sample_time(profile: LeakageProfile, rng: np.random.Generator) -> float:
    """Draw one click time from the renormalised profile."""
    return float(profile.sample(rng))


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureSettings:
    """Composite-Simpson settings: uniform grid on [0, t_max]^d.

    panel_count is the starting panel number per axis; panels double until
    the value agrees with the half-resolution grid to relative_tolerance.
    """

    relative_tolerance: float = 1e-8
    t_max: float = 2.0
    panel_count: int = 64

    def __post_init__(self):
        if not (0.0 < self.relative_tolerance <= 1e-3):
            raise QuadratureError(f"relative_tolerance must lie in (0, 1e-3], got {self.relative_tolerance}")
        if not (np.isfinite(self.t_max) and self.t_max > 0):
            raise QuadratureError(f"t_max must be positive and finite, got {self.t_max}")
        if self.panel_count < 2 or self.panel_count % 2:
            raise QuadratureError(f"panel_count must be a positive even integer, got {self.panel_count}")


def settings_for(*profiles: LeakageProfile, relative_tolerance: float = 1e-9,
                 panel_count: int = 64) -> QuadratureSettings:
    """Settings whose window covers every given profile's support."""
    t_max = max(p.t_max for p in profiles)
    return QuadratureSettings(relative_tolerance=relative_tolerance, t_max=t_max, panel_count=panel_count)


def _simpson_weights(n: int) -> np.ndarray:
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w


def _simpson_value(f, t_max: float, n: int, ndim: int) -> float:
    t = np.linspace(0.0, t_max, n + 1)
    h = t_max / n
    w = _simpson_weights(n) * (h / 3.0)
    if ndim == 1:
        vals = np.asarray(f(t), dtype=float)
        if vals.shape != t.shape:
            raise QuadratureError("1-d integrand must return an array matching its input grid")
        return float(np.dot(w, vals))
    # sparse grids: the integrand must broadcast (t1 is a column, t2 a row)
    vals = np.asarray(f(t[:, None], t[None, :]), dtype=float)
    if vals.shape != (t.size, t.size):
        vals = np.broadcast_to(vals, (t.size, t.size))
    return float(w @ vals @ w)


_MAX_PANELS = {1: 1 << 20, 2: 1 << 12}


def integrate(f, settings: QuadratureSettings, ndim: int = 1) -> float:
    """Deterministic integral of f over [0, t_max]^ndim to relative_tolerance.

    f must be vectorised: for ndim=1 it maps an array of times to densities,
    for ndim=2 it maps two meshgrid arrays (t1, t2) to values.  Panels double
    until successive Simpson grids agree; exceeding the panel budget raises
    QuadratureError.
    """
    if ndim not in (1, 2):
        raise QuadratureError(f"only 1-d and 2-d integrals are supported, got ndim={ndim}")
    n = settings.panel_count
    prev = _simpson_value(f, settings.t_max, n, ndim)
    while n <= _MAX_PANELS[ndim]:
        n *= 2
        cur = _simpson_value(f, settings.t_max, n, ndim)
        scale = max(abs(cur), abs(prev), 1e-300)
        if abs(cur - prev) <= settings.relative_tolerance * scale:
            return cur
        prev = cur
    raise QuadratureError(
        f"{ndim}-d quadrature did not reach rtol={settings.relative_tolerance} within {n} panels"
    )


def overlap_integral(pa: LeakageProfile, pb: LeakageProfile,
                     settings: QuadratureSettings | None = None) -> float:
    """Bhattacharyya overlap of two profiles, int sqrt(P_A P_B) dt in [0, 1].

    Equals 8 (g_A g_B)^{3/2} / (g_A + g_B)^3 for two critically damped
    profiles; 1 exactly when the profiles coincide.
    """
    if settings is None:
        settings = settings_for(pa, pb)

    def integrand(t):
        return np.sqrt(pa.density(t) * pb.density(t))

    return integrate(integrand, settings, ndim=1)
