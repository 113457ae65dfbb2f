"""Gate-quality expectations, series machinery, and the strategy comparison.

With X and Y the joint click-density terms (see heralding), one double
heralding application has gate fidelity excess F = sqrt(X Y) / (X + Y)
(the state fidelity is f = 1/2 + F), and

    E(F)   = sqrt(Theta_1 Theta_2) (int sqrt(P_A P_B) dt)^2
    E(F^2) = int int Theta_1 Theta_2 U V / (Theta_1 U + Theta_2 V) dt1 dt2

with U = P_A(t1) P_B(t2), V = P_B(t1) P_A(t2).  E(F^2) admits alternating
series in either of two tilt regions,

    E(F^2) = Theta_pre sum_n (-1)^n K^n I_n,      K = Theta_pre/Theta_other - 1,
    I_n = int int (U V/(U+V)) (V/(U+V))^n dt1 dt2,

convergent where |K| < 1 (the R_I region tan^2 theta_b < 2 tan^2 theta_a
carries prefactor Theta_1, R_J the mirror image); I_1 = I_0 / 2 makes the
first-order form Theta_L (1 - K/2) I_0 integration-free up to I_0.

Distribution-level quantities (the fidelity histogram and the post-selection
comparison) integrate over the exact product-measure mixture decomposition
of Q12 in profile-CDF coordinates, where every midpoint cell carries equal
mass; a uniform grid of a few thousand nodes per axis resolves the 1e-4
fidelity window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import QuadratureError
from .heralding import big_thetas
from .leakage import LeakageProfile, QuadratureSettings, overlap_integral, settings_for

MAX_F = 0.5


@dataclass(frozen=True)
class ExpectationResult:
    value: float
    method: str
    estimated_error: float


@dataclass(frozen=True)
class SeriesTerms:
    i_values: tuple
    region: str              # "R_I" (prefactor Theta_1) or "R_J" (Theta_2)


@dataclass(frozen=True)
class FidelityHistogram:
    edges: np.ndarray
    masses: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())


@dataclass(frozen=True)
class ComparisonReport:
    """First-attempt comparison of post-selection against the adaptive strategy.

    p_outside_window is the full first-attempt success probability of the
    adaptive strategy, counting within-window segments as deterministic
    successes; p_outside_only is the plain out-of-window contribution (it
    vanishes as the window grows).
    """

    p_postselect: float
    p_outside_window: float
    p_total: float
    p_outside_only: float
    epsilon: float
    mode: str


# ---------------------------------------------------------------------------
# Expectations
# ---------------------------------------------------------------------------

def expected_f(theta_a: float, theta_b: float, pa: LeakageProfile, pb: LeakageProfile,
               settings: QuadratureSettings | None = None) -> ExpectationResult:
    """Closed form for E(F): the tilt factor times the profile overlap squared."""
    if settings is None:
        settings = settings_for(pa, pb)
    th1, th2 = big_thetas(theta_a, theta_b)
    ov = overlap_integral(pa, pb, settings)
    value = math.sqrt(th1 * th2) * ov**2
    return ExpectationResult(value, "closed-form", 2.0 * settings.relative_tolerance * value)


def _gauss_nodes(n: int, t_max: float):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * t_max * (x + 1.0), 0.5 * t_max * w


def _efsq_pass(theta1: float, theta2: float, pa, pb, n: int, t_max: float) -> float:
    t, w = _gauss_nodes(n, t_max)
    da, db = pa.density(t), pb.density(t)
    u = np.outer(da, db)
    v = u.T
    denom = theta1 * u + theta2 * v
    with np.errstate(invalid="ignore", divide="ignore"):
        vals = np.where(denom > 0.0, theta1 * theta2 * u * v / np.where(denom > 0, denom, 1.0), 0.0)
    return float(w @ vals @ w)


def expected_f_sq(theta_a: float, theta_b: float, pa: LeakageProfile, pb: LeakageProfile,
                  settings: QuadratureSettings | None = None) -> ExpectationResult:
    """Direct 2-d quadrature of E(F^2).

    Gauss-Legendre nodes (the integrand is analytic on the truncated square),
    doubling deterministically until two resolutions agree.
    """
    if settings is None:
        settings = settings_for(pa, pb, relative_tolerance=1e-9)
    th1, th2 = big_thetas(theta_a, theta_b)
    if th1 == 0.0 or th2 == 0.0:
        return ExpectationResult(0.0, "quadrature", 0.0)
    n = max(settings.panel_count, 64)
    prev = _efsq_pass(th1, th2, pa, pb, n, settings.t_max)
    while n <= 1024:
        n *= 2
        cur = _efsq_pass(th1, th2, pa, pb, n, settings.t_max)
        if abs(cur - prev) <= settings.relative_tolerance * max(abs(cur), 1e-300):
            return ExpectationResult(cur, "quadrature", abs(cur - prev))
        prev = cur
    raise QuadratureError("E(F^2) quadrature did not converge within the panel budget")


def _moment_pass(pa, pb, max_order: int, n: int, t_max: float, numerator: str) -> np.ndarray:
    t, w = _gauss_nodes(n, t_max)
    da, db = pa.density(t), pb.density(t)
    u = np.outer(da, db)
    v = u.T
    s = u + v
    with np.errstate(invalid="ignore", divide="ignore"):
        base = np.where(s > 0.0, u * v / np.where(s > 0, s, 1.0), 0.0)
        frac = np.where(s > 0.0, (v if numerator == "V" else u) / np.where(s > 0, s, 1.0), 0.0)
    out = np.empty(max_order + 1)
    cur = base
    for k in range(max_order + 1):
        out[k] = float(w @ cur @ w)
        if k < max_order:
            cur = cur * frac
    return out


def series_moments(pa: LeakageProfile, pb: LeakageProfile, max_order: int,
                   settings: QuadratureSettings | None = None, numerator: str = "V") -> np.ndarray:
    """I_n (numerator "V") or J_n (numerator "U") moments up to max_order."""
    if settings is None:
        settings = settings_for(pa, pb, relative_tolerance=1e-9)
    n = max(settings.panel_count, 64)
    prev = _moment_pass(pa, pb, max_order, n, settings.t_max, numerator)
    while n <= 1024:
        n *= 2
        cur = _moment_pass(pa, pb, max_order, n, settings.t_max, numerator)
        if np.all(np.abs(cur - prev) <= settings.relative_tolerance * np.maximum(np.abs(cur), 1e-300)):
            return cur
        prev = cur
    raise QuadratureError("series moments did not converge within the panel budget")


def _series_region(theta_a: float, theta_b: float) -> tuple[str, float, float]:
    th1, th2 = big_thetas(theta_a, theta_b)
    if th1 == 0.0 or th2 == 0.0:
        raise QuadratureError("degenerate tilts lie outside both series regions")
    k_i = th1 / th2 - 1.0
    k_j = th2 / th1 - 1.0
    candidates = [("R_I", th1, k_i), ("R_J", th2, k_j)]
    valid = [c for c in candidates if abs(c[2]) < 1.0]
    if not valid:
        raise QuadratureError(
            f"tilts ({theta_a:.4g}, {theta_b:.4g}) lie outside both series regions (|K| >= 1)")
    return min(valid, key=lambda c: abs(c[2]))


def efsq_series(theta_a: float, theta_b: float, pa: LeakageProfile, pb: LeakageProfile,
                order: int, settings: QuadratureSettings | None = None
                ) -> tuple[ExpectationResult, SeriesTerms]:
    """Alternating-series evaluation of E(F^2) in the better-converging region."""
    region, prefactor, k = _series_region(theta_a, theta_b)
    moments = series_moments(pa, pb, order, settings)
    powers = (-k) ** np.arange(order + 1)
    value = float(prefactor * np.dot(powers, moments))
    tail = prefactor * abs(k) ** (order + 1) * moments[-1] / max(1.0 - abs(k), 1e-12)
    return (ExpectationResult(value, f"series{order}", tail),
            SeriesTerms(tuple(moments), region))


def efsq_first_order(theta_a: float, theta_b: float, pa: LeakageProfile, pb: LeakageProfile,
                     settings: QuadratureSettings | None = None) -> ExpectationResult:
    """First-order form Theta_L (1 - K/2) I_0, exact on the diagonal.

    Up to the constant I_0 this is independent of the leakage profiles
    (I_1 = I_0/2 needs no extra integration).
    """
    th1, th2 = big_thetas(theta_a, theta_b)
    th_l, th_s = max(th1, th2), min(th1, th2)
    if th_s == 0.0:
        return ExpectationResult(0.0, "series1", 0.0)
    i0 = float(series_moments(pa, pb, 0, settings)[0])
    k = th_l / th_s - 1.0
    value = th_l * (1.0 - 0.5 * k) * i0
    return ExpectationResult(value, "series1", abs(th_l * 0.5 * k**2 * i0))


# ---------------------------------------------------------------------------
# Distribution-level quantities
# ---------------------------------------------------------------------------

def _mixture_cells(theta_a, theta_b, pa, pb, nodes):
    """Yield (F values, per-cell mass) for both product-measure components."""
    th1, th2 = big_thetas(theta_a, theta_b)
    u = (np.arange(nodes) + 0.5) / nodes
    for p1, p2, th in ((pa, pb, th1), (pb, pa, th2)):
        if th == 0.0:
            continue
        t1 = p1.inverse_cdf(u)
        t2 = p2.inverse_cdf(u)
        x = th1 * np.outer(pa.density(t1), pb.density(t2))
        y = th2 * np.outer(pb.density(t1), pa.density(t2))
        s = x + y
        with np.errstate(invalid="ignore", divide="ignore"):
            f = np.where(s > 0.0, np.sqrt(x * y) / np.where(s > 0, s, 1.0), 0.0)
        cell = th * p1.total_mass * p2.total_mass / nodes**2
        yield f.ravel(), cell


def fidelity_histogram(theta_a: float, theta_b: float, pa: LeakageProfile, pb: LeakageProfile,
                       bins: int = 200, nodes: int = 1500) -> FidelityHistogram:
    """Mass of each F-bin under the joint click density (sub-normalised)."""
    if bins < 10:
        raise QuadratureError(f"need at least 10 fidelity bins, got {bins}")
    edges = np.linspace(0.0, MAX_F, bins + 1)
    masses = np.zeros(bins)
    for f, cell in _mixture_cells(theta_a, theta_b, pa, pb, nodes):
        hist, _ = np.histogram(np.clip(f, 0.0, MAX_F), bins=edges)
        masses += hist * cell
    return FidelityHistogram(edges, masses)


def window_mass(theta_a: float, theta_b: float, pa: LeakageProfile, pb: LeakageProfile,
                epsilon: float, nodes: int = 2000) -> float:
    """Probability of a first-attempt fidelity inside the acceptance window."""
    total = 0.0
    for f, cell in _mixture_cells(theta_a, theta_b, pa, pb, nodes):
        total += cell * int(np.count_nonzero(f > MAX_F - epsilon))
    return total


def first_attempt_success(f, mode: str):
    """Probability that a merge/bridge of fidelity excess F succeeds first try.

    3f2 mode: the 3 F^2 approximation; exact mode: the method-(ii) outcome
    tree 2F^2 + 2F^4/(1-2F^2).
    """
    f = np.asarray(f, dtype=float)
    if mode == "3f2":
        out = 3.0 * f**2
    elif mode == "exact":
        out = 2.0 * f**2 + 2.0 * f**4 / (1.0 - np.minimum(2.0 * f**2, 0.5))
    else:
        raise QuadratureError(f"unknown comparison mode {mode!r}")
    return float(out) if out.ndim == 0 else out


def compare_strategies(pa: LeakageProfile, pb: LeakageProfile, epsilon: float,
                       mode: str = "3f2", theta_a: float = math.pi / 4,
                       theta_b: float = math.pi / 4, nodes: int = 2000) -> ComparisonReport:
    """Post-selection versus adaptive growth on the first merge/bridge attempt.

    p_postselect is the window mass; p_outside_window adds the out-of-window
    first-attempt successes to it; p_total is their sum.
    """
    if epsilon <= 0.0:
        raise QuadratureError(f"window width must be positive, got {epsilon}")
    first_attempt_success(0.0, mode)
    p_post = 0.0
    p_out = 0.0
    for f, cell in _mixture_cells(theta_a, theta_b, pa, pb, nodes):
        win = f > MAX_F - epsilon
        p_post += cell * int(np.count_nonzero(win))
        p_out += cell * float(first_attempt_success(f[~win], mode).sum())
    p_outside_window = p_post + p_out
    return ComparisonReport(p_post, p_outside_window, p_post + p_outside_window,
                            p_out, epsilon, mode)


def resource_ratio(p_gate: float, n: float) -> float:
    """Overhead factor p^(-log n) (natural logarithm), for relative reporting."""
    if not (0.0 < p_gate <= 1.0):
        raise QuadratureError(f"gate probability must lie in (0, 1], got {p_gate}")
    if not n > 1.0:
        raise QuadratureError(f"computation size must exceed 1, got {n}")
    return p_gate ** (-math.log(n))


def fidelity_value(theta_a: float, theta_b: float, pa: LeakageProfile, pb: LeakageProfile,
                   t1, t2):
    """F = sqrt(XY)/(X+Y) at given click times (vectorised)."""
    th1, th2 = big_thetas(theta_a, theta_b)
    x = th1 * pa.density(t1) * pb.density(t2)
    y = th2 * pb.density(t1) * pa.density(t2)
    s = x + y
    out = np.where(np.asarray(s) > 0.0, np.sqrt(x * y) / np.where(np.asarray(s) > 0, s, 1.0), 0.0)
    return float(out) if np.ndim(out) == 0 else out
