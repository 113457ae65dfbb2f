"""Double-heralding event model: click statistics and graph rewrites.

Click-time statistics for one double-heralding application between matter
qubits a and b with effective tilts theta_a, theta_b and calibrated leakage
densities P_A, P_B:

    Theta_1 = cos^2(theta_a) sin^2(theta_b)     X = Theta_1 P_A(t1) P_B(t2)
    Theta_2 = sin^2(theta_a) cos^2(theta_b)     Y = Theta_2 P_B(t1) P_A(t2)

    success probability   Theta_1 + Theta_2  (scaled by efficiency^2)
    round-one density     Q1(t1) = Theta_1 P_A(t1) + Theta_2 P_B(t1)
    joint density         Q12(t1, t2) = X + Y,   Q2 = Q12 / Q1
    resulting tilt        cos(theta_beta) = sqrt(Y / (X + Y))

The graph rewrites cover the three supported configurations of each side:
a fresh qubit, a member of a GHZ star, and a "Hadamard-removed" cherry (a
plain degree-one vertex hanging off a star centre).  Detector parity is a
known Z error and is corrected immediately by default; pass
correct_parity=False to keep it as a recorded z_phase for oracle tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GraphConfigError, ImpossibleStateError
from .leakage import LeakageProfile
from .tilted_graph import (
    QUARTER_PI,
    EdgeAnnotation,
    EdgeKind,
    TiltedGraph,
    Vertex,
    canonical_angle,
    is_ghz_star,
    star_center_id,
)

_TOL = 1e-12


# ---------------------------------------------------------------------------
# Click statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DhContext:
    """Tilts, profiles and detection efficiency of one DH application."""

    theta_a: float
    theta_b: float
    pa: LeakageProfile
    pb: LeakageProfile
    detection_efficiency: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "theta_a", canonical_angle(self.theta_a))
        object.__setattr__(self, "theta_b", canonical_angle(self.theta_b))
        if not (0.0 < self.detection_efficiency <= 1.0):
            raise GraphConfigError(
                f"detection efficiency must lie in (0, 1], got {self.detection_efficiency}")


@dataclass(frozen=True)
class ClickPair:
    """Detector click times of the two rounds."""

    t1: float
    t2: float

    def __post_init__(self):
        if not (self.t1 > 0 and self.t2 > 0):
            raise GraphConfigError(f"click times must be positive, got ({self.t1}, {self.t2})")


@dataclass(frozen=True)
class ClickLikelihood:
    """The X and Y terms of the joint click density."""

    x_term: float
    y_term: float


def big_thetas(theta_a: float, theta_b: float) -> tuple[float, float]:
    t1 = (math.cos(theta_a) * math.sin(theta_b)) ** 2
    t2 = (math.sin(theta_a) * math.cos(theta_b)) ** 2
    return t1, t2


def success_probability(theta_a: float, theta_b: float, detection_efficiency: float = 1.0) -> float:
    """Upper-bound DH success probability, scaled by efficiency^2 (two clicks)."""
    t1, t2 = big_thetas(theta_a, theta_b)
    return (t1 + t2) * detection_efficiency**2


def joint_terms(t1, t2, ctx: DhContext):
    """(X, Y) of the joint click density; t1, t2 may be arrays (broadcast)."""
    th1, th2 = big_thetas(ctx.theta_a, ctx.theta_b)
    x = th1 * ctx.pa.density(t1) * ctx.pb.density(t2)
    y = th2 * ctx.pb.density(t1) * ctx.pa.density(t2)
    return x, y


def click_likelihood(ctx: DhContext, clicks: ClickPair) -> ClickLikelihood:
    x, y = joint_terms(clicks.t1, clicks.t2, ctx)
    return ClickLikelihood(x_term=float(x), y_term=float(y))


def click_density_first(t1, ctx: DhContext):
    """Round-one click density Q1; integrates to the success probability.

    Accepts scalar or array t1.
    """
    th1, th2 = big_thetas(ctx.theta_a, ctx.theta_b)
    return th1 * ctx.pa.density(t1) + th2 * ctx.pb.density(t1)


def click_density_joint(clicks: ClickPair, ctx: DhContext) -> float:
    """Joint click density Q12 = X + Y."""
    like = click_likelihood(ctx, clicks)
    return like.x_term + like.y_term


def click_density_second(t2, t1: float, ctx: DhContext):
    """Conditional round-two density Q2(t2 | t1) = Q12 / Q1(t1)."""
    q1 = float(click_density_first(t1, ctx))
    if q1 <= 0.0:
        raise ImpossibleStateError(f"conditioning on Q1({t1}) = 0")
    x, y = joint_terms(t1, t2, ctx)
    return (x + y) / q1


def sample_clicks(ctx: DhContext, rng: np.random.Generator) -> ClickPair:
    """Draw (t1, t2) from Q12 conditioned on success.

    Q12 is the exact mixture Theta_1 P_A(t1) P_B(t2) + Theta_2 P_B(t1) P_A(t2),
    so pick the branch with probability Theta_1/(Theta_1 + Theta_2) and draw
    each time from the corresponding renormalised profile.
    """
    th1, th2 = big_thetas(ctx.theta_a, ctx.theta_b)
    if th1 + th2 <= 0.0:
        raise ImpossibleStateError("degenerate tilts: success probability is zero")
    if rng.random() < th1 / (th1 + th2):
        return ClickPair(float(ctx.pa.sample(rng)), float(ctx.pb.sample(rng)))
    return ClickPair(float(ctx.pb.sample(rng)), float(ctx.pa.sample(rng)))


def sample_clicks_array(ctx: DhContext, rng: np.random.Generator, n: int):
    """Vectorised sample_clicks: two arrays (t1s, t2s) of n success-conditioned draws."""
    th1, th2 = big_thetas(ctx.theta_a, ctx.theta_b)
    if th1 + th2 <= 0.0:
        raise ImpossibleStateError("degenerate tilts: success probability is zero")
    from_a = rng.random(n) < th1 / (th1 + th2)
    ta1, tb1 = ctx.pa.sample(rng, n), ctx.pb.sample(rng, n)
    ta2, tb2 = ctx.pb.sample(rng, n), ctx.pa.sample(rng, n)
    return np.where(from_a, ta1, ta2), np.where(from_a, tb1, tb2)


def tilt_after_dh(ctx: DhContext, clicks: ClickPair) -> float:
    """The resulting tilt: cos(theta_beta) = sqrt(Y/(X+Y)), in [0, pi/2]."""
    like = click_likelihood(ctx, clicks)
    if like.x_term <= 0.0 and like.y_term <= 0.0:
        raise ImpossibleStateError(
            f"both click likelihoods vanish at ({clicks.t1}, {clicks.t2}); tilt undefined")
    return math.atan2(math.sqrt(like.x_term), math.sqrt(like.y_term))


@dataclass(frozen=True)
class DhOutcome:
    """Success (tilt, clicks, detector parity) or failure of one application."""

    success: bool
    theta_beta: float | None = None
    clicks: ClickPair | None = None
    parity: int = 1

    @staticmethod
    def failure() -> "DhOutcome":
        return DhOutcome(False)


def sample_dh(ctx: DhContext, rng: np.random.Generator) -> DhOutcome:
    """Sample one full DH application (success flag, clicks, tilt, parity)."""
    p = success_probability(ctx.theta_a, ctx.theta_b, ctx.detection_efficiency)
    if rng.random() >= p:
        return DhOutcome.failure()
    clicks = sample_clicks(ctx, rng)
    parity = 1 if rng.random() < 0.5 else -1
    return DhOutcome(True, tilt_after_dh(ctx, clicks), clicks, parity)


# ---------------------------------------------------------------------------
# Graph rewrites
# ---------------------------------------------------------------------------

FRESH = "fresh"
GHZ = "ghz"
CHERRY = "cherry"


@dataclass(frozen=True)
class SideInfo:
    """Classification of one DH side."""

    config: str
    qubit: int
    component: frozenset
    center: int            # star centre (ghz) / remnant centre (cherry) / the qubit itself
    theta_eff: float       # effective tilt fed to the click statistics
    branch_sign: int       # relative sign of the side's two branches from z(pi) flags


def _z_pi_count(g: TiltedGraph, vids) -> int:
    count = 0
    for vid in vids:
        v = g.vertex(vid)
        if abs(v.z_phase) < _TOL:
            continue
        if abs(v.z_phase - math.pi) < _TOL:
            if v.hadamard:
                raise GraphConfigError(f"vertex {vid}: z(pi) under a Hadamard flag is unsupported here")
            count += 1
        else:
            raise GraphConfigError(f"vertex {vid}: z_phase {v.z_phase:.6g} unsupported in a DH component")
    return count


def _effective_tilt(tilt: float, flip: bool, z_flips: int) -> tuple[float, int]:
    """(theta_eff in [0, pi/2], relative branch sign) of a side's amplitudes."""
    alpha, beta = math.cos(tilt), math.sin(tilt)
    if flip:
        alpha, beta = beta, alpha
    if z_flips % 2:
        beta = -beta
    sign = -1 if alpha * beta < 0 else 1
    return math.atan2(abs(beta), abs(alpha)), sign


def classify_dh_side(g: TiltedGraph, q: int) -> SideInfo:
    """Match one side against the three supported configurations."""
    v = g.vertex(q)
    comp = g.component_of(q)
    if len(comp) == 1:
        if v.hadamard:
            raise GraphConfigError(f"fresh qubit {q} may not carry a Hadamard flag")
        theta, sign = _effective_tilt(v.tilt, v.x_flip, _z_pi_count(g, [q]))
        return SideInfo(FRESH, q, comp, q, theta, sign)
    # a plain degree-one vertex hanging off its node by a pure edge: the
    # "Hadamard-removed" cherry case (the node behind it may be any graph);
    # a proper two-qubit GHZ star stays a GHZ member instead
    if not v.hadamard and not v.x_flip and g.degree(q) == 1:
        (nb,) = g.neighbors(q)
        if not g.vertex(nb).hadamard and g.edge(q, nb).kind is EdgeKind.PURE:
            if len(comp) > 2 or not is_ghz_star(g, comp):
                theta, sign = _effective_tilt(v.tilt, False, _z_pi_count(g, [q]))
                return SideInfo(CHERRY, q, comp, nb, theta, sign)
    # a member (centre or Hadamard leaf) of a GHZ star
    center = star_center_id(g, comp)
    theta, sign = _effective_tilt(g.vertex(center).tilt, v.x_flip, _z_pi_count(g, comp))
    return SideInfo(GHZ, q, comp, center, theta, sign)


def _check_pairing(a: SideInfo, b: SideInfo) -> None:
    """Two cherry-configured sides may already be linked by prior annotations
    (recycled entanglement, which is diagonal and commutes with the click
    analysis); every other configuration needs disjoint components."""
    if a.qubit == b.qubit or a.center == b.center:
        raise GraphConfigError(f"qubits {a.qubit}, {b.qubit} do not head distinct nodes")
    if a.component == b.component and {a.config, b.config} != {CHERRY}:
        raise GraphConfigError(
            f"qubits {a.qubit}, {b.qubit} share a component; DH needs distinct pieces")


def dh_context(g: TiltedGraph, qa: int, qb: int, pa: LeakageProfile, pb: LeakageProfile,
               detection_efficiency: float = 1.0) -> DhContext:
    """Context for a DH application between supported graph qubits."""
    a, b = classify_dh_side(g, qa), classify_dh_side(g, qb)
    _check_pairing(a, b)
    return DhContext(a.theta_eff, b.theta_eff, pa, pb, detection_efficiency)


def _ghz_member_flip(g: TiltedGraph, vid: int) -> bool:
    return g.vertex(vid).x_flip


def _rewrite_ghz_success(g: TiltedGraph, a: SideInfo, b: SideInfo,
                         theta_beta: float, sign: int) -> TiltedGraph:
    """Fuse two GHZ stars into one (the Eq.-12-style 2n-qubit tilted GHZ).

    The new centre is the first side's qubit with tilt theta_beta; the branch
    matching the Y term maps to all-zeros, which puts X-flip corrections on
    the partner qubit, on the first side's other members (XOR their previous
    flips and the used qubit's), and symmetrically on the second side.
    """
    fa = _ghz_member_flip(g, a.qubit)
    fb = _ghz_member_flip(g, b.qubit)
    out = g.without_vertices(a.component | b.component)
    vertices = [Vertex(a.qubit, theta_beta, z_phase=math.pi if sign < 0 else 0.0)]
    edges = []
    for vid in sorted((a.component | b.component) - {a.qubit}):
        if vid == b.qubit:
            flip = True
        elif vid in a.component:
            flip = (not fa) ^ _ghz_member_flip(g, vid)
        else:
            flip = fb ^ _ghz_member_flip(g, vid)
        vertices.append(Vertex(vid, QUARTER_PI, hadamard=True, x_flip=flip))
        edges.append((a.qubit, vid, EdgeAnnotation.pure()))
    merged = TiltedGraph(list(out.vertices()) + vertices, list(out.edges()) + edges)
    return merged


def _rewrite_cherry_success(g: TiltedGraph, a: SideInfo, b: SideInfo,
                            theta_beta: float, sign: int) -> TiltedGraph:
    """Install the central tilted vertex with its cherry between the two nodes.

    Corrections (derived against the constructive target and checked by the
    state-vector oracle): X on the partner qubit, Z(pi) on the first node's
    centre, Z(pi) parity on the new central vertex.
    """
    out = g.without_vertices([a.qubit, b.qubit])
    central = Vertex(a.qubit, theta_beta, z_phase=math.pi if sign < 0 else 0.0)
    cherry = Vertex(b.qubit, QUARTER_PI, hadamard=True).append_x()
    vertices = list(out.vertices()) + [central, cherry]
    edges = list(out.edges()) + [
        (a.qubit, b.qubit, EdgeAnnotation.pure()),
        (a.qubit, a.center, EdgeAnnotation.pure()),
        (a.qubit, b.center, EdgeAnnotation.pure()),
    ]
    merged = TiltedGraph(vertices, edges)
    return merged.map_vertex(a.center, lambda v: v.append_z(math.pi))


def apply_dh_to_graph(g: TiltedGraph, qa: int, qb: int, outcome: DhOutcome,
                      correct_parity: bool = True) -> TiltedGraph:
    """Rewrite the graph for one DH outcome between qubits qa and qb.

    Success fuses the two components according to their configuration;
    failure Z-measures the used qubits (collapsing GHZ components to
    separable states, which are dropped, and trimming cherry-configured
    nodes by their used qubit only).  Measurement byproducts of the removals
    are corrected immediately.
    """
    a, b = classify_dh_side(g, qa), classify_dh_side(g, qb)
    _check_pairing(a, b)

    if not outcome.success:
        removed = set()
        for side in (a, b):
            removed |= {side.qubit} if side.config == CHERRY else set(side.component)
        return g.without_vertices(removed)

    sign = outcome.parity * a.branch_sign * b.branch_sign
    configs = {a.config, b.config}
    if configs <= {FRESH, GHZ}:
        merged = _rewrite_ghz_success(g, a, b, outcome.theta_beta, sign)
    elif configs == {CHERRY}:
        merged = _rewrite_cherry_success(g, a, b, outcome.theta_beta, sign)
    else:
        raise GraphConfigError(
            f"unsupported DH configuration pair: {a.config} with {b.config}")
    if correct_parity:
        merged = merged.map_vertex(a.qubit, lambda v: v.append_z(-v.z_phase))
    return merged
