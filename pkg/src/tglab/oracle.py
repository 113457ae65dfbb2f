"""Brute-force references for the rest of the package.

Two independent oracles:

* a dense state-vector simulator that builds tilted graphs constructively
  (preparations, control-Z, weighted-edge and partial-fusion operators,
  recorded local corrections) and performs rotated computational-basis
  measurements;

* a quantum-trajectory integrator for two atom-cavity systems under the
  non-Hermitian conditional Hamiltonian
      H_x = g_x (|e><0| a + |0><e| a^dag) - (i/2) kappa_x a^dag a
  with beam-splitter jump operators
      J_pm = sqrt(kappa_A/2) a pm sqrt(kappa_B/2) b,
  which replays a full double-heralding application (click, decay, X flips,
  re-excitation, click) and reports the resulting matter-qubit tilt and the
  joint click density.

Both are deliberately naive: fixed-step RK4, dense amplitudes, a 14-qubit
cap.  They exist to arbitrate every analytic formula in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GraphConfigError, ImpossibleStateError, TrajectoryError
from .leakage import CavityParams
from .tilted_graph import EdgeKind, TiltedGraph

QUBIT_CAP = 14

_H_GATE = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)
_X_GATE = np.array([[0, 1], [1, 0]], dtype=complex)


# ---------------------------------------------------------------------------
# Dense state vectors
# ---------------------------------------------------------------------------

class StateVector:
    """Dense amplitudes over an ordered tuple of qubit ids."""

    __slots__ = ("qubit_ids", "amps")

    def __init__(self, qubit_ids, amps):
        self.qubit_ids = tuple(qubit_ids)
        n = len(self.qubit_ids)
        if n > QUBIT_CAP:
            raise GraphConfigError(f"{n} qubits exceeds the {QUBIT_CAP}-qubit oracle cap")
        self.amps = np.asarray(amps, dtype=complex).reshape((2,) * n)

    @property
    def qubit_count(self) -> int:
        return len(self.qubit_ids)

    def axis(self, qubit) -> int:
        try:
            return self.qubit_ids.index(qubit)
        except ValueError:
            raise GraphConfigError(f"qubit {qubit} not in state") from None

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def copy(self) -> "StateVector":
        return StateVector(self.qubit_ids, self.amps.copy())

    def apply_single(self, qubit, gate) -> "StateVector":
        ax = self.axis(qubit)
        a = np.moveaxis(self.amps, ax, 0)
        gate = np.asarray(gate, dtype=complex)
        new = np.moveaxis(np.tensordot(gate, a, axes=([1], [0])), 0, ax)
        return StateVector(self.qubit_ids, new)

    def apply_diag_pair(self, qa, qb, even: complex, odd: complex) -> "StateVector":
        """Multiply amplitudes by `even` on Z_a Z_b = +1 and `odd` on -1."""
        i, j = self.axis(qa), self.axis(qb)
        amps = self.amps.copy()
        za = 1 - 2 * _axis_bits(self.qubit_count, i)
        zb = 1 - 2 * _axis_bits(self.qubit_count, j)
        amps *= np.where(za * zb > 0, complex(even), complex(odd))
        return StateVector(self.qubit_ids, amps)

    def apply_cz(self, qa, qb) -> "StateVector":
        i, j = self.axis(qa), self.axis(qb)
        amps = self.amps.copy()
        idx = [slice(None)] * self.qubit_count
        idx[i] = 1
        idx[j] = 1
        amps[tuple(idx)] *= -1.0
        return StateVector(self.qubit_ids, amps)


def _axis_bits(n: int, axis: int) -> np.ndarray:
    bits = np.zeros((2,) * n, dtype=np.int8)
    idx = [slice(None)] * n
    idx[axis] = 1
    bits[tuple(idx)] = 1
    return bits


def build_state(g: TiltedGraph) -> StateVector:
    """Constructive state of a tilted graph (see tilted_graph's contract).

    Preparations, then control-Z edges, then U/P annotations (P followed by
    renormalisation), then the per-vertex corrections H, X, Z(phase).
    """
    ids = g.vertex_ids
    if not ids:
        raise GraphConfigError("cannot build the state of an empty graph")
    state = StateVector(ids[:1], np.array([math.cos(g.vertex(ids[0]).tilt),
                                           math.sin(g.vertex(ids[0]).tilt)]))
    for vid in ids[1:]:
        t = g.vertex(vid).tilt
        amps = np.multiply.outer(state.amps, np.array([math.cos(t), math.sin(t)], dtype=complex))
        state = StateVector(state.qubit_ids + (vid,), amps)
    has_fusion = False
    for a, b, annot in g.edges():
        if annot.kind is EdgeKind.PURE:
            state = state.apply_cz(a, b)
        elif annot.kind is EdgeKind.WEIGHTED:
            e = complex(math.cos(annot.phi), math.sin(annot.phi))
            state = state.apply_diag_pair(a, b, e, e.conjugate())
        else:
            c, s = math.cos(annot.phi), math.sin(annot.phi)
            state = state.apply_diag_pair(a, b, c + s, c - s)
            has_fusion = True
    if has_fusion:
        n = state.norm()
        if n < 1e-12:
            raise ImpossibleStateError("partial fusions annihilated the state")
        state.amps /= n
    for v in g.vertices():
        if v.hadamard:
            state = state.apply_single(v.id, _H_GATE)
        if v.x_flip:
            state = state.apply_single(v.id, _X_GATE)
        if v.z_phase:
            state = state.apply_single(v.id, np.diag([1.0, np.exp(1j * v.z_phase)]))
    return state


def overlap(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2 with qubit-id alignment."""
    if set(a.qubit_ids) != set(b.qubit_ids):
        raise GraphConfigError("states are over different qubit sets")
    amps_b = b.amps
    if a.qubit_ids != b.qubit_ids:
        perm = [b.qubit_ids.index(q) for q in a.qubit_ids]
        amps_b = np.transpose(amps_b, perm)
    return abs(np.vdot(a.amps, amps_b)) ** 2


@dataclass(frozen=True)
class MeasurementRecord:
    """One rotated computational-basis measurement."""

    qubit: int
    rotation: np.ndarray
    outcome: int
    probability: float


def project(state: StateVector, qubit, outcome: int, pre_rotation=None) -> tuple[float, StateVector]:
    """Deterministically project; returns (Born probability, reduced state).

    The measured qubit is traced out of the returned state.
    """
    work = state if pre_rotation is None else state.apply_single(qubit, pre_rotation)
    ax = work.axis(qubit)
    slab = np.moveaxis(work.amps, ax, 0)[outcome]
    total = float(np.vdot(work.amps, work.amps).real)
    p = float(np.vdot(slab, slab).real) / total
    remaining = tuple(q for q in work.qubit_ids if q != qubit)
    if p <= 1e-300:
        return 0.0, StateVector(remaining, np.zeros_like(slab))
    return p, StateVector(remaining, slab / math.sqrt(p * total))


def measure(state: StateVector, qubit, pre_rotation, rng) -> tuple[MeasurementRecord, StateVector]:
    """Rotate, sample a computational-basis outcome, project and renormalise."""
    rotated = state.apply_single(qubit, pre_rotation) if pre_rotation is not None else state
    ax = rotated.axis(qubit)
    slab1 = np.moveaxis(rotated.amps, ax, 0)[1]
    p1 = float(np.vdot(slab1, slab1).real) / float(np.vdot(rotated.amps, rotated.amps).real)
    outcome = 1 if rng.random() < p1 else 0
    p, post = project(rotated, qubit, outcome)
    rot = np.eye(2, dtype=complex) if pre_rotation is None else np.asarray(pre_rotation, dtype=complex)
    return MeasurementRecord(qubit, rot, outcome, p), post


# ---------------------------------------------------------------------------
# Quantum-trajectory integrator
# ---------------------------------------------------------------------------
#
# Per-system basis (one energy quantum at most):
#   0: |e>|vac>   (c1)      2: |1>|vac>   (c3)
#   1: |0>|1 ph>  (c2)      3: |0>|vac>   (post-click ground, c4)
#
# The conditional evolution acts in the {0,1} block; jumps map 1 -> 3.

_EXCITED = (0, 1)


def _single_hamiltonian(p: CavityParams) -> np.ndarray:
    h = np.zeros((4, 4), dtype=complex)
    h[0, 1] = h[1, 0] = p.g
    h[1, 1] = -0.5j * p.kappa
    return h


def _annihilator() -> np.ndarray:
    a = np.zeros((4, 4), dtype=complex)
    a[3, 1] = 1.0
    return a


def jump_operators(a: CavityParams, b: CavityParams):
    """(J_plus, J_minus, J_A, J_B) as 16x16 matrices on the joint space."""
    i4 = np.eye(4, dtype=complex)
    a_op = np.kron(_annihilator(), i4)
    b_op = np.kron(i4, _annihilator())
    ja = math.sqrt(a.kappa) * a_op
    jb = math.sqrt(b.kappa) * b_op
    jp = math.sqrt(a.kappa / 2.0) * a_op + math.sqrt(b.kappa / 2.0) * b_op
    jm = math.sqrt(a.kappa / 2.0) * a_op - math.sqrt(b.kappa / 2.0) * b_op
    return jp, jm, ja, jb


def rk4_step_size(*params: CavityParams) -> float:
    return 1.0 / (100.0 * max(max(p.g, p.kappa) for p in params))


def _evolve(psi: np.ndarray, k_matrix: np.ndarray, duration: float, h: float) -> np.ndarray:
    """Fixed-step RK4 for d psi/dt = K psi, batched over leading axes."""
    if duration < 0:
        raise TrajectoryError("cannot evolve for a negative duration")
    kt = k_matrix.T
    steps, rem = divmod(duration, h)
    for dt in [h] * int(steps) + ([rem] if rem > 1e-15 else []):
        k1 = psi @ kt
        k2 = (psi + 0.5 * dt * k1) @ kt
        k3 = (psi + 0.5 * dt * k2) @ kt
        k4 = (psi + dt * k3) @ kt
        psi = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return psi


def evolve_single(p: CavityParams, times) -> np.ndarray:
    """Amplitudes (len(times), 4) of one system started in |e>|vac>."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0):
        raise TrajectoryError("times must be non-decreasing")
    k = -1j * _single_hamiltonian(p)
    h = rk4_step_size(p)
    psi = np.zeros(4, dtype=complex)
    psi[0] = 1.0
    out, cur = [], 0.0
    for t in times:
        psi = _evolve(psi, k, t - cur, h)
        cur = t
        out.append(psi.copy())
    return np.array(out)


def single_system_click_density(p: CavityParams, times) -> np.ndarray:
    """kappa |c2(t)|^2 along the conditional evolution: the leakage density."""
    return p.kappa * np.abs(evolve_single(p, times)[:, 1]) ** 2


def _flip_and_pump(psi: np.ndarray) -> np.ndarray:
    """X on both atoms then a pi-pulse |0> -> |e>, as a joint basis permutation.

    Requires the excited components to have decayed; the caller checks that.
    """
    out = np.zeros_like(psi)
    # X: per-system states 2 <-> 3; pi-pulse: 3 -> 0.  Net: 2 -> 0, 3 -> 2.
    sub = {2: 0, 3: 2}
    for ia, ra in sub.items():
        for ib, rb in sub.items():
            out[..., 4 * ra + rb] = psi[..., 4 * ia + ib]
    return out


def _excited_residual(psi: np.ndarray) -> float:
    mask = np.zeros(16, dtype=bool)
    for ia in range(4):
        for ib in range(4):
            if ia in _EXCITED or ib in _EXCITED:
                mask[4 * ia + ib] = True
    return float(np.sqrt(np.max(np.sum(np.abs(psi[..., mask]) ** 2, axis=-1))))


@dataclass(frozen=True)
class TrajectoryResult:
    """Tilt and joint click density from one replayed double heralding."""

    theta_beta: float
    density: float


def trajectory_dh_grid(a: CavityParams, b: CavityParams, t1s, t2s,
                       decay_time: float | None = None):
    """Replay double heralding over a grid of click times.

    Returns (theta, density) arrays of shape (len(t1s), len(t2s)).  The
    density is summed over the four detector-parity combinations; the tilt
    follows the printed closed-form convention (cosine on the |0>_A |1>_B
    branch).
    """
    t1s = np.asarray(t1s, dtype=float)
    t2s = np.asarray(t2s, dtype=float)
    if np.any(t1s <= 0) or np.any(t2s <= 0):
        raise TrajectoryError("click times must be positive")
    order1 = np.argsort(t1s)
    order2 = np.argsort(t2s)
    h = rk4_step_size(a, b)
    if decay_time is None:
        decay_time = 25.0 / min(a.g, b.g)
    k = -1j * (np.kron(_single_hamiltonian(a), np.eye(4)) +
               np.kron(np.eye(4), _single_hamiltonian(b)))
    jp, jm, _, _ = jump_operators(a, b)

    v = np.zeros(4, dtype=complex)
    v[0] = v[2] = 1.0 / math.sqrt(2.0)
    psi = np.kron(v, v)

    # round one: snapshot at every t1, branch on the detector
    post_click = np.zeros((t1s.size, 2, 16), dtype=complex)
    cur = 0.0
    state = psi
    for i in order1:
        state = _evolve(state, k, t1s[i] - cur, h)
        cur = t1s[i]
        post_click[i, 0] = jp @ state
        post_click[i, 1] = jm @ state

    # wait out the decay (evolving dark components further is harmless)
    batch = post_click.reshape(-1, 16)
    batch = _evolve(batch, k, decay_time, h)
    residual = _excited_residual(batch)
    if residual > 1e-8:
        raise TrajectoryError(f"residual excited amplitude {residual:.2e} after decay window")
    batch = _flip_and_pump(batch)

    # round two: snapshot at every t2, branch on the detector again
    amp_10 = np.zeros((t1s.size, 2, t2s.size, 2), dtype=complex)  # atoms |1>_A |0>_B
    amp_01 = np.zeros_like(amp_10)                                # atoms |0>_A |1>_B
    cur = 0.0
    for j in order2:
        batch = _evolve(batch, k, t2s[j] - cur, h)
        cur = t2s[j]
        for pi, jop in enumerate((jp, jm)):
            final = batch @ jop.T
            shaped = final.reshape(t1s.size, 2, 16)
            amp_10[:, :, j, pi] = shaped[:, :, 4 * 2 + 3]
            amp_01[:, :, j, pi] = shaped[:, :, 4 * 3 + 2]

    dens = np.sum(np.abs(amp_10) ** 2 + np.abs(amp_01) ** 2, axis=(1, 3))
    with np.errstate(invalid="ignore"):
        theta = np.arctan2(np.abs(amp_10[:, 0, :, 0]), np.abs(amp_01[:, 0, :, 0]))
    return theta, dens


def trajectory_dh(a: CavityParams, b: CavityParams, t1: float, t2: float) -> TrajectoryResult:
    """Single-point double-heralding replay; see trajectory_dh_grid."""
    theta, dens = trajectory_dh_grid(a, b, [t1], [t2])
    return TrajectoryResult(float(theta[0, 0]), float(dens[0, 0]))
