"""Dense statevector simulation for small registers.

Qubit 0 is the most significant bit of a basis index, so the ancilla
wires of a sub-generator (the first ``A`` qubits) select a contiguous
prefix block of the amplitude vector.

Single-qubit gates go through :func:`apply_matrix`, which works on the
real and imaginary parts separately. numpy's complex multiply uses fused
multiply-add on some CPUs, and the compiled kernels in :mod:`pqwgan._kernels_c`
must reproduce these results bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, PostSelectionError

MAX_QUBITS = 20
POSTSELECT_THRESHOLD = 1e-12


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise ValueError(
                f"expected {2 ** self.n_qubits} amplitudes, got {self.amplitudes.shape}"
            )

    def norm_squared(self) -> float:
        return float(np.sum(probabilities(self)))


@dataclass(frozen=True)
class GateAngles:
    phi: float
    theta: float
    omega: float


def new_zero_state(n_qubits: int) -> StateVector:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    amps = np.zeros(2**n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


# ---------------------------------------------------------------------------
# gate matrices, packed as 8 reals: m00r m00i m01r m01i m10r m10i m11r m11i


def ry_entries(angle):
    """Packed R_Y matrices; ``angle`` may be a scalar or an array."""
    angle = np.asarray(angle, dtype=np.float64)
    c = np.cos(angle / 2)
    s = np.sin(angle / 2)
    zero = np.zeros_like(c)
    return np.stack([c, zero, -s, zero, s, zero, c, zero], axis=-1)


def rot_entries(phi, theta, omega):
    """Packed R_Z(omega) R_Y(theta) R_Z(phi) matrices, broadcast over inputs.

    [[e^{-i(phi+omega)/2} c, -e^{i(phi-omega)/2} s],
     [e^{-i(phi-omega)/2} s,  e^{i(phi+omega)/2} c]]
    """
    phi, theta, omega = np.broadcast_arrays(
        np.asarray(phi, np.float64), np.asarray(theta, np.float64), np.asarray(omega, np.float64)
    )
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    plus = (phi + omega) / 2
    minus = (phi - omega) / 2
    cp, sp = np.cos(plus), np.sin(plus)
    cm, sm = np.cos(minus), np.sin(minus)
    return np.stack(
        [cp * c, -sp * c, -(cm * s), -(sm * s), cm * s, -sm * s, cp * c, sp * c],
        axis=-1,
    )


def entries_to_matrix(entries) -> np.ndarray:
    e = np.asarray(entries, dtype=np.float64)
    return np.array([[e[0] + 1j * e[1], e[2] + 1j * e[3]], [e[4] + 1j * e[5], e[6] + 1j * e[7]]])


def _pair_view(x: np.ndarray, n_qubits: int, qubit: int) -> np.ndarray:
    # trailing axis split as (high bits, target bit, low bits)
    return x.reshape(x.shape[:-1] + (2**qubit, 2, 2 ** (n_qubits - qubit - 1)))


def apply_pairs(re, im, n_qubits, qubit, m):
    """Apply packed 2x2 gate(s) ``m`` to split re/im arrays in place.

    ``m`` entries are indexed on the last axis; leading axes broadcast
    against the leading axes of ``re``/``im`` (which end in ``2**n_qubits``).
    The operation order here is the contract the compiled kernel matches.
    """
    r = _pair_view(re, n_qubits, qubit)
    i = _pair_view(im, n_qubits, qubit)
    ar, ai = r[..., 0, :].copy(), i[..., 0, :].copy()
    br, bi = r[..., 1, :].copy(), i[..., 1, :].copy()
    m = np.asarray(m)
    # broadcast gate entries over the (high, low) axes
    e = [m[..., k][..., None, None] for k in range(8)]
    r[..., 0, :] = (e[0] * ar - e[1] * ai) + (e[2] * br - e[3] * bi)
    i[..., 0, :] = (e[0] * ai + e[1] * ar) + (e[2] * bi + e[3] * br)
    r[..., 1, :] = (e[4] * ar - e[5] * ai) + (e[6] * br - e[7] * bi)
    i[..., 1, :] = (e[4] * ai + e[5] * ar) + (e[6] * bi + e[7] * br)


def apply_cnot_pairs(re, im, n_qubits, control, target):
    """In-place CNOT on split arrays (any leading batch axes)."""
    for x in (re, im):
        v = x.reshape(x.shape[:-1] + (2,) * n_qubits)
        idx1 = [slice(None)] * v.ndim
        idx1[v.ndim - n_qubits + control] = 1
        sub = v[tuple(idx1)]
        # target axis shifts down by one when control precedes it
        t_axis = sub.ndim - n_qubits + 1 + (target - 1 if target > control else target)
        sub[...] = np.flip(sub, axis=t_axis).copy()


def _check_qubit(state: StateVector, qubit: int):
    if not 0 <= qubit < state.n_qubits:
        raise IndexError(f"qubit {qubit} out of range for {state.n_qubits}-qubit state")


def apply_matrix(state: StateVector, qubit: int, entries) -> StateVector:
    _check_qubit(state, qubit)
    re = state.amplitudes.real.copy()
    im = state.amplitudes.imag.copy()
    apply_pairs(re, im, state.n_qubits, qubit, np.asarray(entries, dtype=np.float64))
    return StateVector(state.n_qubits, re + 1j * im)


def apply_ry(state: StateVector, qubit: int, angle: float) -> StateVector:
    return apply_matrix(state, qubit, ry_entries(angle))


def apply_rot(state: StateVector, qubit: int, g: GateAngles) -> StateVector:
    return apply_matrix(state, qubit, rot_entries(g.phi, g.theta, g.omega))


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    _check_qubit(state, control)
    _check_qubit(state, target)
    if control == target:
        raise IndexError("CNOT control and target must differ")
    re = state.amplitudes.real.copy()
    im = state.amplitudes.imag.copy()
    apply_cnot_pairs(re, im, state.n_qubits, control, target)
    return StateVector(state.n_qubits, re + 1j * im)


def probabilities(state: StateVector) -> np.ndarray:
    a = state.amplitudes
    return a.real * a.real + a.imag * a.imag


def postselect_split(re, im, n_ancilla, threshold=POSTSELECT_THRESHOLD):
    """Vectorised post-selection on split arrays with trailing axis 2**N.

    Returns (data_re, data_im, success). Rows whose success probability is
    below ``threshold`` are left unnormalised; callers decide how to fail.
    """
    keep = re.shape[-1] >> n_ancilla
    kr, ki = re[..., :keep], im[..., :keep]
    success = np.sum(kr * kr + ki * ki, axis=-1)
    if n_ancilla == 0:
        # nothing is measured, so the state is left untouched
        return kr, ki, success
    scale = np.sqrt(np.where(success < threshold, 1.0, success))[..., None]
    return kr / scale, ki / scale, success


def postselect_ancilla_zero(state: StateVector, n_ancilla: int) -> tuple[StateVector, float]:
    if not 0 <= n_ancilla < state.n_qubits:
        raise ConfigError(
            f"n_ancilla must be in [0, {state.n_qubits}), got {n_ancilla}"
        )
    dr, di, success = postselect_split(
        state.amplitudes.real, state.amplitudes.imag, n_ancilla
    )
    success = float(success)
    if success < POSTSELECT_THRESHOLD:
        raise PostSelectionError(
            f"ancilla post-selection probability {success:.3e} below {POSTSELECT_THRESHOLD}",
            success_prob=success,
        )
    return StateVector(state.n_qubits - n_ancilla, dr + 1j * di), success


# ---------------------------------------------------------------------------
# generic circuits with reverse-mode gradients


@dataclass
class Circuit:
    """A gate list over a flat angle vector.

    Each op is ``("ry", qubit, slot)``, ``("rot", qubit, (s_phi, s_theta, s_omega))``
    or ``("cnot", control, target)``; slots index into the angle vector
    passed to :meth:`run`. A slot of ``None`` on an ``ry`` means a fixed
    angle stored in ``fixed``.
    """

    n_qubits: int
    n_ancilla: int = 0
    ops: list = field(default_factory=list)
    fixed: dict = field(default_factory=dict)

    def ry(self, qubit, slot=None, value=None):
        if slot is None:
            self.fixed[len(self.ops)] = value
        self.ops.append(("ry", qubit, slot))
        return self

    def rot(self, qubit, slots):
        self.ops.append(("rot", qubit, tuple(slots)))
        return self

    def cnot(self, control, target):
        self.ops.append(("cnot", control, target))
        return self

    @property
    def n_angles(self) -> int:
        slots = [-1]
        for kind, _, s in self.ops:
            if kind == "ry" and s is not None:
                slots.append(s)
            elif kind == "rot":
                slots.extend(s)
        return max(slots) + 1

    def _entries(self, k, op, angles):
        kind, _, s = op
        if kind == "ry":
            return ry_entries(self.fixed[k] if s is None else angles[s])
        return rot_entries(angles[s[0]], angles[s[1]], angles[s[2]])

    def final_state(self, angles) -> StateVector:
        state = new_zero_state(self.n_qubits)
        for k, op in enumerate(self.ops):
            if op[0] == "cnot":
                state = apply_cnot(state, op[1], op[2])
            else:
                state = apply_matrix(state, op[1], self._entries(k, op, angles))
        return state

    def run(self, angles) -> np.ndarray:
        """Output probabilities (of the data register when ancillas are present)."""
        state = self.final_state(angles)
        if self.n_ancilla:
            state, _ = postselect_ancilla_zero(state, self.n_ancilla)
        return probabilities(state)


def probs_adjoint(amps: np.ndarray, n_ancilla: int, upstream: np.ndarray) -> np.ndarray:
    """Adjoint vector dL/d(conj psi) for loss L(probs) given dL/dprobs.

    With ancillas, probs are |a_k|^2 / s over the kept block, s the success
    probability; the renormalisation contributes the -<g, p> term.
    """
    lam = np.zeros_like(amps)
    keep = amps.shape[-1] >> n_ancilla
    kept = amps[..., :keep]
    mag = kept.real**2 + kept.imag**2
    if n_ancilla == 0:
        lam[..., :keep] = upstream * kept
        return lam
    s = mag.sum(axis=-1, keepdims=True)
    p = mag / s
    coeff = (upstream - np.sum(upstream * p, axis=-1, keepdims=True)) / s
    lam[..., :keep] = coeff * kept
    return lam


_Z = np.array([1.0, -1.0])


def reverse_grad(circuit: Circuit, angles, upstream) -> np.ndarray:
    """Exact gradient of a loss of the output probabilities w.r.t. ``angles``.

    ``upstream`` is dL/dprobs. Uses the adjoint sweep: the final state and
    the adjoint vector are both uncomputed gate by gate, and each rotation
    contributes Im<lam|G|psi> for its generator G.
    """
    angles = np.asarray(angles, dtype=np.float64)
    grad = np.zeros(circuit.n_angles)
    psi = circuit.final_state(angles)
    if circuit.n_ancilla:
        _, success = postselect_ancilla_zero(psi, circuit.n_ancilla)
    n = circuit.n_qubits
    psi = psi.amplitudes.reshape((2,) * n)
    lam = probs_adjoint(psi.reshape(-1), circuit.n_ancilla, np.asarray(upstream, np.float64))
    lam = lam.reshape((2,) * n)

    def z_term(lam, psi, q):
        lz = np.moveaxis(lam, q, 0)
        pz = np.moveaxis(psi, q, 0)
        return np.imag(np.vdot(lz[0], pz[0]) - np.vdot(lz[1], pz[1]))

    def y_term(lam, psi, q):
        lz = np.moveaxis(lam, q, 0)
        pz = np.moveaxis(psi, q, 0)
        return np.imag(-1j * np.vdot(lz[0], pz[1]) + 1j * np.vdot(lz[1], pz[0]))

    def apply(mat, x, q):
        return np.moveaxis(np.tensordot(mat, x, axes=([1], [q])), 0, q)

    def rz(a):
        return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])

    for k in range(len(circuit.ops) - 1, -1, -1):
        kind, q, s = circuit.ops[k]
        if kind == "cnot":
            for arr in (psi, lam):
                idx = [slice(None)] * n
                idx[q] = 1
                sub = arr[tuple(idx)]
                t = s - 1 if s > q else s
                sub[...] = np.flip(sub, axis=t).copy()
            continue
        mat = entries_to_matrix(circuit._entries(k, circuit.ops[k], angles))
        if kind == "ry":
            if s is not None:
                grad[s] += y_term(lam, psi, q)
        else:
            phi_s, theta_s, omega_s = s
            omega = angles[omega_s]
            grad[omega_s] += z_term(lam, psi, q)
            undo = rz(-omega)
            grad[theta_s] += y_term(apply(undo, lam, q), apply(undo, psi, q), q)
        psi = apply(mat.conj().T, psi, q)
        lam = apply(mat.conj().T, lam, q)
        if kind == "rot":
            grad[s[0]] += z_term(lam, psi, q)
    return grad


def parameter_shift_grad(loss_eval: Callable[[np.ndarray], float], angles) -> np.ndarray:
    angles = np.asarray(angles, dtype=np.float64)
    grad = np.empty_like(angles)
    for k in range(angles.size):
        plus = angles.copy()
        minus = angles.copy()
        plus.flat[k] += np.pi / 2
        minus.flat[k] -= np.pi / 2
        grad.flat[k] = 0.5 * (loss_eval(plus) - loss_eval(minus))
    return grad


def finite_difference_grad(
    loss_eval: Callable[[np.ndarray], float], angles, step: float = 1e-5
) -> np.ndarray:
    if step <= 0:
        raise ValueError("step must be positive")
    angles = np.asarray(angles, dtype=np.float64)
    grad = np.empty_like(angles)
    for k in range(angles.size):
        plus = angles.copy()
        minus = angles.copy()
        plus.flat[k] += step
        minus.flat[k] -= step
        grad.flat[k] = (loss_eval(plus) - loss_eval(minus)) / (2 * step)
    return grad


def random_layered_circuit(
    n_qubits: int, n_layers: int, n_ancilla: int = 0, encode: Sequence[float] | None = None
) -> Circuit:
    """Sub-generator-shaped circuit: optional fixed R_Y encoding, then layers
    of rotations on every qubit followed by a CNOT chain."""
    c = Circuit(n_qubits, n_ancilla)
    if encode is not None:
        for q, a in enumerate(encode):
            c.ry(q, value=float(a))
    slot = 0
    for _ in range(n_layers):
        for q in range(n_qubits):
            c.rot(q, (slot, slot + 1, slot + 2))
            slot += 3
        for q in range(n_qubits - 1):
            c.cnot(q, q + 1)
    return c
