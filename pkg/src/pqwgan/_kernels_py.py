"""Pure-numpy sub-generator kernels, vectorised over (sample, patch).

Same contract as the compiled ``_kernels_c`` module:

``evolve(enc, rot)``
    enc: (B, N, 8) packed R_Y entries of the latent encoding,
    rot: (P, L, N, 8) packed rotation entries.
    Returns split amplitudes ``(re, im)`` of shape (B, P, 2**N).

``adjoint(re, im, lam_re, lam_im, rot, omega)``
    Uncomputes the layers from the final state and the adjoint vector,
    returning dL/dangles of shape (P, L, N, 3) summed over the batch.
    omega: (P, L, N) angles of the outer Z rotation.
"""
import numpy as np

from .qsim import apply_cnot_pairs, apply_pairs

NAME = "python"


def evolve(enc, rot):
    n_batch, n_qubits = enc.shape[:2]
    n_patches, n_layers = rot.shape[:2]
    dim = 2**n_qubits
    re = np.zeros((n_batch, n_patches, dim))
    im = np.zeros((n_batch, n_patches, dim))
    re[..., 0] = 1.0
    for q in range(n_qubits):
        apply_pairs(re, im, n_qubits, q, enc[:, None, q, :])
    for layer in range(n_layers):
        for q in range(n_qubits):
            apply_pairs(re, im, n_qubits, q, rot[:, layer, q, :])
        for q in range(n_qubits - 1):
            apply_cnot_pairs(re, im, n_qubits, q, q + 1)
    return re, im


def dagger(m):
    out = np.empty_like(m)
    out[..., 0], out[..., 1] = m[..., 0], -m[..., 1]
    out[..., 2], out[..., 3] = m[..., 4], -m[..., 5]
    out[..., 4], out[..., 5] = m[..., 2], -m[..., 3]
    out[..., 6], out[..., 7] = m[..., 6], -m[..., 7]
    return out


def _split(x, n_qubits, q):
    v = x.reshape(x.shape[:-1] + (2**q, 2, 2 ** (n_qubits - q - 1)))
    return v[..., 0, :], v[..., 1, :]


def _z_imag(lr, li, pr, pi, n_qubits, q):
    # Im <lam|Z_q|psi>, summed over batch and basis, per patch
    l0r, l1r = _split(lr, n_qubits, q)
    l0i, l1i = _split(li, n_qubits, q)
    p0r, p1r = _split(pr, n_qubits, q)
    p0i, p1i = _split(pi, n_qubits, q)
    t = (l0r * p0i - l0i * p0r) - (l1r * p1i - l1i * p1r)
    return t.sum(axis=(0, 2, 3))


def _cross(lr, li, pr, pi, n_qubits, q):
    # sums of conj(lam_0) psi_1 and conj(lam_1) psi_0, per patch
    l0r, l1r = _split(lr, n_qubits, q)
    l0i, l1i = _split(li, n_qubits, q)
    p0r, p1r = _split(pr, n_qubits, q)
    p0i, p1i = _split(pi, n_qubits, q)
    ax = (0, 2, 3)
    s01 = ((l0r * p1r + l0i * p1i).sum(axis=ax), (l0r * p1i - l0i * p1r).sum(axis=ax))
    s10 = ((l1r * p0r + l1i * p0i).sum(axis=ax), (l1r * p0i - l1i * p0r).sum(axis=ax))
    return s01, s10


def adjoint(re, im, lam_re, lam_im, rot, omega):
    n_patches, n_layers, n_qubits = rot.shape[:3]
    pr, pi = re.copy(), im.copy()
    lr, li = lam_re.copy(), lam_im.copy()
    rot_dag = dagger(rot)
    grad = np.zeros((n_patches, n_layers, n_qubits, 3))
    for layer in range(n_layers - 1, -1, -1):
        for q in range(n_qubits - 2, -1, -1):
            apply_cnot_pairs(pr, pi, n_qubits, q, q + 1)
            apply_cnot_pairs(lr, li, n_qubits, q, q + 1)
        for q in range(n_qubits - 1, -1, -1):
            grad[:, layer, q, 2] = _z_imag(lr, li, pr, pi, n_qubits, q)
            (s01r, s01i), (s10r, s10i) = _cross(lr, li, pr, pi, n_qubits, q)
            w = omega[:, layer, q]
            cw, sw = np.cos(w), np.sin(w)
            grad[:, layer, q, 1] = -(cw * s01r + sw * s01i) + (cw * s10r - sw * s10i)
            apply_pairs(pr, pi, n_qubits, q, rot_dag[:, layer, q, :])
            apply_pairs(lr, li, n_qubits, q, rot_dag[:, layer, q, :])
            grad[:, layer, q, 0] = _z_imag(lr, li, pr, pi, n_qubits, q)
    return grad
