# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sub-generator kernels; see ``_kernels_py`` for the contract.

The floating-point operation order in ``_apply`` mirrors
``qsim.apply_pairs`` exactly and the module must be built with
``-ffp-contract=off`` so forward amplitudes agree bit for bit with the
numpy fallback.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

NAME = "cython"


cdef inline void _apply(double* re, double* im, Py_ssize_t dim, Py_ssize_t stride,
                        const double* e) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef double ar, ai, br, bi
    i = 0
    while i < dim:
        for j in range(i, i + stride):
            k = j + stride
            ar = re[j]; ai = im[j]
            br = re[k]; bi = im[k]
            re[j] = (e[0] * ar - e[1] * ai) + (e[2] * br - e[3] * bi)
            im[j] = (e[0] * ai + e[1] * ar) + (e[2] * bi + e[3] * br)
            re[k] = (e[4] * ar - e[5] * ai) + (e[6] * br - e[7] * bi)
            im[k] = (e[4] * ai + e[5] * ar) + (e[6] * bi + e[7] * br)
        i += 2 * stride


cdef inline void _cnot(double* re, double* im, Py_ssize_t dim,
                       Py_ssize_t cbit, Py_ssize_t tbit) noexcept nogil:
    cdef Py_ssize_t k, m
    cdef double t
    for k in range(dim):
        if (k & cbit) and not (k & tbit):
            m = k | tbit
            t = re[k]; re[k] = re[m]; re[m] = t
            t = im[k]; im[k] = im[m]; im[m] = t


cdef inline void _dagger(const double* e, double* d) noexcept nogil:
    d[0] = e[0]; d[1] = -e[1]
    d[2] = e[4]; d[3] = -e[5]
    d[4] = e[2]; d[5] = -e[3]
    d[6] = e[6]; d[7] = -e[7]


def evolve(const double[:, :, ::1] enc, const double[:, :, :, ::1] rot):
    cdef Py_ssize_t n_batch = enc.shape[0], n_qubits = enc.shape[1]
    cdef Py_ssize_t n_patches = rot.shape[0], n_layers = rot.shape[1]
    cdef Py_ssize_t dim = 1 << n_qubits
    re_arr = np.zeros((n_batch, n_patches, dim))
    im_arr = np.zeros((n_batch, n_patches, dim))
    cdef double[:, :, ::1] re = re_arr
    cdef double[:, :, ::1] im = im_arr
    cdef Py_ssize_t b, p, q, layer
    cdef double* sr
    cdef double* si
    with nogil:
        for b in range(n_batch):
            for p in range(n_patches):
                sr = &re[b, p, 0]
                si = &im[b, p, 0]
                sr[0] = 1.0
                for q in range(n_qubits):
                    _apply(sr, si, dim, dim >> (q + 1), &enc[b, q, 0])
                for layer in range(n_layers):
                    for q in range(n_qubits):
                        _apply(sr, si, dim, dim >> (q + 1), &rot[p, layer, q, 0])
                    for q in range(n_qubits - 1):
                        _cnot(sr, si, dim, dim >> (q + 1), dim >> (q + 2))
    return re_arr, im_arr


cdef inline double _z_imag(const double* lr, const double* li, const double* pr,
                           const double* pi, Py_ssize_t dim, Py_ssize_t stride) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef double acc = 0.0
    i = 0
    while i < dim:
        for j in range(i, i + stride):
            k = j + stride
            acc += (lr[j] * pi[j] - li[j] * pr[j]) - (lr[k] * pi[k] - li[k] * pr[k])
        i += 2 * stride
    return acc


def adjoint(const double[:, :, ::1] re, const double[:, :, ::1] im,
            const double[:, :, ::1] lam_re, const double[:, :, ::1] lam_im,
            const double[:, :, :, ::1] rot, const double[:, :, ::1] omega):
    cdef Py_ssize_t n_batch = re.shape[0], dim = re.shape[2]
    cdef Py_ssize_t n_patches = rot.shape[0], n_layers = rot.shape[1], n_qubits = rot.shape[2]
    grad_arr = np.zeros((n_patches, n_layers, n_qubits, 3))
    cdef double[:, :, :, ::1] grad = grad_arr
    work = np.empty((4, dim))
    cdef double[:, ::1] w = work
    cdef double* pr = &w[0, 0]
    cdef double* pi = &w[1, 0]
    cdef double* lr = &w[2, 0]
    cdef double* li = &w[3, 0]
    cdef double d[8]
    cdef Py_ssize_t b, p, q, layer, i, j, k, stride
    cdef double s01r, s01i, s10r, s10i, cw, sw
    with nogil:
        for b in range(n_batch):
            for p in range(n_patches):
                for i in range(dim):
                    pr[i] = re[b, p, i]; pi[i] = im[b, p, i]
                    lr[i] = lam_re[b, p, i]; li[i] = lam_im[b, p, i]
                for layer in range(n_layers - 1, -1, -1):
                    for q in range(n_qubits - 2, -1, -1):
                        _cnot(pr, pi, dim, dim >> (q + 1), dim >> (q + 2))
                        _cnot(lr, li, dim, dim >> (q + 1), dim >> (q + 2))
                    for q in range(n_qubits - 1, -1, -1):
                        stride = dim >> (q + 1)
                        grad[p, layer, q, 2] += _z_imag(lr, li, pr, pi, dim, stride)
                        s01r = 0.0; s01i = 0.0; s10r = 0.0; s10i = 0.0
                        i = 0
                        while i < dim:
                            for j in range(i, i + stride):
                                k = j + stride
                                s01r += lr[j] * pr[k] + li[j] * pi[k]
                                s01i += lr[j] * pi[k] - li[j] * pr[k]
                                s10r += lr[k] * pr[j] + li[k] * pi[j]
                                s10i += lr[k] * pi[j] - li[k] * pr[j]
                            i += 2 * stride
                        cw = cos(omega[p, layer, q])
                        sw = sin(omega[p, layer, q])
                        grad[p, layer, q, 1] += -(cw * s01r + sw * s01i) + (cw * s10r - sw * s10i)
                        _dagger(&rot[p, layer, q, 0], d)
                        _apply(pr, pi, dim, stride, d)
                        _apply(lr, li, dim, stride, d)
                        grad[p, layer, q, 0] += _z_imag(lr, li, pr, pi, dim, stride)
    return grad_arr
