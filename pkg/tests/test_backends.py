import importlib

import numpy as np
import pytest

import pqwgan
from pqwgan import _backend, qsim
from pqwgan import _kernels_py as py

try:
    cy = importlib.import_module("pqwgan._kernels_c")
except ImportError:
    cy = None

needs_c = pytest.mark.skipif(cy is None, reason="compiled extension not built")


def workload(seed, B=3, P=4, L=3, N=5):
    rng = np.random.default_rng(seed)
    th = rng.uniform(-np.pi, np.pi, (P, L, N, 3))
    rot = np.ascontiguousarray(qsim.rot_entries(th[..., 0], th[..., 1], th[..., 2]))
    enc = np.ascontiguousarray(qsim.ry_entries(rng.random((B, N))))
    lam = rng.standard_normal((2, B, P, 2**N))
    return enc, rot, np.ascontiguousarray(th[..., 2]), lam


def test_backend_is_reported():
    assert pqwgan.BACKEND in ("cython", "python")


def test_python_backend_can_be_forced(monkeypatch):
    monkeypatch.setenv("PQWGAN_BACKEND", "python")
    assert _backend.load().NAME == "python"


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        _backend.load("fortran")


@needs_c
@pytest.mark.parametrize("seed", range(5))
def test_forward_states_bit_identical(seed):
    enc, rot, _, _ = workload(seed)
    a, b = py.evolve(enc, rot), cy.evolve(enc, rot)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@needs_c
@pytest.mark.parametrize("seed", range(5))
def test_adjoint_gradients_agree(seed):
    enc, rot, omega, lam = workload(seed)
    re, im = py.evolve(enc, rot)
    ga = py.adjoint(re, im, lam[0].copy(), lam[1].copy(), rot, omega)
    gb = cy.adjoint(re, im, lam[0].copy(), lam[1].copy(), rot, omega)
    np.testing.assert_allclose(ga, gb, rtol=0, atol=1e-12)


def test_kernel_matches_single_state_simulation():
    enc, rot, _, _ = workload(9, B=2, P=2, L=2, N=3)
    re, im = py.evolve(enc, rot)
    for b in range(2):
        for p in range(2):
            s = qsim.new_zero_state(3)
            for q in range(3):
                s = qsim.apply_matrix(s, q, enc[b, q])
            for layer in range(2):
                for q in range(3):
                    s = qsim.apply_matrix(s, q, rot[p, layer, q])
                for q in range(2):
                    s = qsim.apply_cnot(s, q, q + 1)
            assert np.array_equal(s.amplitudes, re[b, p] + 1j * im[b, p])
