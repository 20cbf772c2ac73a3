"""Patch-based quantum generator trained as a Wasserstein GAN, on a
statevector simulator with hand-written reverse-mode gradients."""
from ._backend import kernels as _kernels

BACKEND = _kernels.NAME

__all__ = ["BACKEND"]
