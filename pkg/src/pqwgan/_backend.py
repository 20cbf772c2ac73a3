"""Kernel backend selection.

``PQWGAN_BACKEND`` may be ``auto`` (default), ``cython`` or ``python``.
``auto`` uses the compiled extension when it was built and falls back to
numpy otherwise.
"""
import importlib
import os

_CHOICES = ("auto", "cython", "python")


def load(name=None):
    name = (name or os.environ.get("PQWGAN_BACKEND", "auto")).lower()
    if name not in _CHOICES:
        raise ValueError(f"PQWGAN_BACKEND must be one of {_CHOICES}, got {name!r}")
    if name in ("auto", "cython"):
        try:
            return importlib.import_module("pqwgan._kernels_c")
        except ImportError:
            if name == "cython":
                raise
    return importlib.import_module("pqwgan._kernels_py")


kernels = load()
