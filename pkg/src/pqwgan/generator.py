"""Patch quantum generator: one sub-generator circuit per image patch.

Each sub-generator encodes the latent vector with R_Y rotations, runs
``n_layers`` of (arbitrary rotation on every qubit, CNOT chain), post-selects
the ancilla register on |0...0>, and reads out the data-register
probabilities. Probabilities are scaled by their maximum, truncated to the
patch size, and the patches tiled into the image.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from . import qsim
from ._backend import kernels
from .errors import ConfigError, PostSelectionError

PRIOR_KINDS = ("uniform01", "standard_normal")


@dataclass(frozen=True)
class GeneratorConfig:
    n_patches: int = 28
    n_data: int = 7
    n_ancilla: int = 1
    n_layers: int = 8
    image_height: int = 28
    image_width: int = 28
    patch_height: int | None = None
    patch_width: int | None = None
    prior_kind: str = "uniform01"

    def __post_init__(self):
        # default layout: full-width row patches
        if self.patch_width is None:
            object.__setattr__(self, "patch_width", self.image_width)
        if self.patch_height is None:
            rows = self.image_height * self.image_width // max(self.n_patches, 1)
            object.__setattr__(self, "patch_height", max(rows // max(self.patch_width, 1), 1))
        self.validate()

    def validate(self):
        P, D, A, L = self.n_patches, self.n_data, self.n_ancilla, self.n_layers
        H, W, ph, pw = self.image_height, self.image_width, self.patch_height, self.patch_width
        if P < 1 or D < 1 or A < 0 or L < 0 or H < 1 or W < 1 or ph < 1 or pw < 1:
            raise ConfigError(
                "n_patches, n_data, image and patch sizes must be >= 1; "
                "n_ancilla and n_layers must be >= 0"
            )
        if (H * W) % P:
            raise ConfigError(f"n_patches={P} must divide image_height*image_width={H * W}")
        per_patch = H * W // P
        if ph * pw != per_patch:
            raise ConfigError(
                f"patch_height*patch_width={ph * pw} must equal "
                f"image_height*image_width/n_patches={per_patch}"
            )
        if H % ph or W % pw:
            raise ConfigError(
                f"patches of {ph}x{pw} must tile the {H}x{W} image "
                "(image_height % patch_height == 0 and image_width % patch_width == 0)"
            )
        if 2**D < per_patch:
            raise ConfigError(
                f"2**n_data={2 ** D} must be >= pixels per patch {per_patch}"
            )
        if A + D > qsim.MAX_QUBITS:
            raise ConfigError(
                f"n_ancilla+n_data={A + D} exceeds the {qsim.MAX_QUBITS}-qubit limit"
            )
        if self.prior_kind not in PRIOR_KINDS:
            raise ConfigError(f"prior_kind must be one of {PRIOR_KINDS}, got {self.prior_kind!r}")

    @property
    def n_qubits(self) -> int:
        return self.n_ancilla + self.n_data

    @property
    def pixels_per_patch(self) -> int:
        return self.image_height * self.image_width // self.n_patches

    @property
    def params_shape(self) -> tuple[int, int, int, int]:
        return (self.n_patches, self.n_layers, self.n_qubits, 3)

    def to_dict(self) -> dict:
        return asdict(self)


def count_parameters(config: GeneratorConfig) -> int:
    return config.n_patches * config.n_layers * config.n_qubits * 3


def init_params(config: GeneratorConfig, rng: np.random.Generator) -> np.ndarray:
    """Angles i.i.d. uniform on [0, pi)."""
    return rng.uniform(0.0, np.pi, size=config.params_shape)


@lru_cache(maxsize=64)
def _patch_index(P, H, W, ph, pw) -> np.ndarray:
    cells_per_row = W // pw
    idx = np.empty((P, ph * pw), dtype=np.intp)
    j = np.arange(ph * pw)
    for i in range(P):
        top = (i // cells_per_row) * ph
        left = (i % cells_per_row) * pw
        idx[i] = (top + j // pw) * W + left + j % pw
    idx.setflags(write=False)
    return idx


def patch_index(config: GeneratorConfig) -> np.ndarray:
    """(P, pixels_per_patch) flat image index of every patch pixel.

    Patch cells are ordered left to right, then top to bottom; pixels fill
    each cell row-major.
    """
    c = config
    return _patch_index(c.n_patches, c.image_height, c.image_width, c.patch_height, c.patch_width)


def encode_latent(z, n_qubits: int) -> qsim.StateVector:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (n_qubits,):
        raise ConfigError(f"latent dimension {z.shape} does not match n_qubits={n_qubits}")
    state = qsim.new_zero_state(n_qubits)
    for q in range(n_qubits):
        state = qsim.apply_ry(state, q, z[q])
    return state


def postprocess_patch(probs, keep: int) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if keep > probs.shape[-1]:
        raise ConfigError(f"cannot keep {keep} of {probs.shape[-1]} values")
    top = probs.max()
    if not top > 0:
        raise ValueError("degenerate patch: all probabilities are zero")
    return (probs / top)[:keep]


def assemble_image(patches, config: GeneratorConfig) -> np.ndarray:
    patches = np.asarray(patches, dtype=np.float64)
    if patches.shape != (config.n_patches, config.pixels_per_patch):
        raise ConfigError(
            f"expected {config.n_patches} patches of {config.pixels_per_patch} pixels, "
            f"got shape {patches.shape}"
        )
    image = np.empty(config.image_height * config.image_width)
    image[patch_index(config)] = patches
    return image.reshape(config.image_height, config.image_width)


def _check_shapes(params, zs, config):
    if params.shape != config.params_shape:
        raise ConfigError(f"params shape {params.shape} != expected {config.params_shape}")
    if zs.ndim != 2 or zs.shape[1] != config.n_qubits:
        raise ConfigError(
            f"latent batch shape {zs.shape} must be (batch, {config.n_qubits})"
        )


def _run_circuits(params, zs, config):
    rot = np.ascontiguousarray(qsim.rot_entries(params[..., 0], params[..., 1], params[..., 2]))
    enc = np.ascontiguousarray(qsim.ry_entries(zs))
    re, im = kernels.evolve(enc, rot)
    dr, di, success = qsim.postselect_split(re, im, config.n_ancilla)
    bad = np.argwhere(success < qsim.POSTSELECT_THRESHOLD)
    if bad.size:
        sample, patch = (int(v) for v in bad[0])
        raise PostSelectionError(
            f"post-selection failed for sample {sample}, patch {patch}: "
            f"success probability {success[sample, patch]:.3e}",
            success_prob=float(success[sample, patch]),
            patch=patch,
            sample=sample,
        )
    return re, im, rot, dr * dr + di * di


def sub_generator_probs(params, zs, config: GeneratorConfig) -> np.ndarray:
    """Data-register probabilities, shape (batch, P, 2**n_data)."""
    params = np.asarray(params, dtype=np.float64)
    zs = np.atleast_2d(np.asarray(zs, dtype=np.float64))
    _check_shapes(params, zs, config)
    return _run_circuits(params, zs, config)[3]


def sub_generator_forward(params_i, z, config: GeneratorConfig) -> np.ndarray:
    """G_i(z) for one sub-generator; ``params_i`` has shape (L, N, 3)."""
    params_i = np.asarray(params_i, dtype=np.float64)
    one = GeneratorConfig(**{**config.to_dict(), "n_patches": 1, "patch_height": None,
                             "patch_width": None, "image_height": 1,
                             "image_width": config.pixels_per_patch})
    return sub_generator_probs(params_i[None], z, one)[0, 0]


def generate_batch(params, zs, config: GeneratorConfig) -> np.ndarray:
    """Images for a batch of latent vectors, shape (batch, H, W)."""
    probs = sub_generator_probs(params, zs, config)
    keep = config.pixels_per_patch
    patches = (probs / probs.max(axis=-1, keepdims=True))[..., :keep]
    images = np.empty((probs.shape[0], config.image_height * config.image_width))
    images[:, patch_index(config)] = patches
    return images.reshape(-1, config.image_height, config.image_width)


def generate(params, z, config: GeneratorConfig) -> np.ndarray:
    return generate_batch(params, np.asarray(z, dtype=np.float64)[None], config)[0]


def generator_backward_batch(params, zs, config: GeneratorConfig, upstream) -> np.ndarray:
    """Gradient of sum_b <upstream_b, generate(params, z_b)> w.r.t. params.

    The argmax of each patch's probabilities is held fixed (lowest index on
    ties); truncated entries receive zero upstream.
    """
    params = np.asarray(params, dtype=np.float64)
    zs = np.atleast_2d(np.asarray(zs, dtype=np.float64))
    _check_shapes(params, zs, config)
    upstream = np.asarray(upstream, dtype=np.float64)
    B = zs.shape[0]
    upstream = upstream.reshape(B, -1)
    re, im, rot, probs = _run_circuits(params, zs, config)

    keep = config.pixels_per_patch
    g_pix = np.zeros_like(probs)
    g_pix[..., :keep] = upstream[:, patch_index(config)]
    top_idx = np.argmax(probs, axis=-1)
    top = np.take_along_axis(probs, top_idx[..., None], axis=-1)
    g_probs = g_pix / top
    shift = np.sum(g_pix * probs, axis=-1, keepdims=True) / (top * top)
    np.put_along_axis(
        g_probs, top_idx[..., None],
        np.take_along_axis(g_probs, top_idx[..., None], axis=-1) - shift, axis=-1,
    )

    lam = qsim.probs_adjoint(re + 1j * im, config.n_ancilla, g_probs)
    omega = np.ascontiguousarray(params[..., 2])
    return kernels.adjoint(
        re, im, np.ascontiguousarray(lam.real), np.ascontiguousarray(lam.imag), rot, omega
    )


def generator_backward(params, z, config: GeneratorConfig, upstream) -> np.ndarray:
    upstream = np.asarray(upstream, dtype=np.float64)
    return generator_backward_batch(
        params, np.asarray(z, dtype=np.float64)[None], config, upstream[None]
    )
