"""Fully connected critic and classical baseline generator.

Both are leaky-ReLU MLPs held in :class:`MLP`. Weights are stored
(out, in). The critic has a linear scalar head; the baseline generator
ends in tanh.

The gradient-penalty derivative differentiates through the input-gradient
computation. Leaky-ReLU masks are piecewise constant, so the input gradient
is a product of weight matrices and fixed diagonal masks; the second pass
is reverse mode over that product. The derivative at exactly zero is taken
from the positive side.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

CRITIC_HIDDEN = (512, 256)
BASELINE_HIDDEN = (256, 512, 1024)
LEAKY_SLOPE = 0.2


@dataclass
class MLP:
    weights: list
    biases: list
    slope: float = LEAKY_SLOPE
    output: str = "linear"

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[1]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def arrays(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def with_arrays(self, arrays) -> "MLP":
        arrays = list(arrays)
        return MLP(list(arrays[0::2]), list(arrays[1::2]), self.slope, self.output)

    def zeros_like(self) -> "MLP":
        return self.with_arrays([np.zeros_like(a) for a in self.arrays()])

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def from_flat(self, vec) -> "MLP":
        vec = np.asarray(vec, dtype=np.float64)
        out, pos = [], 0
        for a in self.arrays():
            out.append(vec[pos : pos + a.size].reshape(a.shape).copy())
            pos += a.size
        return self.with_arrays(out)


def mlp_param_count(sizes) -> int:
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


def init_mlp(sizes, rng: np.random.Generator, slope=LEAKY_SLOPE, output="linear") -> MLP:
    """Glorot-uniform weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MLP(weights, biases, slope, output)


def critic_sizes(n_inputs: int = 784) -> tuple[int, ...]:
    return (n_inputs,) + CRITIC_HIDDEN + (1,)


def baseline_sizes(latent_dim: int = 8, n_outputs: int = 784) -> tuple[int, ...]:
    return (latent_dim,) + BASELINE_HIDDEN + (n_outputs,)


def init_critic(rng, n_inputs: int = 784) -> MLP:
    return init_mlp(critic_sizes(n_inputs), rng)


def init_baseline_generator(rng, latent_dim: int = 8, n_outputs: int = 784) -> MLP:
    return init_mlp(baseline_sizes(latent_dim, n_outputs), rng, output="tanh")


def leaky_relu(x, slope=LEAKY_SLOPE):
    return np.where(x >= 0, x, slope * x)


def _flatten(w: MLP, images) -> np.ndarray:
    x = np.asarray(images, dtype=np.float64)
    if x.size % w.n_inputs:
        raise ConfigError(f"input of shape {x.shape} does not flatten to {w.n_inputs} features")
    return x.reshape(-1, w.n_inputs)


def _forward(w: MLP, x):
    """Returns (output, list of pre-activations, list of layer inputs)."""
    pre, inputs = [], []
    a = x
    last = len(w.weights) - 1
    for k, (W, b) in enumerate(zip(w.weights, w.biases)):
        inputs.append(a)
        h = a @ W.T + b
        pre.append(h)
        a = leaky_relu(h, w.slope) if k < last else h
    if w.output == "tanh":
        a = np.tanh(a)
    return a, pre, inputs


def _masks(w: MLP, pre):
    return [np.where(h >= 0, 1.0, w.slope) for h in pre[:-1]]


def critic_forward_batch(w: MLP, images) -> np.ndarray:
    out, _, _ = _forward(w, _flatten(w, images))
    return out[:, 0]


def critic_forward(w: MLP, image) -> float:
    return float(critic_forward_batch(w, image)[0])


def _input_grad(w: MLP, pre):
    """Backward chain of the scalar head. Returns (grad wrt input, chain)."""
    masks = _masks(w, pre)
    B = pre[0].shape[0]
    t = np.ones((B, 1))
    chain = []
    for k in range(len(w.weights) - 1, -1, -1):
        u = t @ w.weights[k]
        chain.append((k, t))
        if k > 0:
            t = masks[k - 1] * u
    return u, chain[::-1], masks


def critic_input_grad_batch(w: MLP, images) -> np.ndarray:
    x = _flatten(w, images)
    _, pre, _ = _forward(w, x)
    g, _, _ = _input_grad(w, pre)
    return g.reshape(np.shape(images))


def critic_input_grad(w: MLP, image) -> np.ndarray:
    return critic_input_grad_batch(w, image)


def critic_backward(w: MLP, images, upstream) -> MLP:
    """Gradient w.r.t. ``w`` of (1/m) sum_i upstream_i * D(x_i)."""
    x = _flatten(w, images)
    upstream = np.asarray(upstream, dtype=np.float64).reshape(-1)
    m = x.shape[0]
    _, pre, inputs = _forward(w, x)
    masks = _masks(w, pre)
    delta = (upstream / m)[:, None]
    gw, gb = [None] * len(w.weights), [None] * len(w.weights)
    for k in range(len(w.weights) - 1, -1, -1):
        gw[k] = delta.T @ inputs[k]
        gb[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ w.weights[k]) * masks[k - 1]
    return MLP(gw, gb, w.slope, w.output)


def gradient_penalty_batch(w: MLP, x, x_fake, epsilon, lam: float):
    """Per-sample penalties lam*(||grad D(x_hat)|| - 1)^2 and the gradient of
    their mean w.r.t. the critic parameters."""
    x = _flatten(w, x)
    x_fake = _flatten(w, x_fake)
    eps = np.asarray(epsilon, dtype=np.float64).reshape(-1, 1)
    if np.any(eps < 0) or np.any(eps > 1):
        raise ValueError("epsilon must lie in [0, 1]")
    x_hat = eps * x + (1 - eps) * x_fake
    m = x_hat.shape[0]
    _, pre, _ = _forward(w, x_hat)
    g, chain, masks = _input_grad(w, pre)
    norm = np.sqrt(np.sum(g * g, axis=1))
    penalty = lam * (norm - 1.0) ** 2
    safe = np.where(norm > 0, norm, 1.0)
    coeff = np.where(norm > 0, 2 * lam * (norm - 1.0) / safe, 0.0) / m
    u_bar = coeff[:, None] * g
    gw = [None] * len(w.weights)
    for k, t in chain:
        # u_k = t_k W_k, so W_bar = t_k^T u_bar; t_bar = u_bar W_k^T
        gw[k] = t.T @ u_bar
        if k + 1 < len(w.weights):
            u_bar = (u_bar @ w.weights[k].T) * masks[k]
    gb = [np.zeros_like(b) for b in w.biases]
    return penalty, MLP(gw, gb, w.slope, w.output)


def gradient_penalty(w: MLP, x, x_fake, epsilon: float, lam: float):
    penalty, grad = gradient_penalty_batch(w, x, x_fake, [epsilon], lam)
    return float(penalty[0]), grad


def baseline_generator_forward_batch(p: MLP, zs, image_shape=(28, 28)) -> np.ndarray:
    zs = np.atleast_2d(np.asarray(zs, dtype=np.float64))
    if zs.shape[1] != p.n_inputs:
        raise ConfigError(f"latent dimension {zs.shape[1]} != generator input {p.n_inputs}")
    out, _, _ = _forward(p, zs)
    if out.shape[1] != image_shape[0] * image_shape[1]:
        raise ConfigError(f"generator emits {out.shape[1]} pixels, image needs {image_shape}")
    return out.reshape((-1,) + tuple(image_shape))


def baseline_generator_forward(p: MLP, z, image_shape=(28, 28)) -> np.ndarray:
    return baseline_generator_forward_batch(p, z, image_shape)[0]
