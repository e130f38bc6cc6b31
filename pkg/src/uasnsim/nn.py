"""Minimal neural network core on numpy with hand-derived gradients.

Provides a tanh MLP, row-wise softmax, multi-head scaled-dot-product
attention and an Adam optimizer. Every forward has a matching analytic
backward so gradients can be validated against central finite differences.
Parameters live in plain dicts of float64 arrays; checkpoints round-trip
exactly through numpy .npz archives.
"""
from __future__ import annotations

import math
from typing import Dict, Sequence, Tuple

import numpy as np

Params = Dict[str, np.ndarray]


def init_matrix(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    """Seeded uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]."""
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along an axis."""
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def softmax_backward(y: np.ndarray, dy: np.ndarray, axis: int = -1) -> np.ndarray:
    """Backward through softmax given its output y and upstream dy.

    dx_i = y_i * (dy_i - sum_j dy_j * y_j) along the softmax axis.
    """
    inner = np.sum(dy * y, axis=axis, keepdims=True)
    return y * (dy - inner)


class MLP:
    """Dense stack x @ W + b with tanh between layers, linear output."""

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = list(sizes)
        self.params: Params = {}
        for k in range(len(sizes) - 1):
            self.params[f"w{k}"] = init_matrix(rng, sizes[k], sizes[k + 1])
            self.params[f"b{k}"] = np.zeros(sizes[k + 1])
        self.n_layers = len(sizes) - 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_cache(x)
        return y

    @staticmethod
    def forward_with(params: Params, n_layers: int, x: np.ndarray) -> np.ndarray:
        """Stateless forward through an externally held parameter dict."""
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        h = x
        for k in range(n_layers):
            z = h @ params[f"w{k}"] + params[f"b{k}"]
            h = np.tanh(z) if k < n_layers - 1 else z
        return h[0] if squeeze else h

    def forward_cache(self, x: np.ndarray) -> Tuple[np.ndarray, list]:
        """Forward pass keeping post-activation values for backward."""
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        acts = [x]
        h = x
        for k in range(self.n_layers):
            z = h @ self.params[f"w{k}"] + self.params[f"b{k}"]
            h = np.tanh(z) if k < self.n_layers - 1 else z
            acts.append(h)
        out = h[0] if squeeze else h
        return out, [acts, squeeze]

    def backward(self, cache: list, dy: np.ndarray) -> Tuple[Params, np.ndarray]:
        """Gradients of a scalar loss wrt params and input, given dL/dy."""
        acts, squeeze = cache
        dy = np.asarray(dy, dtype=np.float64)
        if squeeze:
            dy = dy[None, :]
        grads: Params = {}
        delta = dy
        for k in range(self.n_layers - 1, -1, -1):
            if k < self.n_layers - 1:
                # tanh' = 1 - tanh^2, acts[k+1] holds tanh output
                delta = delta * (1.0 - acts[k + 1] ** 2)
            grads[f"w{k}"] = acts[k].T @ delta
            grads[f"b{k}"] = delta.sum(axis=0)
            delta = delta @ self.params[f"w{k}"].T
        dx = delta[0] if squeeze else delta
        return grads, dx


class MultiHeadAttention:
    """Scaled dot-product attention with learned Q/K/V projections.

    Token features (B, T, F) are projected by per-role matrices into
    head_count heads of width d_k; per query token the output is the
    attention-weighted mix of value rows, heads concatenated. No output
    projection and no residual path.
    """

    def __init__(self, feature_dim: int, head_count: int, d_k: int,
                 rng: np.random.Generator):
        if head_count < 1 or d_k < 1:
            raise ValueError("head_count and d_k must be >= 1")
        self.feature_dim = feature_dim
        self.head_count = head_count
        self.d_k = d_k
        self.model_dim = head_count * d_k
        self.params: Params = {
            "w_q": init_matrix(rng, feature_dim, self.model_dim),
            "w_k": init_matrix(rng, feature_dim, self.model_dim),
            "w_v": init_matrix(rng, feature_dim, self.model_dim),
        }

    def _split(self, m: np.ndarray) -> np.ndarray:
        # (B, T, H*D) -> (B, H, T, D)
        b, t, _ = m.shape
        return m.reshape(b, t, self.head_count, self.d_k).transpose(0, 2, 1, 3)

    def _merge(self, m: np.ndarray) -> np.ndarray:
        # (B, H, T, D) -> (B, T, H*D)
        b, h, t, d = m.shape
        return m.transpose(0, 2, 1, 3).reshape(b, t, h * d)

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_cache(x)
        return y

    def forward_cache(self, x: np.ndarray) -> Tuple[np.ndarray, dict]:
        """x: (T, F) or (B, T, F). Returns (B, T, H*D) matching input rank."""
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None, :, :]
        q = self._split(x @ self.params["w_q"])
        k = self._split(x @ self.params["w_k"])
        v = self._split(x @ self.params["w_v"])
        scale = 1.0 / math.sqrt(self.d_k)
        scores = (q @ k.transpose(0, 1, 3, 2)) * scale
        attn = softmax(scores, axis=-1)
        out = self._merge(attn @ v)
        cache = {"x": x, "q": q, "k": k, "v": v, "attn": attn,
                 "scale": scale, "squeeze": squeeze}
        y = out[0] if squeeze else out
        return y, cache

    def backward(self, cache: dict, dy: np.ndarray) -> Tuple[Params, np.ndarray]:
        """Gradients wrt projections and the shared token input."""
        dy = np.asarray(dy, dtype=np.float64)
        if cache["squeeze"]:
            dy = dy[None, :, :]
        x, q, k, v = cache["x"], cache["q"], cache["k"], cache["v"]
        attn, scale = cache["attn"], cache["scale"]
        d_out = self._split(dy)
        d_attn = d_out @ v.transpose(0, 1, 3, 2)
        d_v = attn.transpose(0, 1, 3, 2) @ d_out
        d_scores = softmax_backward(attn, d_attn, axis=-1)
        d_q = (d_scores @ k) * scale
        d_k = (d_scores.transpose(0, 1, 3, 2) @ q) * scale
        dq_flat = self._merge(d_q)
        dk_flat = self._merge(d_k)
        dv_flat = self._merge(d_v)
        grads: Params = {
            "w_q": np.einsum("btf,bth->fh", x, dq_flat),
            "w_k": np.einsum("btf,bth->fh", x, dk_flat),
            "w_v": np.einsum("btf,bth->fh", x, dv_flat),
        }
        dx = (dq_flat @ self.params["w_q"].T
              + dk_flat @ self.params["w_k"].T
              + dv_flat @ self.params["w_v"].T)
        if cache["squeeze"]:
            dx = dx[0]
        return grads, dx


class Adam:
    """Adam with bias correction; raises on non-finite gradients."""

    def __init__(self, params: Params, lr: float = 3e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: Params, grads: Params) -> None:
        self.t += 1
        for key, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise RuntimeError(f"non-finite gradient for parameter {key}")
            m = self.m[key] = self.beta1 * self.m[key] + (1 - self.beta1) * g
            v = self.v[key] = self.beta2 * self.v[key] + (1 - self.beta2) * g * g
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            params[key] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def polyak_update(target: Params, online: Params, coeff: float) -> None:
    """target <- (1-coeff)*target + coeff*online, in place."""
    for key in target:
        target[key] += coeff * (online[key] - target[key])


def save_params(path: str, params: Params) -> None:
    """Write a parameter dict to a .npz archive (shapes and dtypes kept)."""
    np.savez(path, **params)


def load_params(path: str) -> Params:
    with np.load(path) as data:
        return {k: data[k].copy() for k in data.files}
