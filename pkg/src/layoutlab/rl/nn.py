"""Minimal dense-network core: ReLU blocks, named linear heads, manual
backprop, Adam, and a flat binary checkpoint format.

Everything is float64 numpy so analytic gradients can be checked against
central finite differences tightly.
"""

from __future__ import annotations

import struct

import numpy as np


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


class DenseNetwork:
    """`n_blocks` of (linear + ReLU) followed by one linear layer per
    named head. Weights start uniform in +-sqrt(6/(fan_in+fan_out))."""

    def __init__(self, input_dim: int, hidden_dim: int, n_blocks: int,
                 heads: dict[str, int], rng: np.random.Generator):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.n_blocks = n_blocks
        self.head_names = tuple(heads)
        self.head_dims = dict(heads)
        self.params: list[np.ndarray] = []

        def linear(n_in: int, n_out: int) -> None:
            bound = np.sqrt(6.0 / (n_in + n_out))
            self.params.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
            self.params.append(np.zeros(n_out))

        dim = input_dim
        for _ in range(n_blocks):
            linear(dim, hidden_dim)
            dim = hidden_dim
        for name in self.head_names:
            linear(dim, heads[name])

    # -- forward / backward -------------------------------------------------

    def forward(self, x: np.ndarray) -> tuple[dict[str, np.ndarray], list]:
        """Batched forward pass; returns head logits and the cache needed
        by backward()."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        cache = [x]
        h = x
        for b in range(self.n_blocks):
            w, bias = self.params[2 * b], self.params[2 * b + 1]
            z = h @ w + bias
            h = np.maximum(z, 0.0)
            cache.append(z)
        logits = {}
        base = 2 * self.n_blocks
        for k, name in enumerate(self.head_names):
            w, bias = self.params[base + 2 * k], self.params[base + 2 * k + 1]
            logits[name] = h @ w + bias
        return logits, cache

    def backward(self, cache: list,
                 dlogits: dict[str, np.ndarray]) -> list[np.ndarray]:
        """Gradients w.r.t. every parameter given head-logit gradients."""
        x = cache[0]
        h_last = np.maximum(cache[-1], 0.0) if self.n_blocks else x
        grads: list[np.ndarray | None] = [None] * len(self.params)
        base = 2 * self.n_blocks
        dh = np.zeros_like(h_last)
        for k, name in enumerate(self.head_names):
            w = self.params[base + 2 * k]
            dl = dlogits.get(name)
            if dl is None:
                grads[base + 2 * k] = np.zeros_like(w)
                grads[base + 2 * k + 1] = np.zeros_like(
                    self.params[base + 2 * k + 1])
                continue
            dl = np.atleast_2d(dl)
            grads[base + 2 * k] = h_last.T @ dl
            grads[base + 2 * k + 1] = dl.sum(axis=0)
            dh = dh + dl @ w.T
        for b in range(self.n_blocks - 1, -1, -1):
            z = cache[b + 1]
            dz = dh * (z > 0)
            h_prev = x if b == 0 else np.maximum(cache[b], 0.0)
            grads[2 * b] = h_prev.T @ dz
            grads[2 * b + 1] = dz.sum(axis=0)
            dh = dz @ self.params[2 * b].T
        return grads

    # -- parameter vector helpers (used by gradient checks) ------------------

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, flat: np.ndarray) -> None:
        pos = 0
        for p in self.params:
            p.flat[:] = flat[pos:pos + p.size]
            pos += p.size

    @staticmethod
    def flatten(grads: list[np.ndarray]) -> np.ndarray:
        return np.concatenate([g.ravel() for g in grads])


class Adam:
    """Adam with bias correction; a zero gradient leaves parameters
    untouched."""

    def __init__(self, params: list[np.ndarray], lr: float = 1e-5,
                 beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        for g in grads:
            if not np.isfinite(g).all():
                raise FloatingPointError("non-finite gradient in Adam step")
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


_MAGIC = b"LLNN"


def save_checkpoint(net: DenseNetwork) -> bytes:
    """Binary layout: magic, array count, then per array a dims header
    (u32 ndim + u32 dims) and the row-major float64 little-endian data."""
    out = [_MAGIC, struct.pack("<I", len(net.params))]
    for p in net.params:
        out.append(struct.pack("<I", p.ndim))
        out.append(struct.pack(f"<{p.ndim}I", *p.shape))
        out.append(np.ascontiguousarray(p, dtype="<f8").tobytes())
    return b"".join(out)


def load_checkpoint(net: DenseNetwork, blob: bytes) -> None:
    if blob[:4] != _MAGIC:
        raise ValueError("not a network checkpoint")
    pos = 4
    (count,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    if count != len(net.params):
        raise ValueError(f"checkpoint holds {count} arrays, "
                         f"network has {len(net.params)}")
    for i in range(count):
        (ndim,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        shape = struct.unpack_from(f"<{ndim}I", blob, pos)
        pos += 4 * ndim
        if tuple(shape) != net.params[i].shape:
            raise ValueError(f"array {i} shape {shape} != "
                             f"{net.params[i].shape}")
        n = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(blob, dtype="<f8", count=n, offset=pos)
        pos += 8 * n
        # in place, so optimizers bound to these arrays stay valid
        net.params[i][...] = data.reshape(shape)
