"""Minimal dense network with manual backpropagation.

Batched forward/backward over float64 arrays, an adaptive-moment optimizer
with bias correction, global-norm gradient clipping, categorical sampling
from logits, and a versioned binary checkpoint format.

Checkpoint layout (little-endian):
    magic   4 bytes  b"MLP1"
    meta    u32 length + UTF-8 JSON (layer sizes, activations, extra dict)
    arrays  for each parameter array: u32 ndim, u32 dims..., float64 data
    crc32   u32 over everything after the magic
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_MAGIC = b"MLP1"


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "identity":
        return z
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return 1.0 - a * a
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "identity":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class ForwardTrace:
    x: np.ndarray                 # (N, d_in)
    pre: list                     # per-layer pre-activations
    post: list                    # per-layer activations


class Mlp:
    """Fully-connected net; weights W[l] has shape (d_l, d_{l+1})."""

    def __init__(self, sizes: list[int], activations: list[str],
                 rng: np.random.Generator | None = None):
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        self.sizes = list(sizes)
        self.activations = list(activations)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        rng = rng or np.random.default_rng(0)
        for d_in, d_out in zip(sizes[:-1], sizes[1:]):
            scale = 1.0 / np.sqrt(d_in)
            self.weights.append(rng.normal(0.0, scale, size=(d_in, d_out)))
            self.biases.append(np.zeros(d_out))

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def set_params(self, arrays: list[np.ndarray]) -> None:
        expected = [p.shape for p in self.params]
        got = [a.shape for a in arrays]
        if expected != got:
            raise ValueError(f"parameter shapes {got} do not match net {expected}")
        self.weights = [np.array(a, dtype=float) for a in arrays[0::2]]
        self.biases = [np.array(a, dtype=float) for a in arrays[1::2]]

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, ForwardTrace]:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.sizes[0]:
            raise ValueError(f"input width {x.shape[1]} != {self.sizes[0]}")
        pre, post = [], []
        h = x
        for w, b, act in zip(self.weights, self.biases, self.activations):
            z = h @ w + b
            h = _act(act, z)
            pre.append(z)
            post.append(h)
        return h, ForwardTrace(x=x, pre=pre, post=post)

    def backward(self, trace: ForwardTrace, dout: np.ndarray) -> list[np.ndarray]:
        """Exact gradients (summed over the batch) for the scalar loss whose
        output gradient is ``dout``; returned in ``params`` order."""
        dout = np.atleast_2d(np.asarray(dout, dtype=float))
        if dout.shape != trace.post[-1].shape:
            raise ValueError("output gradient shape mismatch")
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))
        delta = dout
        for layer in reversed(range(len(self.weights))):
            z, a = trace.pre[layer], trace.post[layer]
            delta = delta * _act_grad(self.activations[layer], z, a)
            inp = trace.x if layer == 0 else trace.post[layer - 1]
            grads[2 * layer] = inp.T @ delta
            grads[2 * layer + 1] = delta.sum(axis=0)
            if layer > 0:
                delta = delta @ self.weights[layer].T
        return grads


def softmax(logits: np.ndarray) -> np.ndarray:
    """Shift-invariant softmax over the last axis."""
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_categorical(logits: np.ndarray, rng: np.random.Generator
                        ) -> tuple[int, float, np.ndarray]:
    """Sample an index by inverse CDF; return (index, log-prob, distribution)."""
    logits = np.asarray(logits, dtype=float).ravel()
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    probs = softmax(logits)
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    idx = int(np.searchsorted(cdf, rng.random(), side="right"))
    idx = min(idx, len(probs) - 1)
    return idx, float(np.log(probs[idx] + 1e-300)), probs


def clip_grads(grads: list[np.ndarray], max_norm: float) -> list[np.ndarray]:
    """Scale the whole gradient list so its global L2 norm is <= max_norm."""
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total <= max_norm or total == 0.0:
        return grads
    scale = max_norm / total
    return [g * scale for g in grads]


class Adam:
    """Adaptive-moment optimizer with bias correction."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray],
             lr: float) -> list[np.ndarray]:
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise FloatingPointError("non-finite gradient; step rejected")
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        out = []
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            out.append(p - lr * m_hat / (np.sqrt(v_hat) + self.eps))
        return out


def save_arrays(path: str | Path, arrays: list[np.ndarray], meta: dict) -> None:
    """Write the versioned binary checkpoint; round-trips bit-exactly."""
    body = bytearray()
    meta_bytes = json.dumps(meta, sort_keys=True).encode()
    body += struct.pack("<I", len(meta_bytes)) + meta_bytes
    body += struct.pack("<I", len(arrays))
    for a in arrays:
        a = np.asarray(a, dtype="<f8")  # tobytes() emits C order; 0-dim kept
        body += struct.pack("<I", a.ndim)
        body += struct.pack(f"<{a.ndim}I", *a.shape)
        body += a.tobytes()
    crc = zlib.crc32(bytes(body)) & 0xFFFFFFFF
    Path(path).write_bytes(_MAGIC + bytes(body) + struct.pack("<I", crc))


def load_arrays(path: str | Path) -> tuple[list[np.ndarray], dict]:
    blob = Path(path).read_bytes()
    if blob[:4] != _MAGIC:
        raise ValueError("not a checkpoint file (bad magic)")
    body, (crc,) = blob[4:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise ValueError("checkpoint checksum mismatch")
    off = 0

    def take(fmt: str) -> tuple:
        nonlocal off
        size = struct.calcsize(fmt)
        vals = struct.unpack_from(fmt, body, off)
        off += size
        return vals

    (meta_len,) = take("<I")
    meta = json.loads(body[off:off + meta_len].decode())
    off += meta_len
    (count,) = take("<I")
    arrays = []
    for _ in range(count):
        (ndim,) = take("<I")
        shape = take(f"<{ndim}I")
        n = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(body, dtype="<f8", count=n, offset=off).reshape(shape)
        off += 8 * n
        arrays.append(arr.copy())
    return arrays, meta
