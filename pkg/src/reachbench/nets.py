"""Minimal dense network stack: MLPs, reverse-mode gradients, Adam.

Everything is float64 numpy. A network's parameters live in one flat
vector laid out layer by layer as ``[W (d_in x d_out, row-major), b]``,
so optimizer steps, soft target updates, and checkpoints all operate on
plain arrays.

Checkpoint byte layout (little-endian):

    bytes 0..7    magic ``b"RBNET001"``
    bytes 8..11   uint32 header length N
    bytes 12..    N bytes of UTF-8 JSON: {"schema_version": 1,
                  "layer_dims": [...], "activations": [...]}
    rest          param_count float64 values (the flat parameter vector)
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

_MAGIC = b"RBNET001"

ACTIVATIONS = ("tanh", "relu", "identity")


class TrainingDivergence(RuntimeError):
    """Raised when a gradient or loss stops being finite."""


def _act(tag: str, z: np.ndarray) -> np.ndarray:
    if tag == "tanh":
        return np.tanh(z)
    if tag == "relu":
        return np.maximum(z, 0.0)
    if tag == "identity":
        return z
    raise ValueError(f"unknown activation {tag!r}")


def _act_grad(tag: str, y: np.ndarray) -> np.ndarray:
    # derivative expressed through the activation output
    if tag == "tanh":
        return 1.0 - y * y
    if tag == "relu":
        return (y > 0.0).astype(float)
    if tag == "identity":
        return np.ones_like(y)
    raise ValueError(f"unknown activation {tag!r}")


class Mlp:
    """Fully connected net; parameters shared through one flat vector."""

    def __init__(self, layer_dims, activations, params: np.ndarray | None = None):
        self.layer_dims = tuple(int(d) for d in layer_dims)
        self.activations = tuple(activations)
        if len(self.layer_dims) < 2:
            raise ValueError("need at least input and output dims")
        if len(self.activations) != len(self.layer_dims) - 1:
            raise ValueError("one activation tag required per affine layer")
        for tag in self.activations:
            if tag not in ACTIVATIONS:
                raise ValueError(f"unknown activation {tag!r}")
        count = sum(din * dout + dout
                    for din, dout in zip(self.layer_dims, self.layer_dims[1:]))
        if params is None:
            params = np.zeros(count)
        params = np.asarray(params, dtype=float)
        if params.shape != (count,):
            raise ValueError(f"expected {count} parameters, got {params.shape}")
        self.params = params

    @property
    def param_count(self) -> int:
        return self.params.size

    def _layers(self, params: np.ndarray):
        """(W, b) views into the flat vector, one pair per layer."""
        out = []
        offset = 0
        for din, dout in zip(self.layer_dims, self.layer_dims[1:]):
            w = params[offset:offset + din * dout].reshape(din, dout)
            offset += din * dout
            b = params[offset:offset + dout]
            offset += dout
            out.append((w, b))
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Pure forward pass; accepts a single vector or an (N, d) batch."""
        y, _ = self.forward_cached(x, keep=False)
        return y

    def forward_cached(self, x: np.ndarray, keep: bool = True):
        """Forward pass returning (output, cache) for a later backward()."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.shape[1] != self.layer_dims[0]:
            raise ValueError(
                f"input dim {h.shape[1]} != expected {self.layer_dims[0]}")
        acts = [h] if keep else None
        for (w, b), tag in zip(self._layers(self.params), self.activations):
            h = _act(tag, h @ w + b)
            if keep:
                acts.append(h)
        y = h[0] if single else h
        return y, (acts, single)

    def backward(self, cache, upstream: np.ndarray):
        """Reverse-mode pass.

        Returns ``(grad_params, grad_input)`` for the scalar function
        ``sum(upstream * output)``; batches accumulate over the leading axis.
        """
        acts, single = cache
        if acts is None:
            raise ValueError("forward_cached(keep=True) required before backward")
        upstream = np.asarray(upstream, dtype=float)
        g = upstream[None, :] if single else upstream
        if g.shape != acts[-1].shape:
            raise ValueError(
                f"upstream shape {g.shape} != output shape {acts[-1].shape}")
        grads = np.empty_like(self.params)
        layers = self._layers(self.params)
        gviews = self._layers(grads)
        for i in range(len(layers) - 1, -1, -1):
            w, _ = layers[i]
            gw, gb = gviews[i]
            dz = g * _act_grad(self.activations[i], acts[i + 1])
            np.matmul(acts[i].T, dz, out=gw)
            np.sum(dz, axis=0, out=gb)
            g = dz @ w.T
        grad_input = g[0] if single else g
        return grads, grad_input

    def clone(self) -> "Mlp":
        return Mlp(self.layer_dims, self.activations, self.params.copy())


def glorot_init(layer_dims, rng: np.random.Generator) -> np.ndarray:
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases."""
    chunks = []
    for din, dout in zip(layer_dims, layer_dims[1:]):
        bound = np.sqrt(6.0 / (din + dout))
        chunks.append(rng.uniform(-bound, bound, size=din * dout))
        chunks.append(np.zeros(dout))
    return np.concatenate(chunks)


@dataclass
class AdamState:
    """Bias-corrected adaptive-moment optimizer state for one flat vector."""

    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    def reset(self, size: int) -> None:
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.step_count = 0


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """One optimizer step; mutates ``params`` (and the state) in place."""
    if params.shape != grads.shape:
        raise ValueError("params and grads must be aligned")
    if not np.all(np.isfinite(grads)):
        raise TrainingDivergence("non-finite gradient")
    if state.m is None or state.m.shape != params.shape:
        state.reset(params.size)
    state.step_count += 1
    t = state.step_count
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grads
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** t)
    v_hat = state.v / (1.0 - state.beta2 ** t)
    params -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def soft_update(target_params: np.ndarray, online_params: np.ndarray,
                tau: float) -> np.ndarray:
    """Polyak averaging: target <- (1-tau)*target + tau*online, in place."""
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    if target_params.shape != online_params.shape:
        raise ValueError("target and online params must be aligned")
    target_params *= 1.0 - tau
    target_params += tau * online_params
    return target_params


def save_checkpoint(path, net: Mlp) -> None:
    header = json.dumps({
        "schema_version": 1,
        "layer_dims": list(net.layer_dims),
        "activations": list(net.activations),
    }).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(net.params, dtype="<f8").tobytes())


def load_checkpoint(path) -> Mlp:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"not a network checkpoint: {path}")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("schema_version") != 1:
            raise ValueError(
                f"unsupported checkpoint schema_version {header.get('schema_version')!r}")
        params = np.frombuffer(fh.read(), dtype="<f8").astype(float)
    return Mlp(header["layer_dims"], header["activations"], params)
