"""Embed -> graph attention -> Q-head network: parameters, forward/backward,
Adam updates, and the parameter checkpoint format.

Everything is float64. The forward pass records a trace that the backward
pass consumes to produce exact gradients for every parameter.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericError, ShapeError, ValidationError
from . import backends

CHECKPOINT_MAGIC = b"GLPK1\n"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetworkSpec:
    in_dim: int = 16
    hidden: int = 20
    gat_layers: int = 1
    heads: int = 5
    out_dim: int = 4

    def param_shapes(self):
        shapes = {"embed.W": (self.hidden, self.in_dim), "embed.b": (self.hidden,)}
        for l in range(self.gat_layers):
            for part in ("Wt", "Ws", "Wv"):
                shapes[f"gat{l}.{part}"] = (self.heads, self.hidden, self.hidden)
        shapes["q.W"] = (self.out_dim, self.hidden)
        shapes["q.b"] = (self.out_dim,)
        return shapes


def _glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(spec: NetworkSpec, rng) -> dict:
    params = {}
    for name, shape in spec.param_shapes().items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        elif len(shape) == 3:
            params[name] = _glorot(rng, shape, shape[2], shape[1])
        else:
            params[name] = _glorot(rng, shape, shape[1], shape[0])
    return params


def zero_params(spec: NetworkSpec) -> dict:
    return {name: np.zeros(shape) for name, shape in spec.param_shapes().items()}


def clone_params(params: dict) -> dict:
    return {k: v.copy() for k, v in params.items()}


def check_shapes(params: dict, spec: NetworkSpec) -> None:
    expected = spec.param_shapes()
    if set(params) != set(expected):
        raise ShapeError("parameter names do not match the network spec")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise ShapeError(f"{name}: expected shape {shape}, got {params[name].shape}")


def csr_neighborhoods(neighborhoods):
    """Pack per-node neighbor lists (self included) into CSR ptr/idx arrays."""
    ptr = np.zeros(len(neighborhoods) + 1, dtype=np.int64)
    idx = []
    for i, nbrs in enumerate(neighborhoods):
        if i not in nbrs:
            raise ShapeError(f"neighborhood of node {i} must include the node itself")
        for j in nbrs:
            if not (0 <= j < len(neighborhoods)):
                raise ShapeError(f"neighbor id {j} out of range")
        idx.extend(nbrs)
        ptr[i + 1] = len(idx)
    return ptr, np.asarray(idx, dtype=np.int64)


def forward(params: dict, spec: NetworkSpec, X, ptr, idx, backend=None):
    """Compute Q values (n, out_dim) and a trace for the backward pass."""
    be = backend or backends.active
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != spec.in_dim:
        raise ShapeError(f"input must be (n, {spec.in_dim}), got {X.shape}")
    trace = {"X": X, "gat": []}
    pre = be.dense_forward(X, params["embed.W"], params["embed.b"])
    trace["embed_pre"] = pre
    h = np.maximum(pre, 0.0)
    for l in range(spec.gat_layers):
        mix, attn, T, U, V = be.gat_forward(
            h, params[f"gat{l}.Wt"], params[f"gat{l}.Ws"], params[f"gat{l}.Wv"], ptr, idx
        )
        trace["gat"].append({"in": h, "mix": mix, "attn": attn, "T": T, "U": U, "V": V})
        h = np.maximum(mix, 0.0)
    trace["head_in"] = h
    q = be.dense_forward(h, params["q.W"], params["q.b"])
    return q, trace


def attention_weights(trace, layer: int = 0):
    """Attention weights (heads, edges) recorded by a forward pass."""
    return trace["gat"][layer]["attn"]


def backward(params: dict, spec: NetworkSpec, trace, ptr, idx, g_q, backend=None) -> dict:
    """Exact gradients w.r.t. every parameter for upstream gradient g_q."""
    be = backend or backends.active
    g_q = np.ascontiguousarray(g_q, dtype=np.float64)
    if g_q.shape != (trace["X"].shape[0], spec.out_dim):
        raise ShapeError("upstream gradient shape does not match the trace")
    grads = {}
    g, grads["q.W"], grads["q.b"] = be.dense_backward(trace["head_in"], params["q.W"], g_q)
    for l in reversed(range(spec.gat_layers)):
        rec = trace["gat"][l]
        g_pre = np.ascontiguousarray(g * (rec["mix"] > 0.0))
        g, grads[f"gat{l}.Wt"], grads[f"gat{l}.Ws"], grads[f"gat{l}.Wv"] = be.gat_backward(
            rec["in"], params[f"gat{l}.Wt"], params[f"gat{l}.Ws"], params[f"gat{l}.Wv"],
            ptr, idx, rec["attn"], rec["T"], rec["U"], rec["V"],
            g_pre,
        )
    g_pre = np.ascontiguousarray(g * (trace["embed_pre"] > 0.0))
    _, grads["embed.W"], grads["embed.b"] = be.dense_backward(trace["X"], params["embed.W"], g_pre)
    return grads


# -- optimizer ----------------------------------------------------------


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_params(cls, params):
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            t=0,
        )


def adam_update(params, grads, state: AdamState, lr, beta1=0.9, beta2=0.999,
                eps=1e-8, backend=None):
    """One Adam step over all parameters, in place."""
    be = backend or backends.active
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {name}")
    state.t += 1
    for name in params:
        be.adam_step(
            params[name].reshape(-1), np.ascontiguousarray(grads[name]).reshape(-1),
            state.m[name].reshape(-1), state.v[name].reshape(-1),
            state.t, lr, beta1, beta2, eps,
        )


# -- checkpoints --------------------------------------------------------


def save_params(path, params: dict) -> None:
    """Write named float64 arrays: magic, JSON header, little-endian data."""
    names = sorted(params)
    header = {
        "version": CHECKPOINT_VERSION,
        "arrays": [{"name": n, "shape": list(params[n].shape)} for n in names],
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(params[n], dtype="<f8").tobytes())


def load_params(path) -> dict:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValidationError(f"{path}: not a parameter checkpoint")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValidationError(f"{path}: unsupported checkpoint version")
        params = {}
        for rec in header["arrays"]:
            shape = tuple(rec["shape"])
            count = int(np.prod(shape)) if shape else 1
            data = fh.read(count * 8)
            if len(data) != count * 8:
                raise ValidationError(f"{path}: truncated checkpoint data")
            params[rec["name"]] = np.frombuffer(data, dtype="<f8").reshape(shape).copy()
    return params
