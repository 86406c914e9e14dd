"""Dense tanh networks with exact reverse-mode gradients and Adam.

Float64 throughout. An Mlp is a list of (W, b) layers with tanh on hidden
layers; the output head is either the identity (value networks) or tanh
squashed affinely into per-dimension bounds (policy networks), which keeps
policy outputs inside the actuator range by construction.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from ringlab.errors import CheckpointError, DivergenceError

OUT_IDENTITY = "identity"
OUT_TANH_AFFINE = "tanh_affine"

_MAGIC = b"RLMLP\x00"
_VERSION = 1


@dataclass
class Mlp:
    """Weights, biases, and the output head of one dense network."""

    weights: list          # W_k of shape (fan_in, fan_out)
    biases: list           # b_k of shape (fan_out,)
    output: str = OUT_IDENTITY
    out_lo: np.ndarray | None = None   # per-dim lower bounds (tanh_affine)
    out_hi: np.ndarray | None = None

    @property
    def dims(self) -> list:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                   self.output,
                   None if self.out_lo is None else self.out_lo.copy(),
                   None if self.out_hi is None else self.out_hi.copy())

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])


def mlp_init(dims, output: str = OUT_IDENTITY, bounds=None, seed: int = 0,
             final_scale: float = 3e-3) -> Mlp:
    """Uniform fan-in init (+-1/sqrt(fan_in)); final layer +-final_scale."""
    rng = np.random.Generator(np.random.PCG64([seed, 0x4E45]))
    weights, biases = [], []
    for k in range(len(dims) - 1):
        fan_in, fan_out = dims[k], dims[k + 1]
        lim = final_scale if k == len(dims) - 2 else 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-lim, lim, size=fan_out))
    lo = hi = None
    if output == OUT_TANH_AFFINE:
        if bounds is None:
            raise ValueError("tanh_affine head requires bounds")
        lo = np.asarray([b[0] for b in bounds], dtype=float)
        hi = np.asarray([b[1] for b in bounds], dtype=float)
        if np.any(lo >= hi):
            raise ValueError("bounds must satisfy lo < hi")
    elif output != OUT_IDENTITY:
        raise ValueError(f"unknown output head {output!r}")
    return Mlp(weights, biases, output, lo, hi)


def forward(net: Mlp, x: np.ndarray):
    """Forward pass. Accepts (d,) or (batch, d); returns (y, cache).

    The cache holds every layer input plus the final pre-activation and is
    exactly what backward() needs.
    """
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.shape[1] != net.weights[0].shape[0]:
        raise ValueError(
            f"input dim {h.shape[1]} != network input dim {net.weights[0].shape[0]}")
    inputs = [h]
    for k in range(net.n_layers - 1):
        h = np.tanh(h @ net.weights[k] + net.biases[k])
        inputs.append(h)
    z = h @ net.weights[-1] + net.biases[-1]
    if net.output == OUT_TANH_AFFINE:
        t = np.tanh(z)
        y = net.out_lo + 0.5 * (t + 1.0) * (net.out_hi - net.out_lo)
    else:
        y = z
    cache = {"inputs": inputs, "z": z, "squeeze": squeeze}
    return (y[0] if squeeze else y), cache


def penultimate(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Activations of the last hidden layer (rows = samples)."""
    _, cache = forward(net, np.atleast_2d(np.asarray(x, dtype=float)))
    return cache["inputs"][-1]


def backward(net: Mlp, cache, grad_out: np.ndarray):
    """Exact gradients for a forward() cache.

    grad_out is dL/dy with y's shape. Returns (grads, grad_input) where
    grads is a list of (dW, db) matching net layers.
    """
    g = np.asarray(grad_out, dtype=float)
    if cache["squeeze"]:
        g = g[None, :]
    inputs, z = cache["inputs"], cache["z"]
    if g.shape != z.shape:
        raise ValueError(f"grad_out shape {g.shape} does not match output {z.shape}")
    if net.output == OUT_TANH_AFFINE:
        t = np.tanh(z)
        g = g * 0.5 * (net.out_hi - net.out_lo) * (1.0 - t * t)
    grads = [None] * net.n_layers
    for k in range(net.n_layers - 1, -1, -1):
        h_in = inputs[k]
        grads[k] = (h_in.T @ g, g.sum(axis=0))
        g = g @ net.weights[k].T
        if k > 0:
            g = g * (1.0 - h_in * h_in)   # h_in is tanh output of layer k-1
    grad_input = g[0] if cache["squeeze"] else g
    return grads, grad_input


@dataclass
class AdamState:
    """Per-parameter moment accumulators for Adam."""

    step_size: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_net(cls, net: Mlp, step_size: float = 1e-3, **kw) -> "AdamState":
        state = cls(step_size=step_size, **kw)
        state.m = [(np.zeros_like(w), np.zeros_like(b))
                   for w, b in zip(net.weights, net.biases)]
        state.v = [(np.zeros_like(w), np.zeros_like(b))
                   for w, b in zip(net.weights, net.biases)]
        return state


def adam_step(net: Mlp, grads, opt: AdamState, l2_lambda: float = 0.0) -> None:
    """One in-place Adam update; optional decoupled weight decay.

    With l2_lambda > 0 every parameter is first scaled by
    (1 - step_size * l2_lambda), then the Adam increment is applied.
    Rejects non-finite gradients without touching the parameters.
    """
    for dw, db in grads:
        if not (np.all(np.isfinite(dw)) and np.all(np.isfinite(db))):
            raise DivergenceError("non-finite gradient; update rejected")
    opt.t += 1
    b1t = 1.0 - opt.beta1 ** opt.t
    b2t = 1.0 - opt.beta2 ** opt.t
    decay = 1.0 - opt.step_size * l2_lambda
    for k, (dw, db) in enumerate(grads):
        mw, mb = opt.m[k]
        vw, vb = opt.v[k]
        mw *= opt.beta1; mw += (1 - opt.beta1) * dw
        mb *= opt.beta1; mb += (1 - opt.beta1) * db
        vw *= opt.beta2; vw += (1 - opt.beta2) * dw * dw
        vb *= opt.beta2; vb += (1 - opt.beta2) * db * db
        if l2_lambda > 0:
            net.weights[k] *= decay
            net.biases[k] *= decay
        net.weights[k] -= opt.step_size * (mw / b1t) / (np.sqrt(vw / b2t) + opt.eps)
        net.biases[k] -= opt.step_size * (mb / b1t) / (np.sqrt(vb / b2t) + opt.eps)


def soft_update(target: Mlp, online: Mlp, rho: float) -> None:
    """target <- rho * online + (1 - rho) * target, exactly, in place."""
    for k in range(target.n_layers):
        target.weights[k] *= (1.0 - rho)
        target.weights[k] += rho * online.weights[k]
        target.biases[k] *= (1.0 - rho)
        target.biases[k] += rho * online.biases[k]


def save_mlp(net: Mlp, path) -> None:
    """Binary checkpoint: magic, version, head kind, dims, bounds, then
    row-major little-endian float64 weights and biases per layer."""
    parts = [_MAGIC, struct.pack("<II", _VERSION, net.n_layers)]
    parts.append(struct.pack("<B", 1 if net.output == OUT_TANH_AFFINE else 0))
    parts.append(struct.pack(f"<{net.n_layers + 1}I", *net.dims))
    if net.output == OUT_TANH_AFFINE:
        parts.append(net.out_lo.astype("<f8").tobytes())
        parts.append(net.out_hi.astype("<f8").tobytes())
    for w, b in zip(net.weights, net.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_mlp(path, expect_dims=None) -> Mlp:
    """Inverse of save_mlp. expect_dims guards against loading a checkpoint
    into the wrong role (e.g. a policy file where a value net is needed)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(blob):
            raise CheckpointError(f"truncated checkpoint {path}")
        out = blob[off:off + n]
        off += n
        return out

    if take(len(_MAGIC)) != _MAGIC:
        raise CheckpointError(f"bad magic bytes in {path}")
    version, n_layers = struct.unpack("<II", take(8))
    if version != _VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    head = struct.unpack("<B", take(1))[0]
    dims = list(struct.unpack(f"<{n_layers + 1}I", take(4 * (n_layers + 1))))
    lo = hi = None
    output = OUT_IDENTITY
    if head == 1:
        output = OUT_TANH_AFFINE
        lo = np.frombuffer(take(8 * dims[-1]), dtype="<f8").copy()
        hi = np.frombuffer(take(8 * dims[-1]), dtype="<f8").copy()
    weights, biases = [], []
    for k in range(n_layers):
        w = np.frombuffer(take(8 * dims[k] * dims[k + 1]), dtype="<f8")
        weights.append(w.reshape(dims[k], dims[k + 1]).copy())
        biases.append(np.frombuffer(take(8 * dims[k + 1]), dtype="<f8").copy())
    if off != len(blob):
        raise CheckpointError(f"trailing bytes in {path}")
    net = Mlp(weights, biases, output, lo, hi)
    if expect_dims is not None and list(expect_dims) != net.dims:
        raise CheckpointError(
            f"checkpoint dims {net.dims} do not match expected {list(expect_dims)}")
    return net
