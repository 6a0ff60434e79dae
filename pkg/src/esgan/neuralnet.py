"""Dense-network substrate: layers, pooling, backprop, ADAM, LR schedule.

Everything runs in 64-bit numpy on (batch, width) arrays.  The layer set
is deliberately small (dense + max-pool + nearest-neighbor upsample) but
each backward pass is exact, so analytic gradients can be checked against
finite differences to tight tolerances.  Checkpoints are structured text
with hex-encoded floats and round-trip byte-identically.
"""

import math
from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    pass


class StateError(RuntimeError):
    """Backward called without a cached forward pass."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or gradient."""


# ---------------------------------------------------------------- activations

def act_forward(name, z):
    if name == "identity":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    raise ValueError(f"unknown activation {name!r}")


def act_backward(name, z, a, g):
    """dL/dz from dL/da, using whichever of z or a is cheaper."""
    if name == "identity":
        return g
    if name == "relu":
        return g * (z > 0.0)
    if name == "tanh":
        return g * (1.0 - a * a)
    if name == "sigmoid":
        return g * a * (1.0 - a)
    raise ValueError(f"unknown activation {name!r}")


# --------------------------------------------------------------------- layers

@dataclass
class DenseLayer:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str = "identity"

    @property
    def in_width(self):
        return self.W.shape[1]

    @property
    def out_width(self):
        return self.W.shape[0]


def glorot_uniform(rng, out_width, in_width):
    lim = math.sqrt(6.0 / (in_width + out_width))
    return rng.uniform(-lim, lim, (out_width, in_width))


def make_dense(rng, in_width, out_width, activation):
    return DenseLayer(
        W=glorot_uniform(rng, out_width, in_width),
        b=np.zeros(out_width),
        activation=activation,
    )


def dense_forward(layer, x):
    """h(W x + b) on a vector or a (batch, in) array."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != layer.in_width:
        raise ShapeError(
            f"input width {x.shape[-1]} != layer width {layer.in_width}"
        )
    return act_forward(layer.activation, x @ layer.W.T + layer.b)


def _dense_fwd_cached(layer, x):
    z = x @ layer.W.T + layer.b
    a = act_forward(layer.activation, z)
    return a, (x, z, a)


def _dense_bwd(layer, g, cache):
    """Returns (dL/dx, dW, db) for upstream gradient dL/da."""
    x, z, a = cache
    gz = act_backward(layer.activation, z, a, g)
    dW = gz.T @ x if gz.ndim == 2 else np.outer(gz, x)
    db = gz.sum(axis=0) if gz.ndim == 2 else gz
    gx = gz @ layer.W
    return gx, dW, db


def maxpool_forward(x, window):
    """Non-overlapping max pooling along the last axis.

    Returns (pooled, argmax offsets); ties resolve to the first index of
    the window, which keeps the backward pass deterministic.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if window < 1 or n % window:
        raise ShapeError(f"length {n} not divisible by window {window}")
    blocks = x.reshape(x.shape[:-1] + (n // window, window))
    idx = blocks.argmax(axis=-1)
    pooled = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
    return pooled, idx


def maxpool_backward(g, idx, window):
    g = np.asarray(g, dtype=float)
    out = np.zeros(g.shape[:-1] + (g.shape[-1], window))
    np.put_along_axis(out, idx[..., None], g[..., None], axis=-1)
    return out.reshape(g.shape[:-1] + (g.shape[-1] * window,))


def upsample_forward(x, factor):
    """Nearest-neighbor repetition along the last axis."""
    if factor < 1:
        raise ShapeError(f"upsample factor must be >= 1, got {factor}")
    return np.repeat(np.asarray(x, dtype=float), factor, axis=-1)


def upsample_backward(g, factor):
    g = np.asarray(g, dtype=float)
    return g.reshape(g.shape[:-1] + (g.shape[-1] // factor, factor)).sum(axis=-1)


# ------------------------------------------------------------------- networks

class MLP:
    """Plain chain of dense layers with cached forward for backprop."""

    def __init__(self, layers):
        self.layers = list(layers)
        self._cache = None

    @classmethod
    def build(cls, rng, widths, activations):
        if len(activations) != len(widths) - 1:
            raise ShapeError("need one activation per layer")
        layers = [
            make_dense(rng, widths[i], widths[i + 1], activations[i])
            for i in range(len(widths) - 1)
        ]
        return cls(layers)

    def forward(self, x, cache=True):
        caches = []
        a = np.asarray(x, dtype=float)
        for layer in self.layers:
            if a.shape[-1] != layer.in_width:
                raise ShapeError(
                    f"width {a.shape[-1]} != layer input {layer.in_width}"
                )
            a, c = _dense_fwd_cached(layer, a)
            caches.append(c)
        self._cache = caches if cache else None
        return a

    def backward(self, g):
        """Gradients from upstream dL/d(output); returns (dL/dx, grads)."""
        if self._cache is None:
            raise StateError("no cached forward pass")
        grads = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            g, dW, db = _dense_bwd(self.layers[i], g, self._cache[i])
            grads[i] = (dW, db)
        return g, grads

    def parameters(self):
        out = {}
        for i, layer in enumerate(self.layers):
            out[f"{i}.W"] = layer.W
            out[f"{i}.b"] = layer.b
        return out

    def grads_as_dict(self, grads):
        out = {}
        for i, (dW, db) in enumerate(grads):
            out[f"{i}.W"] = dW
            out[f"{i}.b"] = db
        return out


class Autoencoder:
    """Encoder-decoder pair with two pool/upsample stages and one skip.

    Encoder: dense(n->n) relu, pool 2, dense(n/2->n/2) relu, pool 2,
    dense(n/4->latent) relu.  Decoder mirrors it with tanh hidden layers
    and a sigmoid output; the encoder activation after the first pool is
    added to the pre-activation of the matching-width decoder layer.
    """

    def __init__(self, enc1, enc2, enc3, dec1, dec2, dec3, skip=True):
        self.enc1, self.enc2, self.enc3 = enc1, enc2, enc3
        self.dec1, self.dec2, self.dec3 = dec1, dec2, dec3
        self.skip = skip
        self._cache = None

    @classmethod
    def build(cls, rng, n_feat=64, latent=None, skip=True):
        if n_feat % 4:
            raise ShapeError("feature width must be divisible by 4")
        if latent is None:
            latent = max(1, n_feat // 8)
        half, quarter = n_feat // 2, n_feat // 4
        net = cls(
            enc1=make_dense(rng, n_feat, n_feat, "relu"),
            enc2=make_dense(rng, half, half, "relu"),
            enc3=make_dense(rng, quarter, latent, "relu"),
            dec1=make_dense(rng, latent, quarter, "tanh"),
            dec2=make_dense(rng, half, half, "tanh"),
            dec3=make_dense(rng, n_feat, n_feat, "sigmoid"),
            skip=skip,
        )
        # Start the sigmoid output near the small-probability regime that
        # dominates Schmidt spectra instead of at 0.5.  Without this the
        # first epochs of mean fitting drive the decoder weights large
        # enough to saturate the tanh stages, after which the tiny
        # sample-to-sample variation of the spectra cannot pass through
        # and training settles on a constant-output predictor.
        net.dec3.b[:] = -3.0
        return net

    @property
    def n_feat(self):
        return self.enc1.in_width

    def encode(self, x):
        a1 = dense_forward(self.enc1, x)
        p1, _ = maxpool_forward(a1, 2)
        a2 = dense_forward(self.enc2, p1)
        p2, _ = maxpool_forward(a2, 2)
        return dense_forward(self.enc3, p2)

    def forward(self, x, cache=True):
        x = np.asarray(x, dtype=float)
        a1, c1 = _dense_fwd_cached(self.enc1, x)
        p1, i1 = maxpool_forward(a1, 2)
        a2, c2 = _dense_fwd_cached(self.enc2, p1)
        p2, i2 = maxpool_forward(a2, 2)
        z, c3 = _dense_fwd_cached(self.enc3, p2)

        d1, c4 = _dense_fwd_cached(self.dec1, z)
        u1 = upsample_forward(d1, 2)
        z2 = u1 @ self.dec2.W.T + self.dec2.b
        if self.skip:
            z2 = z2 + p1
        a5 = act_forward(self.dec2.activation, z2)
        c5 = (u1, z2, a5)
        u2 = upsample_forward(a5, 2)
        xhat, c6 = _dense_fwd_cached(self.dec3, u2)
        self._cache = (c1, i1, c2, i2, c3, c4, c5, c6) if cache else None
        return xhat

    def backward(self, g):
        """Gradients of a scalar loss from dL/dxhat; returns (dL/dx, dict)."""
        if self._cache is None:
            raise StateError("no cached forward pass")
        c1, i1, c2, i2, c3, c4, c5, c6 = self._cache
        g, dW6, db6 = _dense_bwd(self.dec3, g, c6)
        g = upsample_backward(g, 2)
        u1, z2, a5 = c5
        gz = act_backward(self.dec2.activation, z2, a5, g)
        dW5 = gz.T @ u1 if gz.ndim == 2 else np.outer(gz, u1)
        db5 = gz.sum(axis=0) if gz.ndim == 2 else gz
        g_skip = gz if self.skip else None  # lands on p1 below
        g = gz @ self.dec2.W
        g = upsample_backward(g, 2)
        g, dW4, db4 = _dense_bwd(self.dec1, g, c4)

        g, dW3, db3 = _dense_bwd(self.enc3, g, c3)
        g = maxpool_backward(g, i2, 2)
        g, dW2, db2 = _dense_bwd(self.enc2, g, c2)
        if g_skip is not None:
            g = g + g_skip
        g = maxpool_backward(g, i1, 2)
        g, dW1, db1 = _dense_bwd(self.enc1, g, c1)
        grads = {
            "enc1.W": dW1, "enc1.b": db1,
            "enc2.W": dW2, "enc2.b": db2,
            "enc3.W": dW3, "enc3.b": db3,
            "dec1.W": dW4, "dec1.b": db4,
            "dec2.W": dW5, "dec2.b": db5,
            "dec3.W": dW6, "dec3.b": db6,
        }
        return g, grads

    def parameters(self):
        out = {}
        for name in ("enc1", "enc2", "enc3", "dec1", "dec2", "dec3"):
            layer = getattr(self, name)
            out[f"{name}.W"] = layer.W
            out[f"{name}.b"] = layer.b
        return out


# ---------------------------------------------------------------------- adam

@dataclass
class OptimizerState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8


def adam_step(state, params, grads, lr):
    """One bias-corrected ADAM update, in place on the parameter arrays."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient in {name}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**state.t
    corr2 = 1.0 - b2**state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
        v = state.v.get(name)
        if v is None:
            v = state.v[name] = np.zeros_like(p)
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps_adam)
    return params


@dataclass(frozen=True)
class LrSchedule:
    eta_max: float
    eta_min: float
    T: int

    def __post_init__(self):
        if not 0.0 <= self.eta_min <= self.eta_max:
            raise ValueError("need 0 <= eta_min <= eta_max")
        if self.T < 1:
            raise ValueError("schedule length must be >= 1")


def cosine_lr(schedule, epoch):
    """Cosine annealing from eta_max to eta_min over T epochs."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    if epoch > schedule.T:
        return schedule.eta_min
    return schedule.eta_min + 0.5 * (schedule.eta_max - schedule.eta_min) * (
        1.0 + math.cos(math.pi * epoch / schedule.T)
    )


# ----------------------------------------------------------------- checkpoint

CHECKPOINT_MAGIC = "network checkpoint v1"


def save_checkpoint(path, meta, arrays):
    """Structured-text checkpoint: metadata lines + hex-float arrays.

    Scalars in ``meta`` keep their type tag; arrays are written row-major
    as float hex, one ``array`` block per entry, keys sorted, so the file
    round-trips byte-identically.
    """
    lines = [f"# {CHECKPOINT_MAGIC}"]
    for key in sorted(meta):
        val = meta[key]
        if isinstance(val, bool):
            lines.append(f"meta {key} bool {int(val)}")
        elif isinstance(val, int):
            lines.append(f"meta {key} int {val}")
        elif isinstance(val, float):
            lines.append(f"meta {key} float {float(val).hex()}")
        else:
            lines.append(f"meta {key} str {val}")
    for key in sorted(arrays):
        a = np.asarray(arrays[key], dtype=float)
        shape = " ".join(str(n) for n in a.shape)
        lines.append(f"array {key} {len(a.shape)} {shape}")
        lines.append(" ".join(x.hex() for x in a.ravel()))
    text = "\n".join(lines) + "\n"
    with open(path, "w") as fh:
        fh.write(text)


def load_checkpoint(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != f"# {CHECKPOINT_MAGIC}":
        raise ValueError(f"{path} is not a network checkpoint")
    meta, arrays = {}, {}
    i = 1
    while i < len(lines):
        parts = lines[i].split(None, 3)
        if parts[0] == "meta":
            _, key, kind, raw = parts
            if kind == "bool":
                meta[key] = bool(int(raw))
            elif kind == "int":
                meta[key] = int(raw)
            elif kind == "float":
                meta[key] = float.fromhex(raw)
            else:
                meta[key] = raw
            i += 1
        elif parts[0] == "array":
            _, key, ndim, rest = parts
            shape = tuple(int(x) for x in rest.split()[: int(ndim)])
            values = [float.fromhex(x) for x in lines[i + 1].split()]
            arrays[key] = np.array(values).reshape(shape)
            i += 2
        else:
            raise ValueError(f"unrecognized checkpoint line: {lines[i]!r}")
    return meta, arrays
