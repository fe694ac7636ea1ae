"""Minimal dense feed-forward network engine in float64 numpy.

Everything here is deliberately explicit: forward passes, analytic
backpropagation, Adam, soft target updates and parameter-space utilities
are all hand-written so that tests can pin exact tolerances.

Snapshot format (text, bit-exact round trip)
--------------------------------------------
Line 1:   ``network v1 layers=<n>``
Per layer:
  ``layer <k> act=<tanh|relu|linear> norm=<0|1> out=<o> in=<i>``
  ``weight <h0> <h1> ...``   row-major ``o*i`` values, ``float.hex()`` encoded
  ``bias <h0> ...``          ``o`` values
  ``ln_gain <...>`` / ``ln_offset <...>``   only when ``norm=1``
Hex encoding round-trips IEEE-754 doubles exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

ACTIVATIONS = ("tanh", "relu", "linear")

# Epsilon inside the layer-norm denominator. Fixed, not configurable:
# changing it would silently invalidate saved snapshots.
LN_EPS = 1e-5


class Layer:
    """One dense layer: weight (out, in), bias (out,), activation tag.

    When ``ln_gain``/``ln_offset`` are present the pre-activation is
    layer-normalized (then scaled/shifted) before the nonlinearity.
    """

    __slots__ = ("weight", "bias", "activation", "ln_gain", "ln_offset")

    def __init__(self, weight, bias, activation, ln_gain=None, ln_offset=None):
        weight = np.asarray(weight, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        if weight.ndim != 2 or bias.shape != (weight.shape[0],):
            raise ValueError(
                f"bad layer shapes: weight {weight.shape}, bias {bias.shape}"
            )
        if (ln_gain is None) != (ln_offset is None):
            raise ValueError("ln_gain and ln_offset must be given together")
        self.weight = weight
        self.bias = bias
        self.activation = activation
        if ln_gain is not None:
            ln_gain = np.asarray(ln_gain, dtype=np.float64)
            ln_offset = np.asarray(ln_offset, dtype=np.float64)
            if ln_gain.shape != bias.shape or ln_offset.shape != bias.shape:
                raise ValueError("layer-norm parameter shapes must match bias")
        self.ln_gain = ln_gain
        self.ln_offset = ln_offset

    @property
    def normalized(self) -> bool:
        return self.ln_gain is not None

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    def param_items(self):
        """(name, array) pairs for every trainable array of this layer."""
        items = [("weight", self.weight), ("bias", self.bias)]
        if self.normalized:
            items += [("ln_gain", self.ln_gain), ("ln_offset", self.ln_offset)]
        return items

    def copy(self) -> "Layer":
        return Layer(
            self.weight.copy(),
            self.bias.copy(),
            self.activation,
            None if self.ln_gain is None else self.ln_gain.copy(),
            None if self.ln_offset is None else self.ln_offset.copy(),
        )


@dataclass
class LayerGrads:
    """Gradient arrays shape-matched to one Layer."""

    weight: np.ndarray
    bias: np.ndarray
    ln_gain: np.ndarray | None = None
    ln_offset: np.ndarray | None = None

    def param_items(self):
        items = [("weight", self.weight), ("bias", self.bias)]
        if self.ln_gain is not None:
            items += [("ln_gain", self.ln_gain), ("ln_offset", self.ln_offset)]
        return items


# A full-network gradient is one LayerGrads per layer.
Gradient = list


class Network:
    """Dense feed-forward net over float64 arrays.

    ``forward`` accepts a single input vector (in_dim,) or a batch
    (B, in_dim) and returns the matching shape. ``backward`` returns the
    exact gradients of ``sum(upstream * output)`` with respect to all
    parameters and the input.

    The constructor takes ownership of the Layer objects: all parameter
    arrays are consolidated into one flat vector and the layer attributes
    become views into it, so whole-network updates (Adam, soft updates)
    run as single vector operations.
    """

    def __init__(self, layers: Sequence[Layer]):
        layers = list(layers)
        if not layers:
            raise ValueError("network needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ValueError(
                    f"layer dims do not chain: {prev.out_dim} -> {nxt.in_dim}"
                )
        for k, layer in enumerate(layers):
            for name, arr in layer.param_items():
                if not np.isfinite(arr).all():
                    raise ValueError(f"non-finite entries in layer {k} {name}")
        total = sum(arr.size for layer in layers for _, arr in layer.param_items())
        flat = np.empty(total, dtype=np.float64)
        offset = 0
        for layer in layers:
            for name, arr in layer.param_items():
                flat[offset : offset + arr.size] = arr.ravel()
                setattr(layer, name, flat[offset : offset + arr.size].reshape(arr.shape))
                offset += arr.size
        self.flat = flat
        self.layers = layers

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def copy(self) -> "Network":
        return Network([layer.copy() for layer in self.layers])

    def _check_input(self, x: np.ndarray):
        if x.shape[-1] != self.in_dim:
            raise ValueError(
                f"input dim {x.shape[-1]} does not match network input {self.in_dim}"
            )
        if not np.isfinite(x).all():
            raise ValueError("non-finite network input")

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        a = x[None, :] if single else x
        self._check_input(a)
        for layer in self.layers:
            a = _layer_forward(layer, a)[-1]
        return a[0] if single else a

    def forward_with_caches(self, x: np.ndarray):
        """Batched forward keeping per-layer intermediates for backprop."""
        self._check_input(x)
        a = x
        caches = []
        for layer in self.layers:
            cache = _layer_forward(layer, a)
            caches.append((a, cache))
            a = cache[-1]
        return a, caches

    def backward(self, x, upstream):
        """Gradients of ``sum(upstream * forward(x))``.

        Returns ``(param_grads, input_grad)``; the forward pass is redone
        internally so callers only supply the original input.
        """
        x = np.asarray(x, dtype=np.float64)
        upstream = np.asarray(upstream, dtype=np.float64)
        single = x.ndim == 1
        a = x[None, :] if single else x
        d = upstream[None, :] if single else upstream
        if d.shape != (a.shape[0], self.out_dim):
            raise ValueError(
                f"upstream shape {upstream.shape} does not match output dim "
                f"{self.out_dim}"
            )
        _, caches = self.forward_with_caches(a)
        grads, dx = self.backward_from_caches(caches, d)
        return grads, (dx[0] if single else dx)

    def backward_from_caches(self, caches, d: np.ndarray):
        """Backprop given the caches of a previous forward_with_caches."""
        grads: Gradient = [None] * len(self.layers)
        for k in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[k]
            x_in, (h, zhat, inv_std, out) = caches[k]
            if layer.activation == "tanh":
                dh = d * (1.0 - out * out)
            elif layer.activation == "relu":
                dh = d * (h > 0.0)
            else:
                dh = d
            if layer.normalized:
                dgain = (dh * zhat).sum(axis=0)
                doffset = dh.sum(axis=0)
                dzhat = dh * layer.ln_gain
                dz = inv_std * (
                    dzhat
                    - dzhat.mean(axis=-1, keepdims=True)
                    - zhat * (dzhat * zhat).mean(axis=-1, keepdims=True)
                )
            else:
                dgain = doffset = None
                dz = dh
            grads[k] = LayerGrads(
                weight=dz.T @ x_in,
                bias=dz.sum(axis=0),
                ln_gain=dgain,
                ln_offset=doffset,
            )
            d = dz @ layer.weight

        return grads, d


def _layer_forward(layer: Layer, x: np.ndarray):
    """Returns (pre_activation h, zhat, inv_std, output); LN terms None if off."""
    z = x @ layer.weight.T + layer.bias
    if layer.normalized:
        centered = z - z.mean(axis=-1, keepdims=True)
        var = (centered * centered).mean(axis=-1, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + LN_EPS)
        zhat = centered * inv_std
        h = zhat * layer.ln_gain + layer.ln_offset
    else:
        zhat = inv_std = None
        h = z
    if layer.activation == "tanh":
        out = np.tanh(h)
    elif layer.activation == "relu":
        out = np.maximum(h, 0.0)
    else:
        out = h
    return h, zhat, inv_std, out


def mlp(
    in_dim: int,
    hidden: Iterable[int],
    out_dim: int,
    rng: np.random.Generator,
    hidden_activation: str = "relu",
    output_activation: str = "linear",
    normalize: bool = False,
    final_init: float = 3e-3,
) -> Network:
    """Build an MLP with fan-in uniform init and a small final layer.

    Hidden weights and biases are uniform in +-1/sqrt(fan_in); the output
    layer is uniform in +-final_init. ``normalize`` turns on layer
    normalization for the hidden layers only.
    """
    dims = [in_dim, *hidden, out_dim]
    layers = []
    for k in range(len(dims) - 1):
        fan_in, fan_out = dims[k], dims[k + 1]
        last = k == len(dims) - 2
        bound = final_init if last else 1.0 / np.sqrt(fan_in)
        weight = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        bias = rng.uniform(-bound, bound, size=fan_out)
        act = output_activation if last else hidden_activation
        if normalize and not last:
            layers.append(
                Layer(weight, bias, act, np.ones(fan_out), np.zeros(fan_out))
            )
        else:
            layers.append(Layer(weight, bias, act))
    return Network(layers)


def zeros_like_grads(net: Network) -> Gradient:
    return [
        LayerGrads(
            weight=np.zeros_like(layer.weight),
            bias=np.zeros_like(layer.bias),
            ln_gain=None if layer.ln_gain is None else np.zeros_like(layer.ln_gain),
            ln_offset=None
            if layer.ln_offset is None
            else np.zeros_like(layer.ln_offset),
        )
        for layer in net.layers
    ]


def flatten_gradient(net: Network, grads: Gradient) -> np.ndarray:
    """Concatenate gradient arrays in the network's flat parameter order."""
    if len(grads) != len(net.layers):
        raise ValueError("gradient/net layer count mismatch")
    parts = []
    for k, (layer, g) in enumerate(zip(net.layers, grads)):
        params = dict(layer.param_items())
        items = g.param_items()
        if [n for n, _ in items] != list(params):
            raise ValueError(f"gradient entries for layer {k} do not match")
        for name, garr in items:
            if garr.shape != params[name].shape:
                raise ValueError(f"gradient shape mismatch for layer {k} {name}")
            parts.append(garr.ravel())
    return np.concatenate(parts)


class AdamState:
    """Adam moment accumulators mirroring a network's parameter arrays.

    Moments live in flat vectors matching the network's flat layout;
    ``m`` and ``v`` expose per-layer shaped views into them.
    """

    def __init__(self, net: Network, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ValueError("lr must be positive")
        if not (0.0 < beta1 < 1.0 and 0.0 < beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m_flat = np.zeros_like(net.flat)
        self.v_flat = np.zeros_like(net.flat)
        self._scratch = np.empty_like(net.flat)
        self.m = self._layer_views(net, self.m_flat)
        self.v = self._layer_views(net, self.v_flat)

    @staticmethod
    def _layer_views(net: Network, flat: np.ndarray):
        views = []
        offset = 0
        for layer in net.layers:
            per_layer = {}
            for name, arr in layer.param_items():
                per_layer[name] = flat[offset : offset + arr.size].reshape(arr.shape)
                offset += arr.size
            views.append(per_layer)
        return views


def adam_step(state: AdamState, net: Network, grads: Gradient) -> None:
    """One in-place Adam update with bias correction."""
    for k, g in enumerate(grads):
        for name, garr in g.param_items():
            if not np.isfinite(garr).all():
                raise ValueError(f"non-finite gradient in layer {k} {name}")
    g = flatten_gradient(net, grads)
    if g.size != net.flat.size:
        raise ValueError("gradient size does not match parameter count")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    m, v, tmp = state.m_flat, state.v_flat, state._scratch
    m *= b1
    np.multiply(g, 1.0 - b1, out=tmp)
    m += tmp
    v *= b2
    np.multiply(g, g, out=tmp)
    tmp *= 1.0 - b2
    v += tmp
    np.divide(v, corr2, out=tmp)
    np.sqrt(tmp, out=tmp)
    tmp += state.eps
    np.divide(m, tmp, out=tmp)
    tmp *= state.lr / corr1
    net.flat -= tmp


def soft_update(target: Network, source: Network, tau: float) -> None:
    """In place: every target entry becomes tau*source + (1-tau)*target."""
    if not (0.0 <= tau <= 1.0):
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if len(target.layers) != len(source.layers):
        raise ValueError("network layer counts differ")
    for t_layer, s_layer in zip(target.layers, source.layers):
        t_shapes = [(n, a.shape) for n, a in t_layer.param_items()]
        s_shapes = [(n, a.shape) for n, a in s_layer.param_items()]
        if t_shapes != s_shapes:
            raise ValueError("network parameter shapes differ")
    target.flat *= 1.0 - tau
    target.flat += tau * source.flat


def perturb(net: Network, sigma: float, rng: np.random.Generator) -> Network:
    """Fresh copy with N(0, sigma^2) noise added to weights and biases.

    Layer-norm gain/offset arrays are left untouched so normalization
    statistics stay meaningful under perturbation.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    out = net.copy()
    if sigma == 0:
        return out
    for layer in out.layers:
        layer.weight += rng.normal(0.0, sigma, size=layer.weight.shape)
        layer.bias += rng.normal(0.0, sigma, size=layer.bias.shape)
    return out


def action_distance(a: Network, b: Network, probe_states) -> float:
    """RMS output difference of two networks over a set of probe states."""
    probes = np.asarray(probe_states, dtype=np.float64)
    if probes.size == 0:
        raise ValueError("probe state set is empty")
    if probes.ndim == 1:
        probes = probes[None, :]
    diff = a.forward(probes) - b.forward(probes)
    return float(np.sqrt(np.mean(diff * diff)))


# ---------------------------------------------------------------------------
# Snapshot I/O


def _hex_line(tag: str, arr: np.ndarray) -> str:
    return tag + " " + " ".join(float(v).hex() for v in arr.ravel())


def _parse_hex_line(line: str, tag: str, shape) -> np.ndarray:
    parts = line.split()
    if not parts or parts[0] != tag:
        raise ValueError(f"expected {tag!r} line, got {line[:40]!r}")
    vals = np.array([float.fromhex(p) for p in parts[1:]], dtype=np.float64)
    return vals.reshape(shape)


def write_network(net: Network, fh: TextIO) -> None:
    fh.write(f"network v1 layers={len(net.layers)}\n")
    for k, layer in enumerate(net.layers):
        fh.write(
            f"layer {k} act={layer.activation} norm={int(layer.normalized)} "
            f"out={layer.out_dim} in={layer.in_dim}\n"
        )
        fh.write(_hex_line("weight", layer.weight) + "\n")
        fh.write(_hex_line("bias", layer.bias) + "\n")
        if layer.normalized:
            fh.write(_hex_line("ln_gain", layer.ln_gain) + "\n")
            fh.write(_hex_line("ln_offset", layer.ln_offset) + "\n")


def read_network(fh: TextIO) -> Network:
    header = fh.readline().split()
    if len(header) != 3 or header[0] != "network" or header[1] != "v1":
        raise ValueError("bad network snapshot header")
    n_layers = int(header[2].removeprefix("layers="))
    layers = []
    for k in range(n_layers):
        meta = fh.readline().split()
        if len(meta) != 6 or meta[0] != "layer" or int(meta[1]) != k:
            raise ValueError(f"bad layer header for layer {k}")
        fields = dict(part.split("=", 1) for part in meta[2:])
        act = fields["act"]
        norm = fields["norm"] == "1"
        out_dim = int(fields["out"])
        in_dim = int(fields["in"])
        weight = _parse_hex_line(fh.readline(), "weight", (out_dim, in_dim))
        bias = _parse_hex_line(fh.readline(), "bias", (out_dim,))
        if norm:
            gain = _parse_hex_line(fh.readline(), "ln_gain", (out_dim,))
            offset = _parse_hex_line(fh.readline(), "ln_offset", (out_dim,))
            layers.append(Layer(weight, bias, act, gain, offset))
        else:
            layers.append(Layer(weight, bias, act))
    return Network(layers)


def save_network(net: Network, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_network(net, fh)


def load_network(path) -> Network:
    with open(path, "r", encoding="utf-8") as fh:
        return read_network(fh)
