"""Minimal differentiable layer set with hand-derived backward passes.

Layer kinds: dense, conv2d, convtranspose2d, lrelu, relu, tanh,
layernorm, pixelnorm. Forward records an activation tape; backward
consumes the tape once and accumulates gradients into the
:class:`ParamStore`. Everything works on whatever float dtype the
parameters carry (training uses float32, gradient checks float64).

Convolutions use im2col/col2im; transposed convolution is implemented as
the exact adjoint of the corresponding convolution, so the stored kernel
layout is ``(c_in, c_out, kh, kw)`` for convtranspose2d and
``(c_out, c_in, kh, kw)`` for conv2d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "Layer",
    "NetworkSpec",
    "ParamStore",
    "ShapeError",
    "Tape",
    "backward",
    "conv2d",
    "conv_discriminator",
    "conv_generator",
    "convtranspose2d",
    "dense",
    "forward",
    "layernorm",
    "lrelu",
    "mlp_discriminator",
    "mlp_generator",
    "output_shape",
    "pixelnorm",
    "relu",
    "shape_plan",
    "tanh",
]

LAYERNORM_EPS = 1e-5
PIXELNORM_EPS = 1e-8
WEIGHT_INIT_STD = 0.02


class ShapeError(ValueError):
    pass


@dataclass
class Layer:
    """One layer description. Only the fields relevant to ``kind`` are used."""

    kind: str
    in_ch: int = 0
    out_ch: int = 0
    kernel: int = 4
    stride: int = 1
    padding: int = 0
    slope: float = 0.2
    normalized: bool = False


def dense(in_features: int, out_features: int, normalized: bool = False) -> Layer:
    return Layer("dense", in_ch=in_features, out_ch=out_features, normalized=normalized)


def conv2d(in_ch: int, out_ch: int, kernel: int = 4, stride: int = 2,
           padding: int = 1, normalized: bool = False) -> Layer:
    return Layer("conv2d", in_ch=in_ch, out_ch=out_ch, kernel=kernel,
                 stride=stride, padding=padding, normalized=normalized)


def convtranspose2d(in_ch: int, out_ch: int, kernel: int = 4, stride: int = 2,
                    padding: int = 1) -> Layer:
    return Layer("convtranspose2d", in_ch=in_ch, out_ch=out_ch, kernel=kernel,
                 stride=stride, padding=padding)


def lrelu(slope: float = 0.2) -> Layer:
    if not 0.0 < slope < 1.0:
        raise ValueError(f"lrelu slope must be in (0, 1), got {slope}")
    return Layer("lrelu", slope=slope)


def relu() -> Layer:
    return Layer("relu")


def tanh() -> Layer:
    return Layer("tanh")


def layernorm() -> Layer:
    return Layer("layernorm")


def pixelnorm() -> Layer:
    return Layer("pixelnorm")


@dataclass
class NetworkSpec:
    """Declarative network: per-sample input shape plus an ordered layer list."""

    input_shape: tuple[int, ...]
    layers: list[Layer]


def _conv_out_extent(n: int, k: int, s: int, p: int, where: str) -> int:
    t = n + 2 * p - k
    if t < 0 or t % s != 0:
        raise ShapeError(
            f"{where}: extent {n} with kernel={k} stride={s} padding={p} "
            "does not produce an integer output extent"
        )
    return t // s + 1


def _convt_out_extent(n: int, k: int, s: int, p: int, where: str) -> int:
    out = (n - 1) * s - 2 * p + k
    if out < 1:
        raise ShapeError(f"{where}: output extent {out} is not positive")
    return out


def shape_plan(spec: NetworkSpec) -> list[tuple[int, ...]]:
    """Per-sample output shape after each layer; raises naming the bad layer."""
    shapes = []
    cur = tuple(spec.input_shape)
    for i, layer in enumerate(spec.layers):
        where = f"layer {i} ({layer.kind})"
        if layer.kind == "dense":
            if cur != (layer.in_ch,):
                raise ShapeError(f"{where}: expected input shape ({layer.in_ch},), got {cur}")
            cur = (layer.out_ch,)
        elif layer.kind == "conv2d":
            if len(cur) != 3 or cur[0] != layer.in_ch:
                raise ShapeError(
                    f"{where}: expected input shape ({layer.in_ch}, H, W), got {cur}"
                )
            h = _conv_out_extent(cur[1], layer.kernel, layer.stride, layer.padding, where)
            w = _conv_out_extent(cur[2], layer.kernel, layer.stride, layer.padding, where)
            cur = (layer.out_ch, h, w)
        elif layer.kind == "convtranspose2d":
            if len(cur) != 3 or cur[0] != layer.in_ch:
                raise ShapeError(
                    f"{where}: expected input shape ({layer.in_ch}, H, W), got {cur}"
                )
            h = _convt_out_extent(cur[1], layer.kernel, layer.stride, layer.padding, where)
            w = _convt_out_extent(cur[2], layer.kernel, layer.stride, layer.padding, where)
            cur = (layer.out_ch, h, w)
        elif layer.kind in ("lrelu", "relu", "tanh", "layernorm", "pixelnorm"):
            pass
        else:
            raise ShapeError(f"{where}: unknown layer kind")
        shapes.append(cur)
    return shapes


def output_shape(spec: NetworkSpec) -> tuple[int, ...]:
    plan = shape_plan(spec)
    return plan[-1] if plan else tuple(spec.input_shape)


class ParamStore:
    """Per-layer weight/bias tensors plus gradient accumulators of the same shapes.

    Weights are drawn from N(0, 0.02^2) with a per-layer stream derived
    from the seed and the layer index; biases start at zero, layernorm
    gains at one.
    """

    def __init__(self, spec: NetworkSpec, seed=0, dtype=np.float32):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        prefix = list(seed) if isinstance(seed, (tuple, list)) else [int(seed)]
        in_shapes = [tuple(spec.input_shape)] + shape_plan(spec)[:-1] if spec.layers else []
        self.params: list[dict[str, np.ndarray]] = []
        self.grads: list[dict[str, np.ndarray]] = []
        for i, layer in enumerate(spec.layers):
            rng = np.random.default_rng(prefix + [i])
            p: dict[str, np.ndarray] = {}
            if layer.kind == "dense":
                p["W"] = rng.standard_normal((layer.out_ch, layer.in_ch)) * WEIGHT_INIT_STD
                p["b"] = np.zeros(layer.out_ch)
            elif layer.kind == "conv2d":
                p["W"] = rng.standard_normal(
                    (layer.out_ch, layer.in_ch, layer.kernel, layer.kernel)
                ) * WEIGHT_INIT_STD
                p["b"] = np.zeros(layer.out_ch)
            elif layer.kind == "convtranspose2d":
                p["W"] = rng.standard_normal(
                    (layer.in_ch, layer.out_ch, layer.kernel, layer.kernel)
                ) * WEIGHT_INIT_STD
                p["b"] = np.zeros(layer.out_ch)
            elif layer.kind == "layernorm":
                p["g"] = np.ones(in_shapes[i])
                p["b"] = np.zeros(in_shapes[i])
            self.params.append({k: v.astype(self.dtype) for k, v in p.items()})
            self.grads.append({k: np.zeros_like(v) for k, v in self.params[i].items()})

    def zero_grad(self) -> None:
        for layer_grads in self.grads:
            for g in layer_grads.values():
                g[...] = 0

    def named(self):
        """Yields (layer_index, name, array) over all parameters, in order."""
        for i, layer_params in enumerate(self.params):
            for name in sorted(layer_params):
                yield i, name, layer_params[name]


# ---------------------------------------------------------------------------
# conv primitives

def _im2col(xp: np.ndarray, kh: int, kw: int, s: int) -> np.ndarray:
    # xp already padded, (N, C, Hp, Wp) -> (N, C*kh*kw, Ho*Wo)
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::s, ::s]
    n, c, ho, wo = win.shape[:4]
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * kh * kw, ho * wo)
    return np.ascontiguousarray(cols)


def _col2im(cols: np.ndarray, out_shape: tuple, kh: int, kw: int, s: int, p: int) -> np.ndarray:
    # scatter-add the column view back to (N, C, H, W)
    n, c, h, w = out_shape
    ho = (h + 2 * p - kh) // s + 1
    wo = (w + 2 * p - kw) // s + 1
    acc = np.zeros((n, c, h + 2 * p, w + 2 * p), dtype=cols.dtype)
    cols6 = cols.reshape(n, c, kh, kw, ho, wo)
    for i in range(kh):
        for j in range(kw):
            acc[:, :, i:i + s * ho:s, j:j + s * wo:s] += cols6[:, :, i, j]
    if p:
        return acc[:, :, p:p + h, p:p + w]
    return acc


def _pad(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


# ---------------------------------------------------------------------------
# forward / backward

@dataclass
class Tape:
    """Activation record of one forward pass; consumable exactly once."""

    spec: NetworkSpec
    store: ParamStore
    weights: dict[int, np.ndarray] | None
    entries: list = field(default_factory=list)
    out_shape: tuple = ()
    consumed: bool = False


def _weight(store: ParamStore, weights, i: int) -> np.ndarray:
    if weights is not None and i in weights:
        return weights[i]
    return store.params[i]["W"]


def forward(spec: NetworkSpec, store: ParamStore, x: np.ndarray,
            weights: dict[int, np.ndarray] | None = None) -> tuple[np.ndarray, Tape]:
    """Run the network on a batch ``x`` of shape ``(N, *input_shape)``.

    ``weights`` optionally overrides per-layer weight tensors (used for
    spectrally normalized layers, whose effective weight differs from the
    stored one). Returns the output and the tape for :func:`backward`.
    """
    x = np.asarray(x)
    if x.shape[1:] != tuple(spec.input_shape):
        raise ShapeError(
            f"input shape {x.shape[1:]} does not match network input {tuple(spec.input_shape)}"
        )
    tape = Tape(spec=spec, store=store, weights=weights)
    h = x
    for i, layer in enumerate(spec.layers):
        kind = layer.kind
        if kind == "dense":
            W = _weight(store, weights, i)
            if h.ndim != 2 or h.shape[1] != W.shape[1]:
                raise ShapeError(f"layer {i} (dense): got input shape {h.shape[1:]}")
            tape.entries.append((h,))
            h = h @ W.T + store.params[i]["b"]
        elif kind == "conv2d":
            W = _weight(store, weights, i)
            if h.ndim != 4 or h.shape[1] != W.shape[1]:
                raise ShapeError(f"layer {i} (conv2d): got input shape {h.shape[1:]}")
            s, p = layer.stride, layer.padding
            kh = kw = layer.kernel
            cols = _im2col(_pad(h, p), kh, kw, s)
            ho = _conv_out_extent(h.shape[2], kh, s, p, f"layer {i} (conv2d)")
            wo = _conv_out_extent(h.shape[3], kw, s, p, f"layer {i} (conv2d)")
            tape.entries.append((cols, h.shape))
            y = np.matmul(W.reshape(W.shape[0], -1), cols)
            h = y.reshape(h.shape[0], W.shape[0], ho, wo) \
                + store.params[i]["b"].reshape(1, -1, 1, 1)
        elif kind == "convtranspose2d":
            W = _weight(store, weights, i)
            if h.ndim != 4 or h.shape[1] != W.shape[0]:
                raise ShapeError(f"layer {i} (convtranspose2d): got input shape {h.shape[1:]}")
            s, p = layer.stride, layer.padding
            kh = kw = layer.kernel
            n, ci, hi, wi = h.shape
            co = W.shape[1]
            H = _convt_out_extent(hi, kh, s, p, f"layer {i} (convtranspose2d)")
            Wd = _convt_out_extent(wi, kw, s, p, f"layer {i} (convtranspose2d)")
            # adjoint of conv2d(kernel=(ci, co, kh, kw)) mapping big -> small
            Wm = W.reshape(ci, co * kh * kw)
            dcols = np.matmul(Wm.T, h.reshape(n, ci, hi * wi))
            tape.entries.append((h, (n, co, H, Wd)))
            h = _col2im(dcols, (n, co, H, Wd), kh, kw, s, p) \
                + store.params[i]["b"].reshape(1, -1, 1, 1)
        elif kind == "lrelu":
            tape.entries.append((h > 0,))
            h = np.where(h > 0, h, layer.slope * h)
        elif kind == "relu":
            mask = h > 0
            tape.entries.append((mask,))
            h = h * mask
        elif kind == "tanh":
            h = np.tanh(h)
            tape.entries.append((h,))
        elif kind == "layernorm":
            n = h.shape[0]
            flat = h.reshape(n, -1)
            mu = flat.mean(axis=1, keepdims=True)
            var = flat.var(axis=1, keepdims=True)
            inv = 1.0 / np.sqrt(var + LAYERNORM_EPS)
            xhat = (flat - mu) * inv
            tape.entries.append((xhat, inv, h.shape))
            g = store.params[i]["g"].reshape(1, -1)
            b = store.params[i]["b"].reshape(1, -1)
            h = (xhat * g + b).reshape(h.shape)
        elif kind == "pixelnorm":
            ch_axis = 1
            scale = np.sqrt(np.mean(np.square(h), axis=ch_axis, keepdims=True) + PIXELNORM_EPS)
            tape.entries.append((h, scale))
            h = h / scale
        else:
            raise ShapeError(f"layer {i}: unknown layer kind {kind!r}")
    tape.out_shape = h.shape
    return h, tape


def backward(tape: Tape, grad_out: np.ndarray) -> np.ndarray:
    """Backpropagate ``grad_out`` through a recorded forward pass.

    Accumulates parameter gradients into the tape's store (+=) and
    returns the gradient with respect to the network input. For layers
    run with an overridden weight, the gradient is with respect to that
    effective weight. A tape can be consumed only once.
    """
    if tape.consumed:
        raise RuntimeError("activation tape already consumed")
    g = np.asarray(grad_out)
    if g.shape != tape.out_shape:
        raise ShapeError(f"grad shape {g.shape} does not match output {tape.out_shape}")
    spec, store, weights = tape.spec, tape.store, tape.weights
    for i in range(len(spec.layers) - 1, -1, -1):
        layer = spec.layers[i]
        kind = layer.kind
        cache = tape.entries[i]
        if kind == "dense":
            (x,) = cache
            W = _weight(store, weights, i)
            store.grads[i]["W"] += g.T @ x
            store.grads[i]["b"] += g.sum(axis=0)
            g = g @ W
        elif kind == "conv2d":
            cols, xshape = cache
            W = _weight(store, weights, i)
            co = W.shape[0]
            n = xshape[0]
            gr = g.reshape(n, co, -1)
            store.grads[i]["W"] += np.einsum("nol,nkl->ok", gr, cols).reshape(W.shape)
            store.grads[i]["b"] += g.sum(axis=(0, 2, 3))
            dcols = np.matmul(W.reshape(co, -1).T, gr)
            g = _col2im(dcols, xshape, layer.kernel, layer.kernel,
                        layer.stride, layer.padding)
        elif kind == "convtranspose2d":
            x, zshape = cache
            W = _weight(store, weights, i)
            n, ci, hi, wi = x.shape
            co = W.shape[1]
            kh = kw = layer.kernel
            store.grads[i]["b"] += g.sum(axis=(0, 2, 3))
            # dx and dW reuse one im2col of the output gradient: the layer is
            # the adjoint of conv2d(g) with the same kernel.
            cols_g = _im2col(_pad(g, layer.padding), kh, kw, layer.stride)
            gr = np.matmul(W.reshape(ci, -1), cols_g)
            dW = np.einsum("nil,nkl->ik", x.reshape(n, ci, -1), cols_g)
            store.grads[i]["W"] += dW.reshape(W.shape)
            g = gr.reshape(x.shape)
        elif kind == "lrelu":
            (mask,) = cache
            g = np.where(mask, g, layer.slope * g)
        elif kind == "relu":
            (mask,) = cache
            g = g * mask
        elif kind == "tanh":
            (y,) = cache
            g = g * (1.0 - y * y)
        elif kind == "layernorm":
            xhat, inv, xshape = cache
            n = xshape[0]
            gf = g.reshape(n, -1)
            gain = store.params[i]["g"].reshape(1, -1)
            store.grads[i]["g"] += (gf * xhat).sum(axis=0).reshape(store.params[i]["g"].shape)
            store.grads[i]["b"] += gf.sum(axis=0).reshape(store.params[i]["b"].shape)
            dxhat = gf * gain
            f = xhat.shape[1]
            dx = (inv / f) * (
                f * dxhat
                - dxhat.sum(axis=1, keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=1, keepdims=True)
            )
            g = dx.reshape(xshape)
        elif kind == "pixelnorm":
            x, scale = cache
            c = x.shape[1]
            dot = (g * x).sum(axis=1, keepdims=True)
            g = g / scale - x * dot / (c * scale ** 3)
    tape.consumed = True
    return g


# ---------------------------------------------------------------------------
# architecture families

def mlp_generator(latent_dim: int, hidden: list[int], out_dim: int) -> NetworkSpec:
    """Dense generator: pixelnorm on the latent, LReLU(0.2) hidden stack with
    layernorm+ReLU before the output layer, Tanh output."""
    if not hidden:
        raise ValueError("mlp generator needs at least one hidden width")
    layers = [pixelnorm()]
    prev = latent_dim
    for j, width in enumerate(hidden):
        layers.append(dense(prev, width))
        if j == len(hidden) - 1:
            layers += [layernorm(), relu()]
        else:
            layers.append(lrelu(0.2))
        prev = width
    layers += [dense(prev, out_dim), tanh()]
    return NetworkSpec(input_shape=(latent_dim,), layers=layers)


def mlp_discriminator(in_dim: int, hidden: list[int]) -> NetworkSpec:
    """Dense critic with ReLU activations; every weight is spectrally normalized."""
    if not hidden:
        raise ValueError("mlp discriminator needs at least one hidden width")
    layers: list[Layer] = []
    prev = in_dim
    for width in hidden:
        layers += [dense(prev, width, normalized=True), relu()]
        prev = width
    layers.append(dense(prev, 1, normalized=True))
    return NetworkSpec(input_shape=(in_dim,), layers=layers)


def _upsample_levels(img_size: int) -> int:
    levels = int(math.log2(img_size / 4))
    if 4 * 2 ** levels != img_size or levels < 1:
        raise ValueError(f"img_size must be 4 * 2^k with k >= 1, got {img_size}")
    return levels


def conv_generator(latent_dim: int, channels: list[int], img_channels: int,
                   img_size: int) -> NetworkSpec:
    """Transposed-conv generator from a (latent, 1, 1) input to img_size^2.

    First a stride-1 4x4 transposed conv to 4x4, then one stride-2 level
    per channel entry beyond the first, LReLU(0.2) between levels with
    layernorm+ReLU before the final Tanh level.
    """
    levels = _upsample_levels(img_size)
    if len(channels) != levels:
        raise ValueError(
            f"need {levels} channel entries for img_size={img_size}, got {len(channels)}"
        )
    layers: list[Layer] = [pixelnorm(),
                           convtranspose2d(latent_dim, channels[0], 4, 1, 0)]
    for j in range(1, levels):
        layers.append(lrelu(0.2))
        layers.append(convtranspose2d(channels[j - 1], channels[j], 4, 2, 1))
    layers += [layernorm(), relu(),
               convtranspose2d(channels[-1], img_channels, 4, 2, 1), tanh()]
    return NetworkSpec(input_shape=(latent_dim, 1, 1), layers=layers)


def conv_discriminator(img_channels: int, channels: list[int], img_size: int) -> NetworkSpec:
    """Strided-conv critic ending in a 4x4 valid conv to one scalar channel.

    All convolution weights are spectrally normalized; activations are ReLU.
    """
    levels = _upsample_levels(img_size)
    if len(channels) != levels:
        raise ValueError(
            f"need {levels} channel entries for img_size={img_size}, got {len(channels)}"
        )
    layers: list[Layer] = []
    prev = img_channels
    for ch in channels:
        layers += [conv2d(prev, ch, 4, 2, 1, normalized=True), relu()]
        prev = ch
    layers.append(conv2d(prev, 1, 4, 1, 0, normalized=True))
    return NetworkSpec(input_shape=(img_channels, img_size, img_size), layers=layers)
