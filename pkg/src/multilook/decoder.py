"""Deep-decoder image prior: fixed 4-block generator, manual backprop, Adam.

The generator maps a frozen Gaussian noise cube of shape
(channels[0], h/8, w/8) through three blocks of
[bilinear upsample x2 -> ReLU -> same-padded conv] followed by an
output conv to one channel and a sigmoid.  Gradients are exact
reverse-mode derivatives computed by hand (the convolution and
bilinear-upsample adjoints), so the whole thing runs on numpy arrays
with no autodiff dependency.

Bilinear upsampling uses the half-pixel-centers (align_corners=False)
convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import NumericalError, StructuralError, UsageError, ValidationError

NUM_DIP_BLOCKS = 3
UPSAMPLE_FACTOR = 2 ** NUM_DIP_BLOCKS  # input noise is (h/8, w/8)


@dataclass(frozen=True)
class DecoderArch:
    """Channel widths entering each of the four blocks, and the conv kernel size."""

    channels: tuple[int, int, int, int] = (128, 128, 128, 128)
    kernel: int = 3

    def __post_init__(self):
        if self.kernel not in (1, 3):
            raise ValidationError("kernel must be 1 or 3")
        if len(self.channels) != NUM_DIP_BLOCKS + 1:
            raise ValidationError("need one channel count per block")

    def layer_channels(self) -> list[tuple[int, int]]:
        """(c_in, c_out) for the three DIP convs and the output conv."""
        chans = list(self.channels) + [1]
        return [(chans[i], chans[i + 1]) for i in range(NUM_DIP_BLOCKS + 1)]

    def param_count(self) -> int:
        k2 = self.kernel ** 2
        return sum(ci * co * k2 + co for ci, co in self.layer_channels())


def sophisticated_arch() -> DecoderArch:
    return DecoderArch(channels=(128, 128, 128, 128), kernel=3)


def simple_arch() -> DecoderArch:
    return DecoderArch(channels=(100, 50, 25, 10), kernel=1)


@dataclass
class DecoderParams:
    """Per-layer conv weights/biases, the frozen input noise, and Adam state."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    u: np.ndarray                       # frozen (channels[0], h/8, w/8)
    adam_m: list[np.ndarray] = field(default_factory=list)
    adam_v: list[np.ndarray] = field(default_factory=list)
    adam_step_count: int = 0
    _cache: dict | None = field(default=None, repr=False)

    def param_count(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


def init_params(arch: DecoderArch, height: int, width: int,
                rng: np.random.Generator) -> DecoderParams:
    """Fresh parameters (He-style fan-in uniform) and frozen N(0,1) input noise."""
    if height % UPSAMPLE_FACTOR or width % UPSAMPLE_FACTOR:
        raise StructuralError(
            f"patch dims must be divisible by {UPSAMPLE_FACTOR} (got {height}x{width})")
    weights, biases = [], []
    k = arch.kernel
    for ci, co in arch.layer_channels():
        bound = np.sqrt(6.0 / (ci * k * k))
        weights.append(rng.uniform(-bound, bound, size=(co, ci, k, k)))
        biases.append(np.zeros(co))
    u = rng.standard_normal(
        (arch.channels[0], height // UPSAMPLE_FACTOR, width // UPSAMPLE_FACTOR))
    p = DecoderParams(weights=weights, biases=biases, u=u)
    p.adam_m = [np.zeros_like(w) for w in weights] + [np.zeros_like(b) for b in biases]
    p.adam_v = [np.zeros_like(w) for w in weights] + [np.zeros_like(b) for b in biases]
    return p


@lru_cache(maxsize=32)
def _bilinear_matrix(n_out: int) -> np.ndarray:
    """Interpolation matrix for 1-D bilinear x2 upsampling, half-pixel centers."""
    n_in = n_out // 2
    w = np.zeros((n_out, n_in))
    for i in range(n_out):
        src = (i + 0.5) / 2.0 - 0.5
        src = min(max(src, 0.0), n_in - 1.0)
        i0 = int(np.floor(src))
        i1 = min(i0 + 1, n_in - 1)
        frac = src - i0
        w[i, i0] += 1.0 - frac
        w[i, i1] += frac
    return w


def _upsample(x: np.ndarray) -> np.ndarray:
    c, h, w = x.shape
    wh = _bilinear_matrix(2 * h)
    ww = _bilinear_matrix(2 * w)
    return np.matmul(wh, x) @ ww.T


def _upsample_adjoint(g: np.ndarray) -> np.ndarray:
    c, h2, w2 = g.shape
    wh = _bilinear_matrix(h2)
    ww = _bilinear_matrix(w2)
    return np.matmul(wh.T, g) @ ww


def _conv_same(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Zero-padded same convolution; x is (C_in, H, W), w is (C_out, C_in, k, k)."""
    k = w.shape[2]
    pad = k // 2
    _, h, wd = x.shape
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad))) if pad else x
    out = np.zeros((w.shape[0], h, wd))
    for i in range(k):
        for j in range(k):
            out += np.tensordot(w[:, :, i, j], xp[:, i:i + h, j:j + wd], axes=1)
    return out + b[:, np.newaxis, np.newaxis]


def _conv_same_backward(g: np.ndarray, x: np.ndarray, w: np.ndarray):
    """Gradients of the same convolution wrt (x, w, b) given output gradient g."""
    k = w.shape[2]
    pad = k // 2
    _, h, wd = x.shape
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad))) if pad else x
    gw = np.zeros_like(w)
    gxp = np.zeros_like(xp)
    for i in range(k):
        for j in range(k):
            patch = xp[:, i:i + h, j:j + wd]
            gw[:, :, i, j] = np.tensordot(g, patch, axes=([1, 2], [1, 2]))
            gxp[:, i:i + h, j:j + wd] += np.tensordot(w[:, :, i, j].T, g, axes=1)
    gb = g.sum(axis=(1, 2))
    gx = gxp[:, pad:pad + h, pad:pad + wd] if pad else gxp
    return gx, gw, gb


def forward(params: DecoderParams, arch: DecoderArch) -> np.ndarray:
    """Run the generator; returns an (h, w) image with pixels in (0, 1)."""
    layer_chans = arch.layer_channels()
    if params.u.shape[0] != arch.channels[0]:
        raise StructuralError("input noise channels do not match architecture")
    for lw, (ci, co) in zip(params.weights, layer_chans):
        if lw.shape[:2] != (co, ci) or lw.shape[2] != arch.kernel:
            raise StructuralError("weight shapes do not match architecture")
    cache = {"conv_in": [], "relu_in": []}
    h = params.u
    for layer in range(NUM_DIP_BLOCKS):
        h = _upsample(h)
        cache["relu_in"].append(h)
        h = np.maximum(h, 0.0)
        cache["conv_in"].append(h)
        h = _conv_same(h, params.weights[layer], params.biases[layer])
    cache["conv_in"].append(h)
    z = _conv_same(h, params.weights[-1], params.biases[-1])[0]
    out = 1.0 / (1.0 + np.exp(-z))
    cache["out"] = out
    params._cache = cache
    return out


def backward(params: DecoderParams, arch: DecoderArch, grad_output: np.ndarray):
    """Exact parameter gradients chained through the cached forward pass.

    ``grad_output`` is the gradient of the loss wrt the output image;
    returns (weight_grads, bias_grads) matching params layout.
    """
    if params._cache is None:
        raise UsageError("backward requires a preceding forward pass")
    cache = params._cache
    out = cache["out"]
    g = np.asarray(grad_output, dtype=float) * out * (1.0 - out)  # sigmoid adjoint
    g = g[np.newaxis]
    gws = [None] * len(params.weights)
    gbs = [None] * len(params.biases)
    g, gws[-1], gbs[-1] = _conv_same_backward(
        g, cache["conv_in"][-1], params.weights[-1])
    for layer in range(NUM_DIP_BLOCKS - 1, -1, -1):
        g, gws[layer], gbs[layer] = _conv_same_backward(
            g, cache["conv_in"][layer], params.weights[layer])
        g = g * (cache["relu_in"][layer] > 0)
        g = _upsample_adjoint(g)
    return gws, gbs


def adam_step(params: DecoderParams, weight_grads, bias_grads, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Standard bias-corrected Adam update (weight decay 0), in place."""
    grads = list(weight_grads) + list(bias_grads)
    tensors = list(params.weights) + list(params.biases)
    for grad in grads:
        if not np.all(np.isfinite(grad)):
            raise NumericalError("non-finite gradient in Adam step")
    params.adam_step_count += 1
    t = params.adam_step_count
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for tensor, grad, m, v in zip(tensors, grads, params.adam_m, params.adam_v):
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad ** 2
        tensor -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def fit(target: np.ndarray, arch: DecoderArch, iters: int, lr: float = 1e-3,
        seed: int = 0) -> tuple[DecoderParams, np.ndarray]:
    """Fit the generator to a target image by Adam on 0.5 * ||g(u) - target||^2.

    Fresh seeded initialization; returns the trained parameters and the
    final generated image.
    """
    target = np.asarray(target, dtype=float)
    if target.ndim != 2:
        raise StructuralError("target must be a 2-D image")
    if not np.all(np.isfinite(target)):
        raise ValidationError("target contains non-finite pixels")
    rng = np.random.default_rng(seed)
    params = init_params(arch, target.shape[0], target.shape[1], rng)
    out = forward(params, arch)
    for _ in range(iters):
        diff = out - target
        if not np.all(np.isfinite(diff)):
            raise NumericalError("non-finite loss during decoder fit")
        gws, gbs = backward(params, arch, diff)
        adam_step(params, gws, gbs, lr)
        out = forward(params, arch)
    return params, out
