"""Forward layer definitions: standard, depthwise, and DO-Conv convolutions,
the DO-Conv fold, plus ReLU / global average pooling / fully connected /
softmax.

A DO-Conv layer trains a pair (depthwise, pointwise): the depthwise stage
turns the kh*kw spatial samples of each input channel into d_mul features,
the pointwise stage mixes all (d_mul, c_in) features into each output
channel. The pair folds exactly into one standard kernel

    folded[o, i, c] = sum_d depthwise[i, d, c] * pointwise[o, d, c]

so inference costs the same as a plain convolution. Over-parameterization
needs d_mul >= kh*kw; the fold identity itself holds for any d_mul >= 1.

Spatial inputs are (H, W, C) or batched (N, H, W, C); convolutions are
stride 1, either valid or "same" via reflect padding.
"""

from dataclasses import dataclass

import numpy as np

from .tensor import pad_reflect_batch, window_gather_batch


@dataclass
class StdKernel:
    weights: np.ndarray  # (c_out, kh, kw, c_in)
    bias: np.ndarray     # (c_out,)

    @property
    def kh(self):
        return self.weights.shape[1]

    @property
    def kw(self):
        return self.weights.shape[2]


@dataclass
class DepthwiseKernel:
    weights: np.ndarray  # (kh*kw, d_mul, c_in)
    kh: int
    kw: int

    def __post_init__(self):
        if self.weights.shape[0] != self.kh * self.kw:
            raise ValueError(f"depthwise weight rows {self.weights.shape[0]} != {self.kh}x{self.kw}")
        if self.weights.shape[1] < 1:
            raise ValueError("depth multiplier must be >= 1")

    @property
    def d_mul(self):
        return self.weights.shape[1]


@dataclass
class DoConvKernel:
    depthwise: np.ndarray  # (kh*kw, d_mul, c_in)
    pointwise: np.ndarray  # (c_out, d_mul, c_in)
    bias: np.ndarray       # (c_out,)
    kh: int
    kw: int

    def __post_init__(self):
        if self.depthwise.shape[0] != self.kh * self.kw:
            raise ValueError(f"depthwise weight rows {self.depthwise.shape[0]} != {self.kh}x{self.kw}")
        if self.depthwise.shape[1:] != self.pointwise.shape[1:]:
            raise ValueError(
                f"depthwise {self.depthwise.shape} and pointwise {self.pointwise.shape} "
                "disagree on (d_mul, c_in)")

    @property
    def d_mul(self):
        return self.depthwise.shape[1]


def _as_batch(x):
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ValueError(f"expected (H, W, C) or (N, H, W, C) input, got shape {x.shape}")


def _lower(x, kh, kw, same_pad):
    """Pad (if same) and lower to window columns: (n, oh, ow, kh*kw*c)."""
    if same_pad:
        x = pad_reflect_batch(x, (kh - 1) // 2)
    return window_gather_batch(x, kh, kw)


def conv_std(x, k: StdKernel, same_pad=False):
    """Standard convolution: every output channel sums over the full window
    and all input channels, plus one bias per output channel."""
    xb, single = _as_batch(x)
    c_out, kh, kw, c_in = k.weights.shape
    if xb.shape[3] != c_in:
        raise ValueError(f"input has {xb.shape[3]} channels, kernel expects {c_in}")
    cols = _lower(xb, kh, kw, same_pad)
    flat = cols.reshape(-1, cols.shape[-1])  # one large matmul, not many small ones
    out = (flat @ k.weights.reshape(c_out, -1).T + k.bias).reshape(cols.shape[:3] + (c_out,))
    return out[0] if single else out


def conv_depthwise(x, k: DepthwiseKernel, same_pad=False):
    """Depthwise convolution: input channel c alone produces d_mul output
    features; output channel index is c * d_mul + d (channel-major)."""
    xb, single = _as_batch(x)
    kh, kw, d_mul = k.kh, k.kw, k.d_mul
    c_in = xb.shape[3]
    if k.weights.shape[2] != c_in:
        raise ValueError(f"input has {c_in} channels, kernel expects {k.weights.shape[2]}")
    cols = _lower(xb, kh, kw, same_pad)
    n, oh, ow, _ = cols.shape
    win = cols.reshape(n, oh, ow, kh * kw, c_in)
    out = np.einsum("nyxic,idc->nyxcd", win, k.weights)
    out = out.reshape(n, oh, ow, c_in * d_mul)
    return out[0] if single else out


def doconv_compose(x, k: DoConvKernel, same_pad=False):
    """DO-Conv by explicit composition: depthwise stage first, then the
    pointwise mix, window by window."""
    xb, single = _as_batch(x)
    kh, kw = k.kh, k.kw
    c_in = xb.shape[3]
    if k.depthwise.shape[2] != c_in:
        raise ValueError(f"input has {c_in} channels, kernel expects {k.depthwise.shape[2]}")
    cols = _lower(xb, kh, kw, same_pad)
    n, oh, ow, _ = cols.shape
    win = cols.reshape(n, oh, ow, kh * kw, c_in)
    inter = np.einsum("nyxic,idc->nyxdc", win, k.depthwise)
    out = np.einsum("nyxdc,odc->nyxo", inter, k.pointwise) + k.bias
    return out[0] if single else out


def doconv_fold(k: DoConvKernel) -> StdKernel:
    """Collapse a DO-Conv pair into the equivalent standard kernel."""
    c_out = k.pointwise.shape[0]
    c_in = k.depthwise.shape[2]
    folded = np.einsum("idc,odc->oic", k.depthwise, k.pointwise)
    return StdKernel(weights=folded.reshape(c_out, k.kh, k.kw, c_in),
                     bias=k.bias.copy())


def relu(x):
    return np.maximum(x, 0.0)


def gap(x):
    """Global average pooling: spatial mean per channel."""
    xb, single = _as_batch(x)
    out = xb.mean(axis=(1, 2))
    return out[0] if single else out


def fully_connected(v, weights, bias):
    """Affine map of a feature vector (or batch of rows): weights (K, C)."""
    if v.ndim == 1:
        if v.shape[0] != weights.shape[1]:
            raise ValueError(f"vector length {v.shape[0]} != weight columns {weights.shape[1]}")
        return weights @ v + bias
    if v.shape[1] != weights.shape[1]:
        raise ValueError(f"vector length {v.shape[1]} != weight columns {weights.shape[1]}")
    return v @ weights.T + bias


def softmax(v):
    """Probability vector over the last axis, max-subtracted for stability."""
    shifted = v - v.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)
