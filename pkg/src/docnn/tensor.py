"""Dense float64 tensor primitives shared by every layer.

A tensor here is a C-contiguous float64 ndarray: row-major, last axis
fastest. All feature maps are laid out (height, width, channels), batches as
(batch, height, width, channels). Window flattening order is fixed once for
the whole package: (dy, dx, channel), channel fastest.
"""

from dataclasses import dataclass

import numpy as np

Tensor = np.ndarray


@dataclass(frozen=True)
class Shape4:
    """Spatial feature-map geometry: (height, width, channels) plus batch."""
    height: int
    width: int
    channels: int
    batch: int = 1

    def __post_init__(self):
        for name in ("height", "width", "channels", "batch"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")

    def describes(self, t):
        """True when t is (H, W, C) with batch 1 or (batch, H, W, C)."""
        if t.ndim == 3:
            return self.batch == 1 and t.shape == (self.height, self.width, self.channels)
        return t.ndim == 4 and t.shape == (self.batch, self.height, self.width, self.channels)


def tensor(values, shape=None):
    """Coerce to a contiguous float64 array, optionally reshaped.

    Every extent must be >= 1; a zero-sized tensor is rejected.
    """
    t = np.ascontiguousarray(values, dtype=np.float64)
    if shape is not None:
        t = t.reshape(shape)
    if t.size == 0:
        raise ValueError(f"tensor must have at least one element, got shape {t.shape}")
    return t


def ravel_offset(shape, index):
    """Row-major flat offset of a multi-index."""
    if len(index) != len(shape):
        raise ValueError(f"index rank {len(index)} != tensor rank {len(shape)}")
    offset = 0
    for i, (ix, extent) in enumerate(zip(index, shape)):
        if not 0 <= ix < extent:
            raise ValueError(f"index {ix} out of range for axis {i} (extent {extent})")
        offset = offset * extent + ix
    return offset


def unravel_offset(shape, offset):
    """Inverse of ravel_offset."""
    size = int(np.prod(shape))
    if not 0 <= offset < size:
        raise ValueError(f"offset {offset} out of range for shape {shape}")
    index = []
    for extent in reversed(shape):
        index.append(offset % extent)
        offset //= extent
    return tuple(reversed(index))


def reflect_sources(size, margin):
    """Source index for each position of an axis padded by `margin`.

    Mirror reflection without repeating the edge sample: for size 3, margin 1
    the sources are [1, 0, 1, 2, 1]. Requires margin < size so one bounce
    suffices; a size-1 axis replicates its only sample.
    """
    if size == 1:
        return np.zeros(1 + 2 * margin, dtype=np.intp)
    if margin >= size:
        raise ValueError(f"reflect margin {margin} must be < extent {size}")
    idx = np.arange(-margin, size + margin)
    idx = np.where(idx < 0, -idx, idx)
    idx = np.where(idx >= size, 2 * size - 2 - idx, idx)
    return idx


def pad_reflect(t, margin):
    """Mirror-pad the two leading spatial axes of an (H, W, C) tensor."""
    if margin == 0:
        return t
    h, w = t.shape[0], t.shape[1]
    if margin < 0 or any(margin >= e > 1 for e in (h, w)):
        raise ValueError(f"margin {margin} invalid for spatial extents {h}x{w}")
    rows = reflect_sources(h, margin)
    cols = reflect_sources(w, margin)
    return np.ascontiguousarray(t[rows][:, cols])


def pad_reflect_batch(t, margin):
    """pad_reflect over axes (1, 2) of a (N, H, W, C) batch."""
    if margin == 0:
        return t
    h, w = t.shape[1], t.shape[2]
    if margin < 0 or any(margin >= e > 1 for e in (h, w)):
        raise ValueError(f"margin {margin} invalid for spatial extents {h}x{w}")
    rows = reflect_sources(h, margin)
    cols = reflect_sources(w, margin)
    return np.ascontiguousarray(t[:, rows][:, :, cols])


def window_gather(t, kh, kw):
    """Lower an (H, W, C) tensor to a ((H-kh+1)*(W-kw+1), kh*kw*C) matrix.

    Row r is the flattened kh x kw x C neighborhood of output position r in
    row-major scan order; within a row the order is (dy, dx, c), channel
    fastest. The input must already carry any padding: each output position
    needs a full window.
    """
    h, w = t.shape[0], t.shape[1]
    if h < kh or w < kw:
        raise ValueError(f"window {kh}x{kw} does not fit in {h}x{w} input; pad first")
    cols = window_gather_batch(t[None], kh, kw)[0]
    return cols.reshape(-1, cols.shape[-1])


def window_gather_batch(t, kh, kw):
    """Batched lowering: (N, H, W, C) -> (N, H-kh+1, W-kw+1, kh*kw*C)."""
    n, h, w, c = t.shape
    if h < kh or w < kw:
        raise ValueError(f"window {kh}x{kw} does not fit in {h}x{w} input; pad first")
    win = np.lib.stride_tricks.sliding_window_view(t, (kh, kw), axis=(1, 2))
    # win: (n, oh, ow, c, kh, kw) -> (dy, dx, c) flattening, channel fastest
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(n, h - kh + 1, w - kw + 1, kh * kw * c)
    return np.ascontiguousarray(cols)


def scatter_windows_batch(dcols, kh, kw, h, w):
    """Adjoint of window_gather_batch: scatter-add window slots back onto the grid.

    dcols: (N, oh, ow, kh*kw*C) -> (N, h, w, C) with h = oh+kh-1, w = ow+kw-1.
    """
    n, oh, ow, flat = dcols.shape
    c = flat // (kh * kw)
    d = dcols.reshape(n, oh, ow, kh, kw, c)
    out = np.zeros((n, h, w, c))
    for dy in range(kh):
        for dx in range(kw):
            out[:, dy:dy + oh, dx:dx + ow, :] += d[:, :, :, dy, dx, :]
    return out


def _fold_axis_front(d, margin, size):
    """Fold the mirrored border slabs of the leading axis onto their sources."""
    if size == 1:
        return d.sum(axis=0, keepdims=True)
    out = d[margin:margin + size].copy()
    out[1:margin + 1] += d[:margin][::-1]
    out[size - margin - 1:size - 1] += d[margin + size:][::-1]
    return out


def unpad_reflect_grad_batch(dpadded, margin, h, w):
    """Adjoint of pad_reflect_batch: fold border gradients onto their sources."""
    if margin == 0:
        return dpadded
    d = _fold_axis_front(np.moveaxis(dpadded, 1, 0), margin, h)
    d = _fold_axis_front(np.moveaxis(d, 2, 0), margin, w)
    return np.moveaxis(np.moveaxis(d, 0, 2), 0, 1)


def add(a, b):
    """Elementwise sum; shapes must match exactly (no broadcasting)."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch in add: {a.shape} vs {b.shape}")
    return a + b


def scale(a, s):
    """Multiply every element by scalar s."""
    return a * float(s)
