"""Reverse-mode gradients for every layer, softmax cross-entropy, and the
deterministic momentum-SGD training loop.

The network graph is small and fixed, so backprop is written out layer by
layer instead of through a general tape. DO-Conv layers are evaluated by
folding (depthwise, pointwise) into one standard kernel each forward pass;
the backward pass then splits the folded-kernel gradient across the pair via
the product rule of the fold contraction:

    d_depthwise[i, d, c] = sum_o d_folded[o, i, c] * pointwise[o, d, c]
    d_pointwise[o, d, c] = sum_i d_folded[o, i, c] * depthwise[i, d, c]

Randomness comes from one PCG64 stream per concern (init, shuffling), so a
seed pins the trained parameters bit for bit.
"""

from dataclasses import dataclass

import numpy as np

from . import layers, network
from .layers import StdKernel
from .network import DepthwiseLayer, Model
from .tensor import (pad_reflect_batch, scatter_windows_batch,
                     unpad_reflect_grad_batch, window_gather_batch)


@dataclass
class TrainConfig:
    epochs: int
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 64
    seed: int = 0

    def validate(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        return self


class TrainingDiverged(RuntimeError):
    """Raised when the batch loss stops being finite."""


def rng_stream(seed):
    """Deterministic generator stream; the algorithm is pinned to PCG64 so a
    seed means the same draw sequence everywhere."""
    return np.random.Generator(np.random.PCG64(seed))


def loss_ce(probs, label):
    """Cross-entropy of one probability vector against a class index, with
    the picked probability floored at 1e-12."""
    k = probs.shape[-1]
    if not 0 <= label < k:
        raise ValueError(f"label {label} out of range for {k} classes")
    return float(-np.log(max(float(probs[label]), 1e-12)))


def softmax_cross_entropy(logits, labels):
    """Mean batch loss and its gradient at the logits."""
    probs = layers.softmax(logits)
    n = len(labels)
    rows = np.arange(n)
    picked = np.clip(probs[rows, labels], 1e-12, None)
    loss = float(-np.log(picked).mean())
    dlogits = probs.copy()
    dlogits[rows, labels] -= 1.0
    dlogits /= n
    return loss, dlogits


def _conv_fwd(x, kernel: StdKernel, same_pad):
    c_out, kh, kw, _ = kernel.weights.shape
    margin = (kh - 1) // 2 if same_pad else 0
    xp = pad_reflect_batch(x, margin) if margin else x
    cols = window_gather_batch(xp, kh, kw)
    flat = cols.reshape(-1, cols.shape[-1])
    out = (flat @ kernel.weights.reshape(c_out, -1).T + kernel.bias).reshape(
        cols.shape[:3] + (c_out,))
    return out, (cols, x.shape, xp.shape, margin)


def _conv_bwd(dout, kernel: StdKernel, cache):
    cols, xshape, xpshape, margin = cache
    c_out, kh, kw, _ = kernel.weights.shape
    n, oh, ow, _ = dout.shape
    dmat = dout.reshape(-1, c_out)
    dw = (dmat.T @ cols.reshape(n * oh * ow, -1)).reshape(kernel.weights.shape)
    db = dmat.sum(axis=0)
    dcols = (dmat @ kernel.weights.reshape(c_out, -1)).reshape(n, oh, ow, -1)
    dxp = scatter_windows_batch(dcols, kh, kw, xpshape[1], xpshape[2])
    dx = unpad_reflect_grad_batch(dxp, margin, xshape[1], xshape[2]) if margin else dxp
    return dx, dw, db


def _feature_fwd(layer, x, same_pad=True):
    if isinstance(layer, StdKernel):
        out, cache = _conv_fwd(x, layer, same_pad)
        return out, ("std", cache)
    if isinstance(layer, DepthwiseLayer):
        kern = layer.kernel
        margin = (kern.kh - 1) // 2 if same_pad else 0
        xp = pad_reflect_batch(x, margin) if margin else x
        cols = window_gather_batch(xp, kern.kh, kern.kw)
        n, oh, ow, _ = cols.shape
        c_in = xp.shape[3]
        win = cols.reshape(n, oh, ow, kern.kh * kern.kw, c_in)
        out = np.einsum("nyxic,idc->nyxcd", win, kern.weights)
        out = out.reshape(n, oh, ow, c_in * kern.d_mul) + layer.bias
        return out, ("depthwise", (win, x.shape, xp.shape, margin))
    folded = layers.doconv_fold(layer)
    out, cache = _conv_fwd(x, folded, same_pad)
    return out, ("doconv", (cache, folded))


def _feature_bwd(layer, dout, tagged_cache):
    tag, cache = tagged_cache
    if tag == "std":
        dx, dw, db = _conv_bwd(dout, layer, cache)
        return dx, {"weights": dw, "bias": db}
    if tag == "depthwise":
        win, xshape, xpshape, margin = cache
        kern = layer.kernel
        n, oh, ow, cd = dout.shape
        c_in = cd // kern.d_mul
        dcd = dout.reshape(n, oh, ow, c_in, kern.d_mul)
        dw = np.einsum("nyxic,nyxcd->idc", win, dcd)
        db = dout.sum(axis=(0, 1, 2))
        dcols = np.einsum("nyxcd,idc->nyxic", dcd, kern.weights)
        dcols = dcols.reshape(n, oh, ow, kern.kh * kern.kw * c_in)
        dxp = scatter_windows_batch(dcols, kern.kh, kern.kw, xpshape[1], xpshape[2])
        dx = unpad_reflect_grad_batch(dxp, margin, xshape[1], xshape[2]) if margin else dxp
        return dx, {"weights": dw, "bias": db}
    conv_cache, folded = cache
    dx, dq, db = _conv_bwd(dout, folded, conv_cache)
    dq = dq.reshape(dq.shape[0], layer.kh * layer.kw, -1)
    return dx, {
        "depthwise": np.einsum("oic,odc->idc", dq, layer.pointwise),
        "pointwise": np.einsum("oic,idc->odc", dq, layer.depthwise),
        "bias": db,
    }


def _forward_cached(model: Model, x):
    drc = model.config.drc_enabled
    acts = {}
    acts["b_pre"], acts["c_in"] = _conv_fwd(x, model.conv_in, same_pad=True)
    b = layers.relu(acts["b_pre"])
    acts["f1_pre"], acts["f1"] = _feature_fwd(model.feat1, b)
    y1 = layers.relu(acts["f1_pre"])
    x2 = y1 + b if drc else y1
    acts["f2_pre"], acts["f2"] = _feature_fwd(model.feat2, x2)
    y2 = layers.relu(acts["f2_pre"])
    x3 = y2 + b if drc else y2
    acts["z_pre"], acts["c_out"] = _conv_fwd(x3, model.conv_out, same_pad=True)
    z = layers.relu(acts["z_pre"])
    acts["pooled"] = z.mean(axis=(1, 2))
    logits = acts["pooled"] @ model.fc_weights.T + model.fc_bias
    acts["spatial"] = z.shape
    return logits, acts


def backward(model: Model, batch, labels):
    """Mean softmax cross-entropy over the batch and its gradient for every
    parameter, keyed like network.parameters()."""
    labels = np.asarray(labels)
    if len(batch) != len(labels):
        raise ValueError(f"{len(batch)} patches but {len(labels)} labels")
    if labels.size and (labels.min() < 0 or labels.max() >= model.config.num_classes):
        raise ValueError(f"labels must lie in [0, {model.config.num_classes})")
    expect = (model.config.input_size, model.config.input_size, model.config.in_channels)
    if tuple(batch.shape[1:]) != expect:
        raise ValueError(f"batch patches {tuple(batch.shape[1:])} do not match model input {expect}")

    logits, acts = _forward_cached(model, batch)
    loss, dlogits = softmax_cross_entropy(logits, labels)
    grads = {}
    drc = model.config.drc_enabled

    grads["fc.weights"] = dlogits.T @ acts["pooled"]
    grads["fc.bias"] = dlogits.sum(axis=0)
    dpooled = dlogits @ model.fc_weights

    n, h, w, _ = acts["spatial"]
    dz = np.broadcast_to(dpooled[:, None, None, :], acts["spatial"]) / (h * w)
    dz_pre = dz * (acts["z_pre"] > 0)
    dx3, dw, db = _conv_bwd(dz_pre, model.conv_out, acts["c_out"])
    grads["conv_out.weights"], grads["conv_out.bias"] = dw, db

    db_drc = dx3.copy() if drc else None
    df2_pre = dx3 * (acts["f2_pre"] > 0)
    dx2, feat2_grads = _feature_bwd(model.feat2, df2_pre, acts["f2"])
    for key, g in feat2_grads.items():
        grads[f"feat2.{key}"] = g

    if drc:
        db_drc += dx2
    df1_pre = dx2 * (acts["f1_pre"] > 0)
    db, feat1_grads = _feature_bwd(model.feat1, df1_pre, acts["f1"])
    for key, g in feat1_grads.items():
        grads[f"feat1.{key}"] = g

    if drc:
        db = db + db_drc
    db_pre = db * (acts["b_pre"] > 0)
    _, dw, dbias = _conv_bwd(db_pre, model.conv_in, acts["c_in"])
    grads["conv_in.weights"], grads["conv_in.bias"] = dw, dbias
    return loss, grads


def sgd_step(params, grads, velocity, cfg: TrainConfig):
    """v <- momentum * v - lr * g; theta <- theta + v, in place."""
    for name, p in params.items():
        v = velocity[name]
        v *= cfg.momentum
        v -= cfg.learning_rate * grads[name]
        p += v
    return params, velocity


def train(model: Model, patches, labels, cfg: TrainConfig, verbose=False):
    """Mini-batch SGD over epoch-wise shuffles; the final partial batch is
    kept. Returns the per-epoch mean loss trace (length cfg.epochs)."""
    cfg.validate()
    patches = np.asarray(patches, dtype=np.float64)
    labels = np.asarray(labels)
    if len(patches) == 0:
        raise ValueError("training set is empty")
    if labels.min() < 0 or labels.max() >= model.config.num_classes:
        raise ValueError(f"labels must lie in [0, {model.config.num_classes})")

    params = network.parameters(model)
    velocity = {name: np.zeros_like(p) for name, p in params.items()}
    rng = rng_stream(cfg.seed)
    trace = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(patches))
        batch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = backward(model, patches[idx], labels[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss {loss} at epoch {epoch + 1}, batch {start // cfg.batch_size}")
            sgd_step(params, grads, velocity, cfg)
            batch_losses.append(loss)
        trace.append(float(np.mean(batch_losses)))
        if verbose:
            print(f"epoch {epoch + 1}/{cfg.epochs} loss {trace[-1]:.6f}")
    return trace
