"""The shallow DOCNN-DRC classifier and its ablation variants.

Topology: 1x1 conv (in_channels -> mid) -> feature layer 1 -> feature layer 2
-> 1x1 conv (mid -> out) -> global average pooling -> fully connected ->
softmax (taken by the loss / caller). All spatial maps stay at the input
patch size via reflect-padded "same" convolutions, stride 1 throughout.

With the dense residual connection enabled, the post-activation output b of
the first 1x1 conv is added to the input of the second feature layer and to
the input of the final 1x1 conv, keeping shallow high-resolution features
available to every later stage:

    b  = relu(conv_in(x))
    y1 = relu(feat1(b));   x2 = y1 + b   (if drc)
    y2 = relu(feat2(x2));  x3 = y2 + b   (if drc)
    z  = relu(conv_out(x3))
    logits = fc(gap(z))

Feature layers are 3x3 and come in three flavors selected by
NetworkConfig.layer_type: "standard" (plain conv, the SCNN variant),
"depthwise" (depth multiplier 1, SDCNN), or "doconv" (DOCNN / DOCNN-DRC).

Model files: magic "DOCNN1", a little-endian uint32 manifest length, a JSON
manifest (format version, config, named tensor shapes and byte offsets),
then the raw float32 little-endian weight blobs in manifest order.
"""

import dataclasses
import json
import struct
from dataclasses import dataclass

import numpy as np

from . import layers
from .layers import DepthwiseKernel, DoConvKernel, StdKernel
from .tensor import Shape4

KERNEL = 3  # feature-layer spatial size; 1x1 for the channel adapters
FORMAT_VERSION = 1
MAGIC = b"DOCNN1"

LAYER_TYPES = ("standard", "depthwise", "doconv")

# Table-style ablation variants mapped onto (layer_type, drc_enabled).
VARIANTS = {
    "SCNN": ("standard", False),
    "SDCNN": ("depthwise", False),
    "DOCNN": ("doconv", False),
    "DOCNN-DRC": ("doconv", True),
}


class ModelFormatError(Exception):
    """Base for model-file parsing failures."""


class BadMagicError(ModelFormatError):
    pass


class VersionError(ModelFormatError):
    pass


class TruncatedError(ModelFormatError):
    pass


@dataclass
class NetworkConfig:
    num_classes: int
    in_channels: int = 15
    input_size: int = 9
    mid_channels: int = 32
    out_channels: int = 64
    layer_type: str = "doconv"
    drc_enabled: bool = True
    d_mul: int = 9

    def validate(self):
        if self.num_classes < 1:
            raise ValueError(f"num_classes must be >= 1, got {self.num_classes}")
        for name in ("in_channels", "input_size", "mid_channels", "out_channels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.layer_type not in LAYER_TYPES:
            raise ValueError(f"layer_type must be one of {LAYER_TYPES}, got {self.layer_type!r}")
        if self.layer_type == "doconv" and self.d_mul < KERNEL * KERNEL:
            raise ValueError(
                f"doconv needs d_mul >= {KERNEL * KERNEL} (over-parameterization), got {self.d_mul}")
        return self


def variant_config(name, in_channels, num_classes, **overrides):
    """Config for one of the ablation variants SCNN / SDCNN / DOCNN / DOCNN-DRC."""
    layer_type, drc = VARIANTS[name]
    return NetworkConfig(num_classes=num_classes, in_channels=in_channels,
                         layer_type=layer_type, drc_enabled=drc, **overrides)


@dataclass
class DepthwiseLayer:
    """A stand-alone depthwise feature layer (the SDCNN variant) carries its
    own bias; the depthwise stage inside DO-Conv does not."""
    kernel: DepthwiseKernel
    bias: np.ndarray  # (c_in * d_mul,)


@dataclass
class Model:
    config: NetworkConfig
    conv_in: StdKernel
    feat1: object   # StdKernel | DepthwiseLayer | DoConvKernel
    feat2: object
    conv_out: StdKernel
    fc_weights: np.ndarray  # (num_classes, out_channels)
    fc_bias: np.ndarray     # (num_classes,)
    format_version: int = FORMAT_VERSION


def _uniform(rng, fan_in, shape):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _build_feature_layer(config, rng):
    c = config.mid_channels
    k2 = KERNEL * KERNEL
    if config.layer_type == "standard":
        return StdKernel(weights=_uniform(rng, k2 * c, (c, KERNEL, KERNEL, c)),
                         bias=np.zeros(c))
    if config.layer_type == "depthwise":
        kern = DepthwiseKernel(weights=_uniform(rng, k2, (k2, 1, c)), kh=KERNEL, kw=KERNEL)
        return DepthwiseLayer(kernel=kern, bias=np.zeros(c))
    # doconv: pointwise fan-in-scaled, depthwise starts as the identity map so
    # the folded kernel equals the pointwise slice at step 0
    pointwise = _uniform(rng, k2 * c, (c, config.d_mul, c))
    depthwise = np.zeros((k2, config.d_mul, c))
    depthwise[:, :k2, :] = np.eye(k2)[:, :, None]
    return DoConvKernel(depthwise=depthwise, pointwise=pointwise,
                        bias=np.zeros(c), kh=KERNEL, kw=KERNEL)


def build(config: NetworkConfig, rng) -> Model:
    """Fresh model with fan-in-scaled uniform weights and zero biases; draw
    order is fixed so a seed fully determines the parameters."""
    config.validate()
    conv_in = StdKernel(
        weights=_uniform(rng, config.in_channels, (config.mid_channels, 1, 1, config.in_channels)),
        bias=np.zeros(config.mid_channels))
    feat1 = _build_feature_layer(config, rng)
    feat2 = _build_feature_layer(config, rng)
    conv_out = StdKernel(
        weights=_uniform(rng, config.mid_channels, (config.out_channels, 1, 1, config.mid_channels)),
        bias=np.zeros(config.out_channels))
    fc_weights = _uniform(rng, config.out_channels, (config.num_classes, config.out_channels))
    fc_bias = np.zeros(config.num_classes)
    return Model(config=config, conv_in=conv_in, feat1=feat1, feat2=feat2,
                 conv_out=conv_out, fc_weights=fc_weights, fc_bias=fc_bias)


def _feature_forward(layer, x, use_compose):
    if isinstance(layer, StdKernel):
        return layers.conv_std(x, layer, same_pad=True)
    if isinstance(layer, DepthwiseLayer):
        return layers.conv_depthwise(x, layer.kernel, same_pad=True) + layer.bias
    if use_compose:
        return layers.doconv_compose(x, layer, same_pad=True)
    return layers.conv_std(x, layers.doconv_fold(layer), same_pad=True)


def forward(model: Model, x, use_compose=False):
    """Logits for one (H, W, C) patch or an (N, H, W, C) batch.

    DO-Conv feature layers run through the folded kernel by default;
    use_compose=True evaluates the explicit two-stage composition instead
    (same result up to floating point).
    """
    single = x.ndim == 3
    expect = Shape4(model.config.input_size, model.config.input_size,
                    model.config.in_channels, batch=1 if single else len(x))
    if not expect.describes(x):
        raise ValueError(f"patch shape {x.shape} does not match model input {expect}")
    b = layers.relu(layers.conv_std(x, model.conv_in, same_pad=True))
    y1 = layers.relu(_feature_forward(model.feat1, b, use_compose))
    x2 = y1 + b if model.config.drc_enabled else y1
    y2 = layers.relu(_feature_forward(model.feat2, x2, use_compose))
    x3 = y2 + b if model.config.drc_enabled else y2
    z = layers.relu(layers.conv_std(x3, model.conv_out, same_pad=True))
    pooled = layers.gap(z)
    return layers.fully_connected(pooled, model.fc_weights, model.fc_bias)


def predict(model: Model, patches, batch_size=256):
    """Argmax class per patch, evaluated in chunks to bound peak memory."""
    out = np.empty(len(patches), dtype=np.int64)
    for start in range(0, len(patches), batch_size):
        logits = forward(model, patches[start:start + batch_size])
        out[start:start + len(logits)] = logits.argmax(axis=1)
    return out


def parameters(model: Model):
    """Named parameter tensors in a fixed order; values are live views."""
    params = {"conv_in.weights": model.conv_in.weights, "conv_in.bias": model.conv_in.bias}
    for name, layer in (("feat1", model.feat1), ("feat2", model.feat2)):
        if isinstance(layer, StdKernel):
            params[f"{name}.weights"] = layer.weights
            params[f"{name}.bias"] = layer.bias
        elif isinstance(layer, DepthwiseLayer):
            params[f"{name}.weights"] = layer.kernel.weights
            params[f"{name}.bias"] = layer.bias
        else:
            params[f"{name}.depthwise"] = layer.depthwise
            params[f"{name}.pointwise"] = layer.pointwise
            params[f"{name}.bias"] = layer.bias
    params["conv_out.weights"] = model.conv_out.weights
    params["conv_out.bias"] = model.conv_out.bias
    params["fc.weights"] = model.fc_weights
    params["fc.bias"] = model.fc_bias
    return params


def parameter_count(model: Model):
    return sum(int(p.size) for p in parameters(model).values())


def count_parameters(config: NetworkConfig):
    """Analytic trainable-parameter total for a config, biases included."""
    config.validate()
    k2 = KERNEL * KERNEL
    mid, out = config.mid_channels, config.out_channels
    total = mid * config.in_channels + mid            # 1x1 in + bias
    if config.layer_type == "standard":
        per_feat = k2 * mid * mid + mid
    elif config.layer_type == "depthwise":
        per_feat = k2 * mid + mid
    else:
        per_feat = k2 * config.d_mul * mid + mid * config.d_mul * mid + mid
    total += 2 * per_feat
    total += out * mid + out                          # 1x1 out + bias
    total += config.num_classes * out + config.num_classes
    return total


def export_folded(model: Model, path):
    """Write an inference copy with every feature layer collapsed to a
    standard kernel and layer_type forced to "standard"."""
    folded = fold_model(model)
    save(folded, path)


def fold_model(model: Model) -> Model:
    def to_std(layer):
        if isinstance(layer, StdKernel):
            return StdKernel(layer.weights.copy(), layer.bias.copy())
        if isinstance(layer, DoConvKernel):
            return layers.doconv_fold(layer)
        # depthwise: output (c, d) only sees input channel c, so the
        # equivalent standard kernel is block-sparse
        kern, bias = layer.kernel, layer.bias
        k2, d_mul, c_in = kern.weights.shape
        w = np.zeros((c_in * d_mul, kern.kh, kern.kw, c_in))
        flat = kern.weights.reshape(k2, d_mul, c_in)
        for c in range(c_in):
            for d in range(d_mul):
                w[c * d_mul + d, :, :, c] = flat[:, d, c].reshape(kern.kh, kern.kw)
        return StdKernel(weights=w, bias=bias.copy())

    config = dataclasses.replace(model.config, layer_type="standard")
    return Model(config=config, conv_in=to_std(model.conv_in),
                 feat1=to_std(model.feat1), feat2=to_std(model.feat2),
                 conv_out=to_std(model.conv_out),
                 fc_weights=model.fc_weights.copy(), fc_bias=model.fc_bias.copy(),
                 format_version=model.format_version)


def save(model: Model, path):
    params = parameters(model)
    tensors = []
    offset = 0
    blobs = []
    for name, arr in params.items():
        blob = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        tensors.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    manifest = {
        "format_version": model.format_version,
        "config": dataclasses.asdict(model.config),
        "tensors": tensors,
    }
    payload = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(payload)))
        f.write(payload)
        for blob in blobs:
            f.write(blob)


def load(path) -> Model:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < len(MAGIC):
        raise TruncatedError(f"{path}: file shorter than magic string")
    if raw[:len(MAGIC)] != MAGIC:
        raise BadMagicError(f"{path}: not a DOCNN model file")
    if len(raw) < len(MAGIC) + 4:
        raise TruncatedError(f"{path}: missing manifest length")
    (mlen,) = struct.unpack_from("<I", raw, len(MAGIC))
    mstart = len(MAGIC) + 4
    if len(raw) < mstart + mlen:
        raise TruncatedError(f"{path}: manifest truncated")
    try:
        manifest = json.loads(raw[mstart:mstart + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"{path}: bad manifest: {e}") from e
    if manifest.get("format_version") != FORMAT_VERSION:
        raise VersionError(
            f"{path}: format version {manifest.get('format_version')}, expected {FORMAT_VERSION}")
    config = NetworkConfig(**manifest["config"]).validate()
    blob_start = mstart + mlen
    values = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        nbytes = int(np.prod(shape)) * 4
        lo = blob_start + entry["offset"]
        if lo + nbytes > len(raw):
            raise TruncatedError(f"{path}: tensor {entry['name']} extends past end of file")
        values[entry["name"]] = np.frombuffer(raw[lo:lo + nbytes], dtype="<f4").astype(
            np.float64).reshape(shape)
    model = build(config, np.random.default_rng(0))
    params = parameters(model)
    if set(params) != set(values):
        raise ModelFormatError(
            f"{path}: tensor names {sorted(values)} do not match config layout {sorted(params)}")
    for name, arr in params.items():
        if values[name].shape != arr.shape:
            raise ModelFormatError(
                f"{path}: tensor {name} has shape {values[name].shape}, expected {arr.shape}")
        arr[...] = values[name]
    return model
