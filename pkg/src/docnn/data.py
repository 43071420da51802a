"""Hyperspectral scene handling: container I/O, per-band standardization,
PCA to a fixed component count, reflect-padded patch extraction, and
stratified train/test splits.

Scene container (HSIC v1): a directory holding
  header.json  {"width", "height", "bands", "dtype": "f32le",
                "interleave": "bsq", "class_names": [...]}
  data.raw     band-sequential float32 little-endian, band-major then
               row-major within a band
  labels.raw   row-major uint16 little-endian, 0 = unlabeled

Labels are 1-based in rasters (0 = unlabeled); model class indices are the
label minus one. Unlabeled pixels take part in standardization and PCA but
never in splits or metrics.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from .tensor import pad_reflect

PATCH_SIZE = 9
PCA_COMPONENTS = 15


@dataclass
class HsiScene:
    cube: np.ndarray        # (height, width, bands) float64
    labels: np.ndarray      # (height, width) int, 0 = unlabeled
    class_names: list

    def __post_init__(self):
        if self.cube.ndim != 3:
            raise ValueError(f"cube must be (H, W, B), got shape {self.cube.shape}")
        if self.labels.shape != self.cube.shape[:2]:
            raise ValueError(
                f"labels raster {self.labels.shape} does not match cube {self.cube.shape[:2]}")
        if self.labels.size and self.labels.max() > len(self.class_names):
            raise ValueError(
                f"label {self.labels.max()} exceeds {len(self.class_names)} declared classes")

    @property
    def height(self):
        return self.cube.shape[0]

    @property
    def width(self):
        return self.cube.shape[1]

    @property
    def bands(self):
        return self.cube.shape[2]

    @property
    def num_classes(self):
        return len(self.class_names)


@dataclass
class PcaModel:
    mean: np.ndarray                # (bands,)
    scale: np.ndarray               # (bands,) divisor applied before centering; ones unless supplied
    components: np.ndarray          # (bands, k), orthonormal columns
    explained_variance: np.ndarray  # (k,), nonincreasing


@dataclass
class SplitSpec:
    train_fraction: float
    seed: int
    min_per_class: int = 1

    def validate(self):
        if not 0 < self.train_fraction <= 1:
            raise ValueError(f"train_fraction must be in (0, 1], got {self.train_fraction}")
        if self.min_per_class < 0:
            raise ValueError(f"min_per_class must be >= 0, got {self.min_per_class}")
        return self


def standardize(scene: HsiScene):
    """Shift/scale every band to mean 0, variance 1 over all pixels.

    Returns (new scene, per-band mean, per-band std). A constant band has its
    std clamped to 1 and comes out all zeros.
    """
    if scene.cube.size == 0:
        raise ValueError("empty cube")
    flat = scene.cube.reshape(-1, scene.bands)
    mean = flat.mean(axis=0)
    std = flat.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    cube = (scene.cube - mean) / std
    return HsiScene(cube=cube, labels=scene.labels, class_names=scene.class_names), mean, std


def pca_fit(scene: HsiScene, k, scale=None) -> PcaModel:
    """Top-k eigenvectors of the pixel covariance matrix.

    Pixels are treated as band-vectors; the data is centered (and divided by
    `scale` when given) but not rescaled otherwise, so explained_variance
    reports the actual band-space variances. Eigenvector signs are fixed by
    making each column's largest-magnitude entry positive.
    """
    if k > scene.bands:
        raise ValueError(f"k={k} exceeds {scene.bands} bands")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    x = scene.cube.reshape(-1, scene.bands)
    scale = np.ones(scene.bands) if scale is None else np.asarray(scale, dtype=np.float64)
    x = x / scale
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / max(len(xc) - 1, 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:k]
    components = evecs[:, order]
    flips = np.sign(components[np.abs(components).argmax(axis=0), np.arange(k)])
    components = components * flips
    return PcaModel(mean=mean * scale, scale=scale, components=components,
                    explained_variance=evals[order])


def pca_apply(scene: HsiScene, model: PcaModel):
    """Project the cube onto the fitted components: (H, W, k)."""
    if scene.bands != model.components.shape[0]:
        raise ValueError(
            f"scene has {scene.bands} bands, PCA model expects {model.components.shape[0]}")
    x = (scene.cube - model.mean) / model.scale
    return x @ model.components


def extract_patch(projected, row, col, size=PATCH_SIZE):
    """size x size window centered at (row, col), reflect-padded at borders."""
    h, w = projected.shape[:2]
    if not (0 <= row < h and 0 <= col < w):
        raise ValueError(f"center ({row}, {col}) outside {h}x{w} raster")
    margin = size // 2
    padded = pad_reflect(projected, margin)
    return padded[row:row + size, col:col + size].copy()


class PatchSource:
    """Reusable patch extractor: pads the projection once, then slices."""

    def __init__(self, projected, size=PATCH_SIZE):
        self.size = size
        self.channels = projected.shape[2]
        self.padded = pad_reflect(projected, size // 2)

    def take(self, pixels):
        pixels = np.asarray(pixels)
        out = np.empty((len(pixels), self.size, self.size, self.channels))
        for i, (row, col) in enumerate(pixels):
            out[i] = self.padded[row:row + self.size, col:col + self.size]
        return out


def extract_patches(projected, pixels, size=PATCH_SIZE):
    """Batch patch extraction; pads the projection once. pixels: (n, 2)."""
    return PatchSource(projected, size).take(pixels)


def stratified_split(scene: HsiScene, spec: SplitSpec):
    """Per-class sampling of training pixels without replacement.

    Class c with n_c labeled pixels contributes
    max(min_per_class, round-half-away(fraction * n_c)) training pixels,
    capped at n_c; everything else is test. Returns (train, test) as (n, 2)
    int arrays of (row, col), deterministic for a given spec.
    """
    spec.validate()
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    train, test = [], []
    for c in range(1, scene.num_classes + 1):
        pixels = np.argwhere(scene.labels == c)  # row-major scan order
        n_c = len(pixels)
        if n_c == 0:
            raise ValueError(f"class {c} ({scene.class_names[c - 1]!r}) has no labeled pixels")
        n_train = int(np.floor(spec.train_fraction * n_c + 0.5))
        n_train = min(n_c, max(spec.min_per_class, n_train))
        chosen = np.sort(rng.permutation(n_c)[:n_train])
        mask = np.zeros(n_c, dtype=bool)
        mask[chosen] = True
        train.append(pixels[mask])
        test.append(pixels[~mask])
    return np.concatenate(train), np.concatenate(test)


def labels_at(scene: HsiScene, pixels):
    """Zero-based class indices of labeled pixels."""
    pixels = np.asarray(pixels)
    raw = scene.labels[pixels[:, 0], pixels[:, 1]]
    if raw.size and raw.min() < 1:
        raise ValueError("pixel list contains unlabeled positions")
    return raw.astype(np.int64) - 1


def load_scene(path) -> HsiScene:
    """Read an HSIC v1 container directory."""
    with open(os.path.join(path, "header.json"), "r", encoding="utf-8") as f:
        header = json.load(f)
    for key in ("width", "height", "bands", "dtype", "interleave", "class_names"):
        if key not in header:
            raise ValueError(f"{path}: header.json missing {key!r}")
    if header["dtype"] != "f32le" or header["interleave"] != "bsq":
        raise ValueError(f"{path}: unsupported layout {header['dtype']}/{header['interleave']}")
    h, w, b = header["height"], header["width"], header["bands"]
    data = np.fromfile(os.path.join(path, "data.raw"), dtype="<f4")
    if data.size != h * w * b:
        raise ValueError(f"{path}: data.raw holds {data.size} floats, expected {h * w * b}")
    cube = data.reshape(b, h, w).transpose(1, 2, 0).astype(np.float64)
    labels = np.fromfile(os.path.join(path, "labels.raw"), dtype="<u2")
    if labels.size != h * w:
        raise ValueError(f"{path}: labels.raw holds {labels.size} entries, expected {h * w}")
    return HsiScene(cube=cube, labels=labels.reshape(h, w).astype(np.int64),
                    class_names=list(header["class_names"]))


def save_scene(scene: HsiScene, path):
    """Write an HSIC v1 container directory (f32 quantizes the cube)."""
    os.makedirs(path, exist_ok=True)
    header = {
        "width": scene.width,
        "height": scene.height,
        "bands": scene.bands,
        "dtype": "f32le",
        "interleave": "bsq",
        "class_names": list(scene.class_names),
    }
    with open(os.path.join(path, "header.json"), "w", encoding="utf-8") as f:
        json.dump(header, f, indent=2, sort_keys=True)
        f.write("\n")
    scene.cube.transpose(2, 0, 1).astype("<f4").tofile(os.path.join(path, "data.raw"))
    scene.labels.astype("<u2").tofile(os.path.join(path, "labels.raw"))
