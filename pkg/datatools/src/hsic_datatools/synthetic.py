"""Tiny synthetic scene so end-to-end runs never need a download: three
spatial regions with Gaussian class spectra over a 32x32x20 cube, written
straight to an HSIC container."""

import json
import os

import numpy as np


def synthetic_cube(seed=0, height=32, width=32, bands=20, noise=1.0, contrast=1.5):
    """Returns (cube float32 (H, W, B), labels int (H, W), class names)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    base = rng.normal(size=(3, bands))
    spectra = np.array([np.convolve(b, np.ones(5) / 5, mode="same") for b in base]) * contrast

    yy, xx = np.mgrid[0:height, 0:width]
    angles = 2 * np.pi * np.arange(3) / 3
    radius = 0.30 * min(height, width)
    sigma = 0.28 * min(height, width)
    intensity = np.stack([
        np.exp(-((yy - height / 2 - radius * np.sin(a)) ** 2
                 + (xx - width / 2 - radius * np.cos(a)) ** 2) / (2 * sigma ** 2))
        for a in angles])
    labels = intensity.argmax(axis=0) + 1
    labels[intensity.max(axis=0) < 0.35] = 0

    cube = noise * rng.normal(size=(height, width, bands))
    for c in range(3):
        cube[labels == c + 1] += spectra[c]
    names = ["region_1", "region_2", "region_3"]
    return cube.astype(np.float32), labels.astype(np.int64), names


def write_synthetic_scene(out_dir, seed=0):
    cube, labels, names = synthetic_cube(seed=seed)
    os.makedirs(out_dir, exist_ok=True)
    header = {
        "width": cube.shape[1],
        "height": cube.shape[0],
        "bands": cube.shape[2],
        "dtype": "f32le",
        "interleave": "bsq",
        "class_names": names,
    }
    with open(os.path.join(out_dir, "header.json"), "w", encoding="utf-8") as f:
        json.dump(header, f, indent=2, sort_keys=True)
        f.write("\n")
    cube.astype("<f4").transpose(2, 0, 1).tofile(os.path.join(out_dir, "data.raw"))
    labels.astype("<u2").tofile(os.path.join(out_dir, "labels.raw"))
    return out_dir
