"""Built-in synthetic hyperspectral scene for tests and smoke runs.

Three spatial class regions (Gaussian bumps on a grid, corners left
unlabeled) with smooth random per-class spectra plus i.i.d. Gaussian band
noise. Deterministic for a given seed, so splits and training runs on it are
reproducible end to end.
"""

import numpy as np

from .data import HsiScene


def synthetic_scene(seed=0, height=32, width=32, bands=20, num_classes=3,
                    noise=1.0, contrast=1.5) -> HsiScene:
    rng = np.random.Generator(np.random.PCG64(seed))

    base = rng.normal(size=(num_classes, bands))
    smooth = np.empty_like(base)
    for c in range(num_classes):
        smooth[c] = np.convolve(base[c], np.ones(5) / 5, mode="same")
    spectra = smooth * contrast

    # class regions: bumps centered on a circle, unlabeled where all are weak
    yy, xx = np.mgrid[0:height, 0:width]
    angles = 2 * np.pi * np.arange(num_classes) / num_classes
    radius = 0.30 * min(height, width)
    sigma = 0.28 * min(height, width)
    intensity = np.empty((num_classes, height, width))
    for c, a in enumerate(angles):
        cy = height / 2 + radius * np.sin(a)
        cx = width / 2 + radius * np.cos(a)
        intensity[c] = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma ** 2))
    labels = intensity.argmax(axis=0) + 1
    labels[intensity.max(axis=0) < 0.35] = 0

    cube = noise * rng.normal(size=(height, width, bands))
    for c in range(num_classes):
        cube[labels == c + 1] += spectra[c]

    names = [f"region_{c + 1}" for c in range(num_classes)]
    return HsiScene(cube=cube, labels=labels.astype(np.int64), class_names=names)
