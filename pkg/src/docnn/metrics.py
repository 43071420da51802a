"""Confusion matrix, overall accuracy, per-class accuracy, Cohen's kappa,
multi-run aggregation, and P6 classification-map rendering.

Rows of the confusion matrix are true classes, columns predictions. Overall
accuracy and the kappa agreement terms are computed as single integer
divisions, so they match a direct tally over the label lists exactly.
"""

from dataclasses import dataclass

import numpy as np

# Fixed 16-color palette so rendered maps are byte-for-byte reproducible.
DEFAULT_PALETTE = (
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
    (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
    (210, 245, 60), (250, 190, 190), (0, 128, 128), (230, 190, 255),
    (170, 110, 40), (255, 250, 200), (128, 0, 0), (170, 255, 195),
)


@dataclass
class EvalReport:
    oa: float
    kappa: float
    per_class: list
    confusion: np.ndarray

    def to_json_dict(self):
        return {
            "oa": self.oa,
            "kappa": self.kappa,
            "per_class": list(self.per_class),
            "confusion": self.confusion.tolist(),
        }


@dataclass
class RunSummary:
    n_runs: int
    oa_mean: float
    oa_std: float
    kappa_mean: float
    kappa_std: float

    def to_json_dict(self):
        return {
            "runs": self.n_runs,
            "oa": {"mean": self.oa_mean, "std": self.oa_std},
            "kappa_x100": {"mean": 100 * self.kappa_mean, "std": 100 * self.kappa_std},
        }


def confusion(true_labels, predicted_labels, num_classes):
    true_labels = np.asarray(true_labels)
    predicted_labels = np.asarray(predicted_labels)
    if true_labels.shape != predicted_labels.shape:
        raise ValueError(
            f"{len(true_labels)} true labels vs {len(predicted_labels)} predictions")
    for name, arr in (("true", true_labels), ("predicted", predicted_labels)):
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise ValueError(f"{name} labels outside [0, {num_classes})")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (true_labels, predicted_labels), 1)
    return cm


def overall_accuracy(cm):
    total = int(cm.sum())
    if total == 0:
        raise ValueError("empty confusion matrix")
    return int(np.trace(cm)) / total


def per_class_accuracy(cm):
    rowsums = cm.sum(axis=1)
    if (rowsums == 0).any():
        empty = int(np.argmin(rowsums))
        raise ValueError(f"class {empty} has no samples; per-class accuracy undefined")
    return list(np.diag(cm) / rowsums)


def kappa(cm):
    """Chance-corrected agreement (p_o - p_e) / (1 - p_e).

    Degenerate p_e = 1 (both marginals concentrated on one class) is defined
    as 1 for perfect agreement and 0 otherwise.
    """
    total = int(cm.sum())
    if total == 0:
        raise ValueError("empty confusion matrix")
    p_o = int(np.trace(cm)) / total
    p_e = int((cm.sum(axis=1) * cm.sum(axis=0)).sum()) / (total * total)
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


def evaluate(true_labels, predicted_labels, num_classes) -> EvalReport:
    cm = confusion(true_labels, predicted_labels, num_classes)
    return EvalReport(oa=overall_accuracy(cm), kappa=kappa(cm),
                      per_class=per_class_accuracy(cm), confusion=cm)


def aggregate(reports) -> RunSummary:
    """Mean and sample (n-1) standard deviation over runs; std is 0 for n=1."""
    if not reports:
        raise ValueError("no reports to aggregate")
    oas = np.array([r.oa for r in reports])
    kappas = np.array([r.kappa for r in reports])
    std = (lambda v: float(v.std(ddof=1))) if len(reports) > 1 else (lambda v: 0.0)
    return RunSummary(n_runs=len(reports),
                      oa_mean=float(oas.mean()), oa_std=std(oas),
                      kappa_mean=float(kappas.mean()), kappa_std=std(kappas))


def render_map(predictions, palette=None, class_names=None):
    """Render a class raster as a binary P6 pixmap.

    predictions: (H, W) int raster; values >= 0 index the palette, negatives
    mean unlabeled and render black. Returns (ppm bytes, legend dict mapping
    class name -> [r, g, b]).
    """
    predictions = np.asarray(predictions)
    if predictions.ndim != 2:
        raise ValueError(f"expected a 2-D raster, got shape {predictions.shape}")
    palette = DEFAULT_PALETTE if palette is None else palette
    top = int(predictions.max()) if predictions.size else -1
    if top >= len(palette):
        raise ValueError(f"class {top} has no palette entry (palette size {len(palette)})")
    h, w = predictions.shape
    lut = np.zeros((len(palette) + 1, 3), dtype=np.uint8)
    lut[1:] = np.asarray(palette, dtype=np.uint8)
    rgb = lut[np.where(predictions < 0, 0, predictions + 1)]
    ppm = b"P6\n%d %d\n255\n" % (w, h) + rgb.tobytes()
    legend = {"unlabeled": [0, 0, 0]}
    for c in range(top + 1):
        name = class_names[c] if class_names else f"class_{c}"
        legend[name] = list(palette[c])
    return ppm, legend
