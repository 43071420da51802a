"""MAT cube + ground truth -> HSIC container v1.

Container layout (consumed by the classifier package):
  header.json   {"width", "height", "bands", "dtype": "f32le",
                 "interleave": "bsq", "class_names": [...]}
  data.raw      float32 little-endian, band-sequential (band, row, col)
  labels.raw    uint16 little-endian, row-major, 0 = unlabeled

Source values are cast to float32 without any scaling, so the written bytes
round-trip bitwise against the 32-bit cast of the source cube, and
re-conversion is byte-identical.
"""

import json
import os

import numpy as np
import scipy.io


class ConversionError(RuntimeError):
    pass


def load_mat_array(path, key):
    try:
        contents = scipy.io.loadmat(path)
    except Exception as e:
        raise ConversionError(f"{path}: not a readable MAT file: {e}") from e
    if key not in contents:
        candidates = [k for k in contents if not k.startswith("__")]
        raise ConversionError(f"{path}: variable {key!r} not found (has {candidates})")
    return np.asarray(contents[key])


def convert(data_path, gt_path, manifest, out_dir):
    """Write the HSIC container for one scene; returns out_dir."""
    cube = load_mat_array(data_path, manifest.data_key)
    gt = load_mat_array(gt_path, manifest.gt_key)

    expected = (manifest.height, manifest.width, manifest.bands)
    if cube.shape != expected:
        raise ConversionError(
            f"{data_path}: cube shape {cube.shape} does not match manifest {expected}")
    if gt.shape != (manifest.height, manifest.width):
        raise ConversionError(
            f"{gt_path}: ground truth shape {gt.shape} does not match "
            f"manifest {(manifest.height, manifest.width)}")
    gt = gt.astype(np.int64)
    if gt.min() < 0 or gt.max() > manifest.num_classes:
        raise ConversionError(
            f"{gt_path}: labels span [{gt.min()}, {gt.max()}], manifest declares "
            f"{manifest.num_classes} classes")

    os.makedirs(out_dir, exist_ok=True)
    header = {
        "width": manifest.width,
        "height": manifest.height,
        "bands": manifest.bands,
        "dtype": "f32le",
        "interleave": "bsq",
        "class_names": list(manifest.class_names),
    }
    with open(os.path.join(out_dir, "header.json"), "w", encoding="utf-8") as f:
        json.dump(header, f, indent=2, sort_keys=True)
        f.write("\n")
    cube.astype("<f4").transpose(2, 0, 1).tofile(os.path.join(out_dir, "data.raw"))
    gt.astype("<u2").tofile(os.path.join(out_dir, "labels.raw"))
    return out_dir
