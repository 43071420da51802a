"""Command-line pipeline: train, eval, predict-map, fold, param-count,
selfcheck.

Experiments are described by one JSON config; flags override individual
fields. Every subcommand is deterministic given its config (seeds live in
the config, never wall clock). Config schema, with defaults:

    {
      "dataset": "PATH | synthetic | synthetic:<seed>",
      "pca_components": 15,
      "num_classes": null,            // derived from the dataset when null
      "network": {"layer_type": "doconv", "drc_enabled": true, "d_mul": 9,
                  "mid_channels": 32, "out_channels": 64, "input_size": 9},
      "split": {"train_fraction": 0.01, "seed": 1, "min_per_class": 1},
      "train": {"learning_rate": 0.01, "momentum": 0.9, "batch_size": 64,
                "epochs": 120, "seed": 1},
      "runs": 10,
      "reshuffle_split_per_run": true
    }

The ten-run protocol reshuffles the split each run with seeds seed+i by
default; set reshuffle_split_per_run to false to reuse one split and only
reinitialize weights.
"""

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import data, metrics, network, selfcheck
from . import train as training
from .synthetic import synthetic_scene


@dataclass
class ExperimentConfig:
    dataset: str
    split: data.SplitSpec
    train: training.TrainConfig
    network: dict
    pca_components: int = data.PCA_COMPONENTS
    num_classes: int = None
    runs: int = 10
    reshuffle_split_per_run: bool = True


def load_config(path, seed=None, runs=None) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as f:
        raw = json.load(f)
    split_raw = dict(raw.get("split", {}))
    train_raw = dict(raw.get("train", {}))
    if seed is not None:
        split_raw["seed"] = seed
        train_raw["seed"] = seed
    split = data.SplitSpec(
        train_fraction=split_raw.get("train_fraction", 0.01),
        seed=split_raw.get("seed", 1),
        min_per_class=split_raw.get("min_per_class", 1)).validate()
    cfg = training.TrainConfig(
        epochs=train_raw.get("epochs", 120),
        learning_rate=train_raw.get("learning_rate", 0.01),
        momentum=train_raw.get("momentum", 0.9),
        batch_size=train_raw.get("batch_size", 64),
        seed=train_raw.get("seed", 1)).validate()
    return ExperimentConfig(
        dataset=raw["dataset"],
        split=split,
        train=cfg,
        network=dict(raw.get("network", {})),
        pca_components=raw.get("pca_components", data.PCA_COMPONENTS),
        num_classes=raw.get("num_classes"),
        runs=runs if runs is not None else raw.get("runs", 10),
        reshuffle_split_per_run=raw.get("reshuffle_split_per_run", True))


def resolve_scene(dataset) -> data.HsiScene:
    if dataset == "synthetic" or dataset.startswith("synthetic:"):
        seed = int(dataset.split(":", 1)[1]) if ":" in dataset else 0
        return synthetic_scene(seed=seed)
    return data.load_scene(dataset)


def network_config(exp: ExperimentConfig, num_classes) -> network.NetworkConfig:
    fields = {"in_channels": exp.pca_components, **exp.network}
    return network.NetworkConfig(num_classes=num_classes, **fields).validate()


def project_scene(scene, k):
    """standardize -> PCA fit -> projected (H, W, k) cube."""
    scene_std, _, _ = data.standardize(scene)
    pca = data.pca_fit(scene_std, k)
    return data.pca_apply(scene_std, pca)


def classify_pixels(model, source: data.PatchSource, pixels, batch_size=512):
    preds = np.empty(len(pixels), dtype=np.int64)
    for lo in range(0, len(pixels), batch_size):
        patches = source.take(pixels[lo:lo + batch_size])
        preds[lo:lo + len(patches)] = network.forward(model, patches).argmax(axis=1)
    return preds


def run_experiment(exp: ExperimentConfig, verbose=False):
    """The seeded multi-run protocol. Returns (per-run EvalReports, last model)."""
    scene = resolve_scene(exp.dataset)
    num_classes = exp.num_classes if exp.num_classes is not None else scene.num_classes
    net_cfg = network_config(exp, num_classes)
    projected = project_scene(scene, exp.pca_components)
    source = data.PatchSource(projected, net_cfg.input_size)
    reports = []
    model = None
    for i in range(exp.runs):
        split_seed = exp.split.seed + i if exp.reshuffle_split_per_run else exp.split.seed
        spec = data.SplitSpec(exp.split.train_fraction, split_seed, exp.split.min_per_class)
        train_px, test_px = data.stratified_split(scene, spec)
        cfg = dataclasses.replace(exp.train, seed=exp.train.seed + i)
        model = network.build(net_cfg, training.rng_stream(cfg.seed))
        training.train(model, source.take(train_px), data.labels_at(scene, train_px),
                       cfg, verbose=verbose)
        preds = classify_pixels(model, source, test_px)
        reports.append(metrics.evaluate(data.labels_at(scene, test_px), preds, num_classes))
        if verbose:
            r = reports[-1]
            print(f"run {i + 1}/{exp.runs} oa {r.oa:.4f} kappa {r.kappa:.4f}")
    return reports, model


def _emit(payload):
    print(json.dumps(payload, sort_keys=True))


def cmd_train(args):
    exp = load_config(args.config, seed=args.seed, runs=args.runs)
    reports, model = run_experiment(exp, verbose=args.verbose)
    network.save(model, args.out)
    summary = metrics.aggregate(reports).to_json_dict()
    summary["per_run"] = [{"oa": r.oa, "kappa": r.kappa} for r in reports]
    summary["model"] = args.out
    _emit(summary)
    return 0


def cmd_eval(args):
    model = network.load(args.model)
    scene = resolve_scene(args.dataset)
    if model.config.num_classes != scene.num_classes:
        raise ValueError(f"model has {model.config.num_classes} classes, "
                         f"dataset declares {scene.num_classes}")
    projected = project_scene(scene, model.config.in_channels)
    spec = data.SplitSpec(args.fraction, args.split_seed, args.min_per_class).validate()
    _, test_px = data.stratified_split(scene, spec)
    source = data.PatchSource(projected, model.config.input_size)
    preds = classify_pixels(model, source, test_px)
    report = metrics.evaluate(data.labels_at(scene, test_px), preds, scene.num_classes)
    _emit(report.to_json_dict())
    return 0


def cmd_predict_map(args):
    model = network.load(args.model)
    scene = resolve_scene(args.dataset)
    if model.config.num_classes != scene.num_classes:
        raise ValueError(f"model has {model.config.num_classes} classes, "
                         f"dataset declares {scene.num_classes}")
    projected = project_scene(scene, model.config.in_channels)
    pixels = np.argwhere(scene.labels > 0)
    source = data.PatchSource(projected, model.config.input_size)
    preds = classify_pixels(model, source, pixels)
    raster = np.full(scene.labels.shape, -1, dtype=np.int64)
    raster[pixels[:, 0], pixels[:, 1]] = preds
    ppm, legend = metrics.render_map(raster, class_names=scene.class_names)
    with open(args.out, "wb") as f:
        f.write(ppm)
    legend_path = os.path.splitext(args.out)[0] + ".legend.json"
    with open(legend_path, "w", encoding="utf-8") as f:
        json.dump(legend, f, indent=2, sort_keys=True)
        f.write("\n")
    _emit({"map": args.out, "legend": legend_path, "pixels": int(len(pixels))})
    return 0


def cmd_fold(args):
    model = network.load(args.model)
    network.export_folded(model, args.out)
    folded = network.load(args.out)
    _emit({"folded": args.out, "parameters": network.parameter_count(folded)})
    return 0


def cmd_param_count(args):
    exp = load_config(args.config)
    if exp.num_classes is None:
        exp = dataclasses.replace(exp, num_classes=resolve_scene(exp.dataset).num_classes)
    print(network.count_parameters(network_config(exp, exp.num_classes)))
    return 0


def cmd_selfcheck(args):
    return selfcheck.run_selfcheck(verbose=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="docnn",
                                     description="Shallow DO-Conv network for HSI classification")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the seeded multi-run training protocol")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="path for the last run's model file")
    p.add_argument("--seed", type=int, default=None, help="override split and train seeds")
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model on a test split")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--fraction", type=float, default=0.01, help="training fraction of the split")
    p.add_argument("--split-seed", type=int, default=1)
    p.add_argument("--min-per-class", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict-map", help="classify every labeled pixel and render a P6 map")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output .ppm path; legend lands beside it")
    p.set_defaults(func=cmd_predict_map)

    p = sub.add_parser("fold", help="export an inference model with DO-Conv kernels folded")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fold)

    p = sub.add_parser("param-count", help="print the trainable parameter total for a config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_param_count)

    p = sub.add_parser("selfcheck", help="run fold-equivalence, gradient, and metric suites")
    p.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except training.TrainingDiverged as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, network.ModelFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
