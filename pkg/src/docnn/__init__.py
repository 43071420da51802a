"""Shallow depthwise over-parameterized CNN for hyperspectral image
classification: train-time (depthwise, pointwise) composition, inference-time
kernel folding, and the full PCA -> patches -> train -> OA/kappa pipeline."""

__version__ = "0.1.0"

from .data import HsiScene, PcaModel, SplitSpec
from .layers import DepthwiseKernel, DoConvKernel, StdKernel, doconv_fold
from .metrics import EvalReport, RunSummary
from .network import Model, NetworkConfig, build, forward, load, save
from .synthetic import synthetic_scene
from .train import TrainConfig, rng_stream

__all__ = [
    "HsiScene", "PcaModel", "SplitSpec",
    "DepthwiseKernel", "DoConvKernel", "StdKernel", "doconv_fold",
    "EvalReport", "RunSummary",
    "Model", "NetworkConfig", "build", "forward", "load", "save",
    "synthetic_scene",
    "TrainConfig", "rng_stream",
]
