"""Dataset tooling for the HSIC pipeline: checksum-verified scene fetching,
MAT-to-container conversion, and a synthetic fixture generator."""

__version__ = "0.1.0"

from .convert import ConversionError, convert
from .fetch import ChecksumError, UnpinnedError, fetch, fetch_file, sha256_of
from .manifests import INDIAN_PINES, PAVIA_UNIVERSITY, SALINAS, SCENES, SceneManifest
from .synthetic import synthetic_cube, write_synthetic_scene

__all__ = [
    "ConversionError", "convert",
    "ChecksumError", "UnpinnedError", "fetch", "fetch_file", "sha256_of",
    "INDIAN_PINES", "PAVIA_UNIVERSITY", "SALINAS", "SCENES", "SceneManifest",
    "synthetic_cube", "write_synthetic_scene",
]
