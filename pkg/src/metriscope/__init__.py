"""metriscope: stress-testing toolkit for no-reference image-quality metrics
used to evaluate generative medical imaging."""

from .core import (
    ClassProbMatrix,
    FeatureMatrix,
    ImageSet,
    ImageVolume,
    RngStream,
    normalize_intensity,
    partition_dataset,
    read_image_set,
    write_image_set,
)
from .featstore import (
    ExtractorSpec,
    extract_global64,
    extract_spatial48,
    fit_kmeans,
    pseudo_class_probs,
    read_femb,
    write_femb,
)
from .metrics import MetricConfig, MetricReport, evaluate_all
from .phantom import PhantomSpec, generate_phantom_set

__version__ = "0.1.0"

__all__ = [
    "ClassProbMatrix",
    "ExtractorSpec",
    "FeatureMatrix",
    "ImageSet",
    "ImageVolume",
    "MetricConfig",
    "MetricReport",
    "PhantomSpec",
    "RngStream",
    "evaluate_all",
    "extract_global64",
    "extract_spatial48",
    "fit_kmeans",
    "generate_phantom_set",
    "normalize_intensity",
    "partition_dataset",
    "pseudo_class_probs",
    "read_femb",
    "read_image_set",
    "write_femb",
    "write_image_set",
]
