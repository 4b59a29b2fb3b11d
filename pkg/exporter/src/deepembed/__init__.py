"""deepembed: adapter exporting vision-backbone embeddings as FEMB files."""

from .backbones import ALLOWED_BACKBONES, BackboneError, load_backbone
from .export import ExporterConfig, export_embeddings

__version__ = "0.1.0"

__all__ = [
    "ALLOWED_BACKBONES",
    "BackboneError",
    "ExporterConfig",
    "export_embeddings",
    "load_backbone",
]
