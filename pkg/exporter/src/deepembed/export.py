"""Batched embedding export from an image directory.

Images are read in lexicographic file order (never filesystem enumeration
order), converted to grayscale, resized to the backbone's input size with
bilinear interpolation, and scaled to [0,1]. Unreadable files are skipped
with a warning and recorded in a sidecar log next to the output.
"""

from __future__ import annotations

import fnmatch
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .backbones import load_backbone
from .femb import write_femb, write_probs_csv

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".pgm", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


@dataclass(frozen=True)
class ExporterConfig:
    input_dir: str
    backbone: str = "tinynet"
    layer: str = "pooled"          # "pooled" | "spatial"
    batch_size: int = 32
    output_path: str = "embeddings.femb"
    probs_path: str | None = None
    device: str = "cpu"
    exclude: str | None = None     # fnmatch pattern, e.g. "*_mask*"

    def __post_init__(self):
        if self.layer not in ("pooled", "spatial"):
            raise ValueError(f"layer must be 'pooled' or 'spatial', got {self.layer!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def _load_image(path: Path, size: int) -> np.ndarray:
    with Image.open(path) as img:
        gray = img.convert("F" if img.mode in ("I", "I;16", "F") else "L")
        resized = gray.resize((size, size), Image.BILINEAR)
        arr = np.asarray(resized, dtype=np.float32)
    peak = arr.max()
    if peak > 1.0:
        # 8-bit and 16-bit integer sources land here; floats already in [0,1]
        arr = arr / (65535.0 if peak > 255.0 else 255.0)
    return arr


def export_embeddings(config: ExporterConfig) -> tuple[int, int]:
    """Run the backbone over the directory; returns (rows written, skipped).

    Writes the FEMB file (extractor_tag "<backbone>:<layer>"), the optional
    class-probability CSV, and a sidecar log listing skipped files.
    """
    input_dir = Path(config.input_dir)
    if not input_dir.is_dir():
        raise FileNotFoundError(f"input directory not found: {input_dir}")
    model, info = load_backbone(config.backbone)
    device = torch.device(config.device)
    model.to(device)

    paths = sorted(p for p in input_dir.iterdir()
                   if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
                   and not (config.exclude and fnmatch.fnmatch(p.name, config.exclude)))
    ids, arrays, skipped = [], [], []
    for path in paths:
        try:
            arrays.append(_load_image(path, info.input_size))
            ids.append(path.name)
        except Exception as exc:  # unreadable image: skip, warn, log
            log.warning("skipping unreadable image %s: %s", path.name, exc)
            skipped.append(f"{path.name}\t{exc}")
    if not ids:
        raise ValueError(f"no readable images in {input_dir}")

    features, probs = [], []
    torch.set_grad_enabled(False)
    for start in range(0, len(arrays), config.batch_size):
        batch = np.stack(arrays[start:start + config.batch_size])[:, None, :, :]
        fmap, pooled, logits = model(torch.from_numpy(batch).to(device))
        if config.layer == "pooled":
            feats = pooled
        else:
            feats = fmap.flatten(start_dim=1)  # (b, c * g * g)
        features.append(feats.cpu().numpy())
        probs.append(torch.softmax(logits, dim=1).cpu().numpy())

    values = np.concatenate(features)
    tag = f"{config.backbone}:{config.layer}"
    write_femb(values, ids, tag, config.output_path)
    if config.probs_path:
        write_probs_csv(np.concatenate(probs).astype(np.float64), ids,
                        config.probs_path)

    log_path = Path(config.output_path).with_suffix(".skipped.log")
    log_path.write_text("".join(line + "\n" for line in skipped))
    return len(ids), len(skipped)
