"""Allow-listed vision backbones with checksum-pinned weights.

Weights are generated from a specified counter-based random stream (numpy
Philox), not from torch's initializers, so they are bit-stable across torch
versions; the SHA-256 of the serialized state dict is pinned per backbone
and verified at load time. Embedding drift would silently change every
downstream metric, so a checksum mismatch aborts.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn


class BackboneError(ValueError):
    """Unsupported backbone name or weight-checksum mismatch."""


@dataclass(frozen=True)
class BackboneInfo:
    name: str
    input_size: int          # images are resized to input_size x input_size
    pooled_dim: int
    spatial_grid: int        # final feature-map side
    num_classes: int
    weight_seed: int
    state_checksum: str      # sha256 over the serialized state dict


class _ConvEncoder(nn.Module):
    """Four stride-2 conv blocks over a grayscale input, plus a linear head.

    Exposes both the globally pooled embedding and the final spatial map so
    the layer selector is a pure view choice, not a different forward pass.
    """

    def __init__(self, channels=(8, 16, 32, 64), num_classes=10):
        super().__init__()
        blocks = []
        prev = 1
        for ch in channels:
            blocks += [nn.Conv2d(prev, ch, kernel_size=3, stride=2, padding=1),
                       nn.GELU()]
            prev = ch
        self.encoder = nn.Sequential(*blocks)
        self.head = nn.Linear(prev, num_classes)

    def forward(self, x):
        fmap = self.encoder(x)                      # (b, c, g, g)
        pooled = fmap.mean(dim=(2, 3))              # (b, c)
        logits = self.head(pooled)
        return fmap, pooled, logits


ALLOWED_BACKBONES = {
    "tinynet": BackboneInfo(
        name="tinynet", input_size=64, pooled_dim=64, spatial_grid=4,
        num_classes=10, weight_seed=1337,
        state_checksum="857dae22199f294bccf04426ce8d975385e656f1754b6361a5a2dfadf3f67d44",
    ),
    "widenet": BackboneInfo(
        name="widenet", input_size=64, pooled_dim=128, spatial_grid=4,
        num_classes=10, weight_seed=2024,
        state_checksum="9dc5e7c6071969041e339518fc648819bde55d3cd200a6d8ae023ac63891d315",
    ),
}

_CHANNELS = {"tinynet": (8, 16, 32, 64), "widenet": (16, 32, 64, 128)}


def _seeded_state(model: nn.Module, seed: int) -> dict:
    """Fill every parameter from one Philox stream in state-dict order."""
    gen = np.random.Generator(np.random.Philox(seed))
    state = {}
    for name, tensor in model.state_dict().items():
        fan_in = int(np.prod(tensor.shape[1:])) if tensor.ndim > 1 else tensor.shape[0]
        scale = 1.0 / np.sqrt(max(fan_in, 1))
        values = gen.normal(0.0, scale, size=tuple(tensor.shape))
        state[name] = torch.from_numpy(values.astype(np.float32))
    return state


def state_checksum(state: dict) -> str:
    h = hashlib.sha256()
    for name in sorted(state):
        h.update(name.encode("utf-8"))
        h.update(state[name].numpy().tobytes())
    return h.hexdigest()


def load_backbone(name: str) -> tuple[_ConvEncoder, BackboneInfo]:
    """Build an allow-listed backbone and verify its pinned weight checksum."""
    if name not in ALLOWED_BACKBONES:
        raise BackboneError(
            f"backbone {name!r} is not in the allow-list {sorted(ALLOWED_BACKBONES)}")
    info = ALLOWED_BACKBONES[name]
    model = _ConvEncoder(channels=_CHANNELS[name], num_classes=info.num_classes)
    state = _seeded_state(model, info.weight_seed)
    digest = state_checksum(state)
    if digest != info.state_checksum:
        raise BackboneError(
            f"backbone {name!r} weight checksum mismatch: got {digest}, "
            f"pinned {info.state_checksum}")
    model.load_state_dict(state)
    model.eval()
    return model, info
