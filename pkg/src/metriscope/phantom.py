"""Deterministic synthetic phantom generator standing in for clinical slices.

Each phantom is a smooth background texture plus class-dependent curvilinear
arcs (2/1/0 arcs for classes 1/2/3, mirroring present/partial/absent anatomy)
and an optional hyperintense elliptical lesion with an exact binary mask.
Source labels select one of two acquisition presets (gamma shift + noise
floor) to mimic inter-scanner intensity differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ImageSet, ImageVolume, RngStream, allocate_counts

# acquisition presets per source label: (gamma, additive noise floor)
_SOURCE_PRESETS = {0: (1.0, 0.0), 1: (1.15, 0.01)}


@dataclass(frozen=True)
class PhantomSpec:
    """Recipe for one phantom set; identical specs generate identical sets."""

    count: int
    size: int = 64
    class_mix: tuple[float, float, float] = (0.4, 0.4, 0.2)
    source_mix: tuple[float, float] = (0.5, 0.5)
    lesion: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        for name, mix in (("class_mix", self.class_mix), ("source_mix", self.source_mix)):
            if any(m < 0 for m in mix):
                raise ValueError(f"{name} has a negative entry: {mix}")
            if abs(sum(mix) - 1.0) > 1e-9:
                raise ValueError(f"{name} must sum to 1, got {sum(mix)!r}")
        object.__setattr__(self, "class_mix", tuple(float(m) for m in self.class_mix))
        object.__setattr__(self, "source_mix", tuple(float(m) for m in self.source_mix))


@dataclass(frozen=True)
class LesionStats:
    id: str
    area: int
    centroid: tuple[float, float]  # (row, col)


def _smooth_field(gen: np.random.Generator, size: int, coarse: int, lo: float, hi: float) -> np.ndarray:
    """Bilinear upsample of a (coarse+1)^2 uniform grid: a smooth random texture."""
    knots = gen.uniform(lo, hi, size=(coarse + 1, coarse + 1))
    t = np.linspace(0.0, coarse, size)
    i0 = np.minimum(t.astype(int), coarse - 1)
    frac = t - i0
    rows = (knots[i0, :] * (1 - frac)[:, None] + knots[i0 + 1, :] * frac[:, None])
    cols = (rows[:, i0] * (1 - frac)[None, :] + rows[:, i0 + 1] * frac[None, :])
    return cols


def _add_arc(img: np.ndarray, center: tuple[float, float], radius: float,
             theta0: float, theta1: float, width: float, amp: float) -> None:
    """Brighten a partial annulus in place (Gaussian cross-section)."""
    h, w = img.shape
    rr, cc = np.mgrid[0:h, 0:w]
    dy = rr - center[0]
    dx = cc - center[1]
    dist = np.hypot(dy, dx)
    theta = np.mod(np.arctan2(dy, dx) - theta0, 2 * np.pi)
    in_span = theta <= (theta1 - theta0)
    bump = amp * np.exp(-0.5 * ((dist - radius) / width) ** 2)
    img += np.where(in_span, bump, 0.0)


def _lesion(img: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """Insert a smooth hyperintense ellipse; returns its exact binary mask."""
    h, w = img.shape
    a = max(2.0, 0.09 * h) * gen.uniform(1.0, 1.4)
    b = max(2.0, 0.09 * w) * gen.uniform(0.7, 1.0)
    margin = max(a, b) + 2
    cy = gen.uniform(margin, h - margin)
    cx = gen.uniform(margin, w - margin)
    phi = gen.uniform(0, np.pi)
    rr, cc = np.mgrid[0:h, 0:w]
    u = (rr - cy) * np.cos(phi) + (cc - cx) * np.sin(phi)
    v = -(rr - cy) * np.sin(phi) + (cc - cx) * np.cos(phi)
    e2 = (u / a) ** 2 + (v / b) ** 2
    mask = e2 <= 1.0
    # hyperintense by construction: every lesion pixel sits above the
    # pre-lesion image mean, with a smooth interior gradient toward the peak
    base = img.mean() + 0.12
    peak = 0.92
    profile = (1.0 - e2[mask]) ** 0.7
    img[mask] = base + (peak - base) * profile
    return mask


def _render_phantom(size: int, class_label: int, source_label: int, lesion: bool,
                    rng: RngStream) -> tuple[np.ndarray, np.ndarray | None]:
    gen = rng.generator()
    img = _smooth_field(gen, size, coarse=5, lo=0.25, hi=0.55)

    n_arcs = {1: 2, 2: 1, 3: 0}[class_label]
    arc_centers = [(size * 0.5, size * 0.32), (size * 0.5, size * 0.68)]
    for k in range(n_arcs):
        cy, cx = arc_centers[k]
        cy += gen.uniform(-0.02, 0.02) * size
        cx += gen.uniform(-0.02, 0.02) * size
        radius = size * gen.uniform(0.16, 0.20)
        theta0 = gen.uniform(0, 2 * np.pi)
        span = gen.uniform(2.0, 3.5)
        _add_arc(img, (cy, cx), radius, theta0, theta0 + span,
                 width=max(0.8, size / 52), amp=gen.uniform(0.25, 0.32))

    mask = _lesion(img, gen) if lesion else None

    gamma, floor = _SOURCE_PRESETS[source_label]
    img = np.clip(img, 0.0, 1.0) ** gamma
    if floor > 0:
        img = img + gen.normal(0.0, floor, size=img.shape)
    return np.clip(img, 0.0, 1.0), mask


def generate_phantom_set(spec: PhantomSpec) -> ImageSet:
    """Generate the phantom set described by ``spec`` (bit-identical per seed)."""
    if spec.size < 16:
        raise ValueError(f"size must be >= 16 to fit structures, got {spec.size}")
    root = RngStream(spec.seed)

    class_counts = allocate_counts(spec.count, spec.class_mix)
    classes = np.repeat([1, 2, 3], class_counts)
    root.split(0, 0).generator().shuffle(classes)

    source_counts = allocate_counts(spec.count, spec.source_mix)
    sources = np.repeat([0, 1], source_counts)
    root.split(0, 1).generator().shuffle(sources)

    images = []
    for i in range(spec.count):
        pixels, mask = _render_phantom(
            spec.size, int(classes[i]), int(sources[i]), spec.lesion, root.split(1, i))
        images.append(ImageVolume(
            pixels=pixels,
            id=f"ph{spec.seed}-{i:04d}",
            mask=mask,
            class_label=int(classes[i]),
            source_label=int(sources[i]),
        ))
    return ImageSet(images=tuple(images), name=f"phantom-{spec.seed}")


def lesion_mask_stats(image_set: ImageSet) -> list[LesionStats]:
    """Area (pixel count) and centroid (mean row, mean col) of each mask."""
    stats = []
    for img in image_set:
        if img.mask is None:
            raise ValueError(f"image {img.id!r} has no mask")
        coords = np.argwhere(img.mask)
        if coords.shape[0] == 0:
            raise ValueError(f"image {img.id!r} has an empty mask")
        centroid = coords.mean(axis=0)
        stats.append(LesionStats(
            id=img.id,
            area=int(coords.shape[0]),
            centroid=(float(centroid[0]), float(centroid[1])),
        ))
    return stats
