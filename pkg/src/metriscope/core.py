"""Domain types, deterministic randomness, dataset partitioning, and image-set I/O."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

_ID_SAFE = re.compile(r"^[A-Za-z0-9._+-]+$")


def _freeze(a: np.ndarray) -> np.ndarray:
    """Return a C-contiguous read-only view-copy of ``a``."""
    out = np.ascontiguousarray(a)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ImageVolume:
    """One 2-D grayscale slice with optional ROI mask and labels.

    Pixels are unitless intensities in [0, 1]. The mask, when present, marks
    the region of interest (1 = inside) and must match the pixel grid shape.
    """

    pixels: np.ndarray
    id: str
    mask: np.ndarray | None = None
    class_label: int | None = None
    source_label: int | None = None

    def __post_init__(self):
        px = _freeze(np.asarray(self.pixels, dtype=np.float64))
        if px.ndim != 2 or px.size == 0:
            raise ValueError(f"pixels must be a non-empty 2-D grid, got shape {px.shape}")
        if not np.isfinite(px).all():
            raise ValueError(f"image {self.id!r} has non-finite pixels")
        if px.min() < 0.0 or px.max() > 1.0:
            raise ValueError(f"image {self.id!r} has intensities outside [0, 1]")
        object.__setattr__(self, "pixels", px)
        if self.mask is not None:
            m = _freeze(np.asarray(self.mask, dtype=bool))
            if m.shape != px.shape:
                raise ValueError(
                    f"mask shape {m.shape} does not match pixels {px.shape} for image {self.id!r}"
                )
            object.__setattr__(self, "mask", m)
        if not self.id:
            raise ValueError("image id must be a non-empty string")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class ImageSet:
    """Ordered, immutable collection of images with unique ids."""

    images: tuple[ImageVolume, ...]
    name: str

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(self.images))
        ids = [img.id for img in self.images]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate image ids in set {self.name!r}: {dupes[:5]}")

    def __len__(self) -> int:
        return len(self.images)

    def __iter__(self):
        return iter(self.images)

    def ids(self) -> tuple[str, ...]:
        return tuple(img.id for img in self.images)


@dataclass(frozen=True)
class FeatureMatrix:
    """n x d embedding matrix with row-aligned ids.

    Values are stored as float32 so that FEMB file round trips are bit-exact;
    metric code promotes to float64 internally.
    """

    values: np.ndarray
    ids: tuple[str, ...]
    extractor_tag: str

    def __post_init__(self):
        v = _freeze(np.asarray(self.values, dtype=np.float32))
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"feature matrix must be 2-D with n,d >= 1, got {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("feature matrix contains non-finite entries")
        object.__setattr__(self, "values", v)
        ids = tuple(self.ids)
        if len(ids) != v.shape[0]:
            raise ValueError(f"{len(ids)} ids for {v.shape[0]} rows")
        if len(set(ids)) != len(ids):
            raise ValueError("feature matrix ids must be unique")
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ClassProbMatrix:
    """n x k matrix of per-sample class probabilities (rows sum to 1)."""

    probs: np.ndarray
    ids: tuple[str, ...]

    def __post_init__(self):
        p = _freeze(np.asarray(self.probs, dtype=np.float64))
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError(f"probability matrix must be 2-D with n,k >= 1, got {p.shape}")
        if not np.isfinite(p).all() or (p < 0).any():
            raise ValueError("class probabilities must be finite and non-negative")
        row_sums = p.sum(axis=1)
        if np.abs(row_sums - 1.0).max() > 1e-9:
            worst = int(np.abs(row_sums - 1.0).argmax())
            raise ValueError(f"probability row {worst} sums to {row_sums[worst]!r}, not 1")
        object.__setattr__(self, "probs", p)
        ids = tuple(self.ids)
        if len(ids) != p.shape[0] or len(set(ids)) != len(ids):
            raise ValueError("ids must be unique and row-aligned")
        object.__setattr__(self, "ids", ids)

    @property
    def k(self) -> int:
        return self.probs.shape[1]


@dataclass(frozen=True)
class RngStream:
    """Counter-based splittable random stream addressed by (seed, path).

    Identical (seed, path) pairs always reproduce the same draw sequence;
    distinct paths yield statistically independent streams, so work can be
    fanned out across images/metrics without perturbing determinism.
    """

    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        path = tuple(int(p) for p in self.path)
        if any(p < 0 for p in path):
            raise ValueError("path entries must be non-negative")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "path", path)

    def split(self, *indices: int) -> "RngStream":
        """Derive an independent child stream at ``path + indices``."""
        return RngStream(self.seed, self.path + tuple(int(i) for i in indices))

    def generator(self) -> np.random.Generator:
        """Fresh generator for this stream; repeated calls restart the sequence."""
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))


def allocate_counts(total: int, fractions) -> list[int]:
    """Integer allocation of ``total`` by ``fractions``: floors, remainder to
    the first-listed largest fraction."""
    fr = [float(f) for f in fractions]
    if any(f < 0 for f in fr):
        raise ValueError(f"negative fraction in {fr}")
    if abs(sum(fr) - 1.0) > 1e-9:
        raise ValueError(f"fractions sum to {sum(fr)!r}, expected 1")
    # +1e-9 guards against 0.30*100 -> 29.999... style float droop
    counts = [int(np.floor(f * total + 1e-9)) for f in fr]
    counts[int(np.argmax(fr))] += total - sum(counts)
    return counts


def partition_dataset(image_set: ImageSet, fractions, rng: RngStream) -> list[ImageSet]:
    """Random disjoint split of an image set into len(fractions) parts.

    Part sizes follow :func:`allocate_counts`; membership is a seeded shuffle,
    so reruns with the same stream reproduce the same parts.
    """
    if len(image_set) == 0:
        raise ValueError("cannot partition an empty set")
    counts = allocate_counts(len(image_set), fractions)
    order = rng.generator().permutation(len(image_set))
    parts = []
    start = 0
    for i, c in enumerate(counts):
        idx = sorted(order[start:start + c])
        parts.append(ImageSet(
            images=tuple(image_set.images[j] for j in idx),
            name=f"{image_set.name}/part{i}",
        ))
        start += c
    return parts


def rescale_unit(pixels: np.ndarray) -> np.ndarray:
    """Affine rescale of an array so min -> 0 and max -> 1; constant -> zeros."""
    pixels = np.asarray(pixels, dtype=np.float64)
    lo = pixels.min()
    span = pixels.max() - lo
    if span <= 0.0:
        return np.zeros_like(pixels)
    return (pixels - lo) / span


def normalize_intensity(img: ImageVolume) -> ImageVolume:
    """Min-max normalize one image; mask and labels are preserved."""
    return replace(img, pixels=rescale_unit(img.pixels))


# --- PGM (P5, maxval 65535) + sidecar-JSON set format -----------------------

_PGM_MAXVAL = 65535


def write_pgm(path, pixels: np.ndarray) -> None:
    """Write a [0,1] float image as 16-bit big-endian binary PGM."""
    px = np.asarray(pixels, dtype=np.float64)
    q = np.rint(px * _PGM_MAXVAL).astype(">u2")
    h, w = px.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n{_PGM_MAXVAL}\n".encode("ascii"))
        f.write(q.tobytes(order="C"))


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM into a [0,1] float image (8- or 16-bit samples)."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    # header = magic, width, height, maxval as whitespace-separated tokens,
    # with optional '#' comment lines
    tokens, pos = [], 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(t) for t in tokens)
    if maxval <= 0 or maxval > 65535:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    dtype = ">u2" if maxval > 255 else "u1"
    raw = np.frombuffer(data, dtype=dtype, count=h * w, offset=pos)
    if raw.size != h * w:
        raise ValueError(f"{path}: truncated pixel payload")
    return raw.reshape(h, w).astype(np.float64) / maxval


def write_image_set(image_set: ImageSet, directory) -> Path:
    """Write a set as one PGM per image (plus mask PGMs) and a sidecar JSON.

    Image ids must be filename-safe; pixel files are ``<id>.pgm`` next to the
    sidecar, masks are ``<id>_mask.pgm``.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for img in image_set:
        if not _ID_SAFE.match(img.id):
            raise ValueError(f"id {img.id!r} is not filename-safe")
        write_pgm(directory / f"{img.id}.pgm", img.pixels)
        mask_path = None
        if img.mask is not None:
            mask_path = f"{img.id}_mask.pgm"
            write_pgm(directory / mask_path, img.mask.astype(np.float64))
        entries.append({
            "id": img.id,
            "mask": mask_path,
            "class_label": img.class_label,
            "source_label": img.source_label,
        })
    sidecar = directory / "set.json"
    with open(sidecar, "w") as f:
        json.dump({"name": image_set.name, "images": entries}, f, indent=1)
        f.write("\n")
    return sidecar


def read_image_set(path) -> ImageSet:
    """Read a set from a directory containing ``set.json`` (or the JSON itself)."""
    path = Path(path)
    sidecar = path / "set.json" if path.is_dir() else path
    with open(sidecar) as f:
        doc = json.load(f)
    base = sidecar.parent
    images = []
    for entry in doc["images"]:
        pixels = read_pgm(base / f"{entry['id']}.pgm")
        mask = None
        if entry.get("mask"):
            mask = read_pgm(base / entry["mask"]) > 0.5
        images.append(ImageVolume(
            pixels=pixels,
            id=entry["id"],
            mask=mask,
            class_label=entry.get("class_label"),
            source_label=entry.get("source_label"),
        ))
    return ImageSet(images=tuple(images), name=doc.get("name", base.name))
