"""Feature extraction, pseudo class probabilities, and embedding file I/O.

The built-in extractors are deterministic handcrafted summaries (no learned
weights): ``global64`` collects image-wide statistics and low-frequency DCT
content, ``spatial48`` keeps a coarse spatial grid so location shifts stay
visible. Deep embeddings enter through the FEMB file format instead.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.fft import dctn

from .core import ClassProbMatrix, FeatureMatrix, ImageSet, RngStream

_FEMB_MAGIC = b"FEMB"
_FEMB_VERSION = 1


class FembFormatError(ValueError):
    """Raised for malformed FEMB files (bad magic, truncation, id mismatch)."""


@dataclass(frozen=True)
class ExtractorSpec:
    """Which extractor produces the features: global64, spatial48, or external."""

    kind: str
    params: dict | None = None

    def __post_init__(self):
        if self.kind not in ("global64", "spatial48", "external"):
            raise ValueError(f"unknown extractor kind {self.kind!r}")
        params = dict(self.params or {})
        if self.kind == "spatial48" and int(params.get("g", 4)) < 2:
            raise ValueError("spatial grid g must be >= 2")
        if self.kind == "external" and "path" not in params:
            raise ValueError("external extractor requires a 'path' param")
        object.__setattr__(self, "params", params)


@dataclass(frozen=True)
class KMeansModel:
    """Fitted k-means centroids with the final within-cluster inertia."""

    centroids: np.ndarray
    k: int
    inertia: float

    def __post_init__(self):
        c = np.ascontiguousarray(self.centroids, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != self.k:
            raise ValueError(f"centroids shape {c.shape} inconsistent with k={self.k}")
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if not np.isfinite(c).all():
            raise ValueError("centroids must be finite")
        if self.inertia < 0:
            raise ValueError("inertia must be non-negative")
        c.flags.writeable = False
        object.__setattr__(self, "centroids", c)

    def assign(self, x: np.ndarray) -> np.ndarray:
        """Index of the nearest centroid per row (ties to the lowest index)."""
        d2 = ((x[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return d2.argmin(axis=1)


# --- handcrafted extractors --------------------------------------------------

_HIST_BINS = 16
_DCT_SIZE = 32
_DCT_COEFFS = 40
_EDGE_THRESHOLD = 0.1


def _area_weights(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) exact box-average weights for 1-D area resampling."""
    w = np.zeros((n_out, n_in))
    scale = n_in / n_out
    for i in range(n_out):
        lo, hi = i * scale, (i + 1) * scale
        j0, j1 = int(np.floor(lo)), int(np.ceil(hi))
        for j in range(j0, min(j1, n_in)):
            w[i, j] = min(hi, j + 1) - max(lo, j)
    return w / scale


def area_resample(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Exact area-average (box filter) resampling to (out_h, out_w)."""
    wr = _area_weights(img.shape[0], out_h)
    wc = _area_weights(img.shape[1], out_w)
    return wr @ img @ wc.T


def zigzag_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/col indices of an n x n grid in JPEG zig-zag order."""
    rows, cols = [], []
    for s in range(2 * n - 1):
        i_range = range(min(s, n - 1), max(0, s - n + 1) - 1, -1)
        if s % 2 == 1:
            i_range = reversed(list(i_range))
        for i in i_range:
            rows.append(i)
            cols.append(s - i)
    return np.array(rows), np.array(cols)


_ZZ_ROWS, _ZZ_COLS = zigzag_indices(_DCT_SIZE)


def _moments(flat: np.ndarray) -> tuple[float, float, float, float]:
    """Population mean/std/skewness/excess kurtosis; higher moments are 0 for
    (near-)constant input by convention."""
    mean = flat.mean()
    centered = flat - mean
    m2 = (centered ** 2).mean()
    if m2 < 1e-24:
        return float(mean), 0.0, 0.0, 0.0
    std = np.sqrt(m2)
    skew = (centered ** 3).mean() / m2 ** 1.5
    kurt = (centered ** 4).mean() / m2 ** 2 - 3.0
    return float(mean), float(std), float(skew), float(kurt)


def _histogram(flat: np.ndarray) -> np.ndarray:
    counts, _ = np.histogram(flat, bins=_HIST_BINS, range=(0.0, 1.0))
    return counts / flat.size


def _entropy_bits(hist: np.ndarray) -> float:
    p = hist[hist > 0]
    return float(-(p * np.log2(p)).sum())


def _global64_row(pixels: np.ndarray) -> np.ndarray:
    flat = pixels.ravel()
    hist = _histogram(flat)
    mean, std, skew, kurt = _moments(flat)

    gy, gx = np.gradient(pixels)
    gmag = np.hypot(gy, gx)
    sx = ndimage.sobel(pixels, axis=1)
    sy = ndimage.sobel(pixels, axis=0)
    edge_density = float((np.hypot(sx, sy) > _EDGE_THRESHOLD).mean())

    # /32 brings the DC term (32 * image mean under ortho norm) onto the same
    # O(1) scale as the other features; kernel metrics assume comparable scales
    small = area_resample(pixels, _DCT_SIZE, _DCT_SIZE)
    coeffs = dctn(small, norm="ortho")[_ZZ_ROWS, _ZZ_COLS][:_DCT_COEFFS] / _DCT_SIZE

    stats = [mean, std, skew, kurt, float(gmag.mean()), float(gmag.std()),
             edge_density, _entropy_bits(hist)]
    return np.concatenate([hist, stats, coeffs])


def extract_global64(image_set: ImageSet) -> FeatureMatrix:
    """64-dim global descriptor per image: 16-bin histogram, 8 statistics,
    and the first 40 zig-zag DCT coefficients of the 32x32 area-downsampled
    image. Deterministic; permuting the set permutes rows identically.
    """
    if len(image_set) == 0:
        raise ValueError("cannot extract features from an empty set")
    rows = np.stack([_global64_row(img.pixels) for img in image_set])
    return FeatureMatrix(values=rows, ids=image_set.ids(), extractor_tag="global64")


def extract_spatial48(image_set: ImageSet, g: int = 4) -> FeatureMatrix:
    """Per-cell (mean, std, gradient-magnitude mean) on a g x g grid; d = 3g^2."""
    if g < 2:
        raise ValueError("grid size g must be >= 2")
    if len(image_set) == 0:
        raise ValueError("cannot extract features from an empty set")
    rows = []
    for img in image_set:
        h, w = img.pixels.shape
        if h < g or w < g:
            raise ValueError(f"image {img.id!r} ({h}x{w}) smaller than {g}x{g} grid")
        gy, gx = np.gradient(img.pixels)
        gmag = np.hypot(gy, gx)
        re = np.arange(g + 1) * h // g
        ce = np.arange(g + 1) * w // g
        feats = []
        for r in range(g):
            for c in range(g):
                cell = img.pixels[re[r]:re[r + 1], ce[c]:ce[c + 1]]
                gcell = gmag[re[r]:re[r + 1], ce[c]:ce[c + 1]]
                feats.extend([cell.mean(), cell.std(), gcell.mean()])
        rows.append(feats)
    return FeatureMatrix(values=np.array(rows), ids=image_set.ids(),
                         extractor_tag=f"spatial48:g{g}")


# --- k-means pseudo-labels ----------------------------------------------------


def canonical_order(values: np.ndarray) -> np.ndarray:
    """Row order keyed by content (lexicographic over columns), so seeded
    subsampling and clustering become invariant to input row permutation."""
    return np.lexsort(np.asarray(values).T[::-1])


def fit_kmeans(features: FeatureMatrix, k: int, rng: RngStream,
               tol: float = 1e-6, max_iter: int = 100) -> KMeansModel:
    """Lloyd's algorithm from k-means++ seeding; deterministic per stream.

    Rows are processed in a content-canonical order so the fit does not
    depend on input row order. Empty clusters are reseeded to the point
    farthest from its assigned centroid.
    """
    x = features.values.astype(np.float64)
    n = x.shape[0]
    if n < k:
        raise ValueError(f"need at least k={k} samples, got {n}")
    x = x[canonical_order(x)]
    gen = rng.generator()

    # k-means++ seeding
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[gen.integers(n)]
    d2 = ((x - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(gen.integers(n))
        else:
            idx = int(gen.choice(n, p=d2 / total))
        centroids[j] = x[idx]
        d2 = np.minimum(d2, ((x - centroids[j]) ** 2).sum(axis=1))

    for _ in range(max_iter):
        dist2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = dist2.argmin(axis=1)
        assigned = dist2[np.arange(n), labels]
        new_centroids = centroids.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new_centroids[j] = x[members].mean(axis=0)
            else:
                far = int(assigned.argmax())
                new_centroids[j] = x[far]
                labels[far] = j
                assigned[far] = 0.0
        shift = np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
        centroids = new_centroids
        if shift < tol:
            break

    dist2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    inertia = float(dist2.min(axis=1).sum())
    return KMeansModel(centroids=centroids, k=k, inertia=inertia)


def pseudo_class_probs(model: KMeansModel, features: FeatureMatrix,
                       temperature: float = 1.0) -> ClassProbMatrix:
    """Softmax over negative squared centroid distances: stand-in classifier
    probabilities for metrics that need p(y|x)."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    x = features.values.astype(np.float64)
    if x.shape[1] != model.centroids.shape[1]:
        raise ValueError(
            f"feature dim {x.shape[1]} does not match centroid dim {model.centroids.shape[1]}")
    d2 = ((x[:, None, :] - model.centroids[None, :, :]) ** 2).sum(axis=2)
    logits = -d2 / temperature
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    return ClassProbMatrix(probs=p, ids=features.ids)


# --- FEMB binary format and CSV alternatives ----------------------------------


def write_femb(fm: FeatureMatrix, path) -> None:
    """Write the FEMB binary format (little-endian):

    magic "FEMB", u16 version=1, u32 n, u32 d, u32 tag_len, tag bytes,
    n*d float32 row-major, then n ids as (u16 length, UTF-8 bytes).
    """
    tag = fm.extractor_tag.encode("utf-8")
    with open(path, "wb") as f:
        f.write(_FEMB_MAGIC)
        f.write(struct.pack("<HIII", _FEMB_VERSION, fm.n, fm.d, len(tag)))
        f.write(tag)
        f.write(fm.values.astype("<f4").tobytes(order="C"))
        for sample_id in fm.ids:
            b = sample_id.encode("utf-8")
            f.write(struct.pack("<H", len(b)))
            f.write(b)


def read_femb(path) -> FeatureMatrix:
    """Read a FEMB file; the round trip through write_femb is bit-exact."""
    data = Path(path).read_bytes()
    if data[:4] != _FEMB_MAGIC:
        raise FembFormatError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 18:
        raise FembFormatError(f"{path}: truncated header")
    version, n, d, tag_len = struct.unpack_from("<HIII", data, 4)
    if version != _FEMB_VERSION:
        raise FembFormatError(f"{path}: unsupported version {version}")
    pos = 18
    if len(data) < pos + tag_len:
        raise FembFormatError(f"{path}: truncated extractor tag")
    tag = data[pos:pos + tag_len].decode("utf-8")
    pos += tag_len
    payload = n * d * 4
    if len(data) < pos + payload:
        raise FembFormatError(f"{path}: truncated value payload "
                              f"(expected {payload} bytes)")
    values = np.frombuffer(data, dtype="<f4", count=n * d, offset=pos).reshape(n, d)
    pos += payload
    ids = []
    for _ in range(n):
        if len(data) < pos + 2:
            raise FembFormatError(f"{path}: id block ended after {len(ids)} of {n} ids")
        (length,) = struct.unpack_from("<H", data, pos)
        pos += 2
        if len(data) < pos + length:
            raise FembFormatError(f"{path}: truncated id entry {len(ids)}")
        ids.append(data[pos:pos + length].decode("utf-8"))
        pos += length
    if pos != len(data):
        raise FembFormatError(f"{path}: {len(data) - pos} trailing bytes after id block")
    return FeatureMatrix(values=values, ids=tuple(ids), extractor_tag=tag)


def write_feature_csv(fm: FeatureMatrix, path) -> None:
    """CSV alternative: header id,f0..f{d-1}; 9 significant digits per value
    (enough to round-trip float32 exactly)."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["id"] + [f"f{j}" for j in range(fm.d)])
        for i, sample_id in enumerate(fm.ids):
            writer.writerow([sample_id] + [format(v, ".9g") for v in fm.values[i]])


def read_feature_csv(path, extractor_tag: str = "csv") -> FeatureMatrix:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if not header or header[0] != "id":
            raise ValueError(f"{path}: expected header starting with 'id'")
        ids, rows = [], []
        for rec in reader:
            ids.append(rec[0])
            rows.append([float(v) for v in rec[1:]])
    return FeatureMatrix(values=np.array(rows, dtype=np.float32),
                         ids=tuple(ids), extractor_tag=extractor_tag)


def write_probs_csv(pm: ClassProbMatrix, path) -> None:
    """ClassProbMatrix CSV: header id,p0..p{k-1}."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["id"] + [f"p{j}" for j in range(pm.k)])
        for i, sample_id in enumerate(pm.ids):
            writer.writerow([sample_id] + [format(v, ".9g") for v in pm.probs[i]])


def read_probs_csv(path) -> ClassProbMatrix:
    """Read a probability CSV; rows are renormalized to absorb the 9-digit
    decimal rounding so the sums-to-one invariant holds exactly."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if not header or header[0] != "id":
            raise ValueError(f"{path}: expected header starting with 'id'")
        ids, rows = [], []
        for rec in reader:
            ids.append(rec[0])
            rows.append([float(v) for v in rec[1:]])
    probs = np.array(rows, dtype=np.float64)
    probs /= probs.sum(axis=1, keepdims=True)
    return ClassProbMatrix(probs=probs, ids=tuple(ids))
