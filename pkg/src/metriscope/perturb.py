"""Controlled perturbations: noise injection, morphological manipulation in
masked regions, and distribution-shift resampling.

Each transform maps an ImageSet to a new ImageSet deterministically (given
the spec's seed) and leaves everything outside its declared region or null
level bit-identical.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import distance_transform_edt, gaussian_filter

from .core import ImageSet, RngStream, allocate_counts, rescale_unit

log = logging.getLogger(__name__)

NOISE_KINDS = ("gaussian", "rician", "poisson")
MORPH_KINDS = ("boundary_blur", "radial_gradient")
RESAMPLE_KINDS = ("external_dup", "internal_dup",
                  "class_proportions", "source_proportions")
INVENTION_KIND = "contrast_invention"


@dataclass(frozen=True)
class NoiseSpec:
    """Noise model and level; for poisson the level maps to rate 1/sigma^2."""

    kind: str
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class MorphSpec:
    """Morphological manipulation confined to the mask region."""

    kind: str
    sigma_level: float
    band_width: int = 3
    amplitude_map: dict = field(default_factory=lambda: {1: 0.1, 2: 0.2, 3: 0.3})

    def __post_init__(self):
        if self.kind not in MORPH_KINDS:
            raise ValueError(f"unknown morph kind {self.kind!r}")
        if self.sigma_level <= 0:
            raise ValueError(f"sigma_level must be > 0, got {self.sigma_level}")
        if self.band_width < 1:
            raise ValueError(f"band_width must be >= 1, got {self.band_width}")
        object.__setattr__(self, "amplitude_map", dict(self.amplitude_map))


@dataclass(frozen=True)
class ResampleSpec:
    """Composition change: duplication (rate) or label re-proportioning (targets)."""

    kind: str
    rate: float | None = None
    targets: dict | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in RESAMPLE_KINDS:
            raise ValueError(f"unknown resample kind {self.kind!r}")
        if self.kind.endswith("_dup"):
            if self.rate is None or not 0.0 <= self.rate <= 1.0:
                raise ValueError(f"duplication rate must be in [0,1], got {self.rate}")
        else:
            if not self.targets:
                raise ValueError(f"{self.kind} requires a label->proportion map")
            targets = {int(k): float(v) for k, v in self.targets.items()}
            if any(v < 0 for v in targets.values()):
                raise ValueError("target proportions must be non-negative")
            if abs(sum(targets.values()) - 1.0) > 1e-9:
                raise ValueError(f"target proportions sum to {sum(targets.values())!r}")
            object.__setattr__(self, "targets", targets)


@dataclass(frozen=True)
class InventionSpec:
    """Contrast-mode invention: opposing scale factors on two percentile bands."""

    sigma: float
    gm_band: tuple[float, float] = (40.0, 70.0)
    wm_band: tuple[float, float] = (70.0, 95.0)
    smooth_sigma: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.sigma < 1.0:
            raise ValueError(f"sigma must be in [0,1), got {self.sigma}")
        g0, g1 = self.gm_band
        w0, w1 = self.wm_band
        if not (g0 < g1 <= w0 < w1):
            raise ValueError("bands must be ordered and non-overlapping")
        if self.smooth_sigma < 0:
            raise ValueError("smooth_sigma must be >= 0")


# --- noise --------------------------------------------------------------------


def _noise_op(image_set: ImageSet, spec: NoiseSpec, per_image) -> ImageSet:
    root = RngStream(spec.seed)
    images = tuple(
        replace(img, pixels=per_image(img.pixels, root.split(i).generator()))
        for i, img in enumerate(image_set))
    return ImageSet(images=images, name=f"{image_set.name}+{spec.kind}({spec.sigma:g})")


def add_gaussian_noise(image_set: ImageSet, spec: NoiseSpec) -> ImageSet:
    """Additive zero-mean Gaussian noise, clamped to [0,1]."""
    if spec.kind != "gaussian":
        raise ValueError(f"expected gaussian spec, got {spec.kind!r}")
    if spec.sigma == 0:
        return _rename(image_set, f"{image_set.name}+gaussian(0)")
    return _noise_op(image_set, spec, lambda px, g: np.clip(
        px + g.normal(0.0, spec.sigma, size=px.shape), 0.0, 1.0))


def add_rician_noise(image_set: ImageSet, spec: NoiseSpec) -> ImageSet:
    """Magnitude-MRI noise: sqrt((I + n1)^2 + n2^2) with independent Gaussian
    components n1, n2 ~ N(0, sigma^2), clamped to [0,1]."""
    if spec.kind != "rician":
        raise ValueError(f"expected rician spec, got {spec.kind!r}")
    if spec.sigma == 0:
        return _rename(image_set, f"{image_set.name}+rician(0)")

    def rician(px, g):
        n1 = g.normal(0.0, spec.sigma, size=px.shape)
        n2 = g.normal(0.0, spec.sigma, size=px.shape)
        return np.clip(np.sqrt((px + n1) ** 2 + n2 ** 2), 0.0, 1.0)

    return _noise_op(image_set, spec, rician)


def add_poisson_noise(image_set: ImageSet, spec: NoiseSpec) -> ImageSet:
    """Intensity-dependent counting noise at rate lambda = 1/sigma^2:
    I' = Poisson(I * lambda) / lambda, clamped to [0,1]."""
    if spec.kind != "poisson":
        raise ValueError(f"expected poisson spec, got {spec.kind!r}")
    if spec.sigma == 0:
        log.warning("poisson noise with sigma=0 has no defined rate; "
                    "returning the input unchanged")
        return _rename(image_set, f"{image_set.name}+poisson(0)")
    lam = 1.0 / spec.sigma ** 2
    return _noise_op(image_set, spec, lambda px, g: np.clip(
        g.poisson(px * lam) / lam, 0.0, 1.0))


def _rename(image_set: ImageSet, name: str) -> ImageSet:
    return ImageSet(images=image_set.images, name=name)


# --- morphological manipulation --------------------------------------------------


def _renormalized_blur(pixels: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian blur truncated at 3 sigma with border renormalization (the
    kernel is re-weighted over its in-image support)."""
    blurred = gaussian_filter(pixels, sigma=sigma, truncate=3.0,
                              mode="constant", cval=0.0)
    weight = gaussian_filter(np.ones_like(pixels), sigma=sigma, truncate=3.0,
                             mode="constant", cval=0.0)
    return blurred / weight


def blur_tumour_boundary(image_set: ImageSet, spec: MorphSpec) -> ImageSet:
    """Blur only the mask's boundary band: interior pixels whose Euclidean
    distance to the mask edge is <= band_width take the blurred value, every
    other pixel stays bit-identical."""
    if spec.kind != "boundary_blur":
        raise ValueError(f"expected boundary_blur spec, got {spec.kind!r}")
    images = []
    for img in image_set:
        if img.mask is None or not img.mask.any():
            raise ValueError(f"image {img.id!r} lacks a non-empty mask")
        depth = distance_transform_edt(img.mask)
        band = img.mask & (depth <= spec.band_width)
        if not band.any():
            images.append(img)
            continue
        blurred = _renormalized_blur(img.pixels, spec.sigma_level)
        out = np.where(band, np.clip(blurred, 0.0, 1.0), img.pixels)
        images.append(replace(img, pixels=out))
    return ImageSet(images=tuple(images),
                    name=f"{image_set.name}+boundary_blur({spec.sigma_level:g})")


def apply_radial_gradient(image_set: ImageSet, spec: MorphSpec) -> ImageSet:
    """Sinusoidal multiplicative intensity modulation inside the mask, keyed
    to distance from the mask centroid: I * (1 + a*sin(2*pi*d/R))."""
    if spec.kind != "radial_gradient":
        raise ValueError(f"expected radial_gradient spec, got {spec.kind!r}")
    try:
        amplitude = float(spec.amplitude_map[spec.sigma_level])
    except KeyError:
        raise ValueError(f"sigma_level {spec.sigma_level!r} not in amplitude map "
                         f"{sorted(spec.amplitude_map)}") from None
    images = []
    for img in image_set:
        if img.mask is None or not img.mask.any():
            raise ValueError(f"image {img.id!r} lacks a non-empty mask")
        coords = np.argwhere(img.mask)
        centre = coords.mean(axis=0)
        dist = np.sqrt(((coords - centre) ** 2).sum(axis=1))
        radius = dist.max()
        if radius == 0.0:
            log.warning("single-pixel mask in %s: radial gradient is the identity",
                        img.id)
            images.append(img)
            continue
        out = img.pixels.copy()
        rows, cols = coords[:, 0], coords[:, 1]
        modulated = out[rows, cols] * (1.0 + amplitude * np.sin(2.0 * np.pi * dist / radius))
        out[rows, cols] = np.clip(modulated, 0.0, 1.0)
        images.append(replace(img, pixels=out))
    return ImageSet(images=tuple(images),
                    name=f"{image_set.name}+radial_gradient({spec.sigma_level:g})")


# --- distribution shift ------------------------------------------------------------


def _dup_count(rate: float, n: int) -> int:
    return int(np.floor(rate * n + 1e-9))


def duplicate_external(candidate: ImageSet, reference: ImageSet,
                       spec: ResampleSpec) -> ImageSet:
    """Replace floor(rate*n) candidate slots with exact copies of reference
    images (training-leakage simulation). Copied images take suffixed ids so
    the uniqueness invariant holds."""
    if spec.kind != "external_dup":
        raise ValueError(f"expected external_dup spec, got {spec.kind!r}")
    n = len(candidate)
    count = _dup_count(spec.rate, n)
    name = f"{candidate.name}+external_dup({spec.rate:g})"
    if count == 0:
        return _rename(candidate, name)
    if len(reference) == 0:
        raise ValueError("cannot duplicate from an empty reference set")
    gen = RngStream(spec.seed).generator()
    slots = gen.choice(n, size=count, replace=False)
    picks = gen.integers(0, len(reference), size=count)
    images = list(candidate.images)
    for slot, pick in zip(slots, picks):
        src = reference.images[pick]
        images[slot] = replace(src, id=f"{src.id}__x{slot}")
    return ImageSet(images=tuple(images), name=name)


def duplicate_internal(candidate: ImageSet, spec: ResampleSpec) -> ImageSet:
    """Replace floor(rate*n) slots with copies of uniformly chosen surviving
    members (within-set repetition)."""
    if spec.kind != "internal_dup":
        raise ValueError(f"expected internal_dup spec, got {spec.kind!r}")
    n = len(candidate)
    count = _dup_count(spec.rate, n)
    name = f"{candidate.name}+internal_dup({spec.rate:g})"
    if spec.rate > 0 and n < 2:
        raise ValueError("internal duplication needs at least 2 images")
    if count == 0:
        return _rename(candidate, name)
    if count >= n:
        raise ValueError(f"rate {spec.rate} leaves no surviving member")
    gen = RngStream(spec.seed).generator()
    slots = gen.choice(n, size=count, replace=False)
    survivors = np.setdiff1d(np.arange(n), slots)
    picks = survivors[gen.integers(0, len(survivors), size=count)]
    images = list(candidate.images)
    for slot, pick in zip(slots, picks):
        src = candidate.images[pick]
        images[slot] = replace(src, id=f"{src.id}__i{slot}")
    return ImageSet(images=tuple(images), name=name)


def resample_proportions(image_set: ImageSet, spec: ResampleSpec) -> ImageSet:
    """Recompose the set so per-label counts follow the target proportions
    (size unchanged). Labels with target 0 (or unlisted) are dropped; labels
    whose target exceeds the available count are sampled with replacement."""
    if spec.kind not in ("class_proportions", "source_proportions"):
        raise ValueError(f"expected a proportion spec, got {spec.kind!r}")
    attr = "class_label" if spec.kind == "class_proportions" else "source_label"
    pools: dict[int, list[int]] = {}
    for i, img in enumerate(image_set):
        label = getattr(img, attr)
        if label is not None:
            pools.setdefault(int(label), []).append(i)
    missing = [lab for lab in spec.targets if lab not in pools]
    if missing:
        raise ValueError(f"target labels {missing} not present in set "
                         f"{image_set.name!r} ({attr})")

    labels = list(spec.targets)
    counts = allocate_counts(len(image_set), [spec.targets[lab] for lab in labels])
    gen = RngStream(spec.seed).generator()
    images = []
    used_ids = set()
    for lab, want in zip(labels, counts):
        pool = pools[lab]
        if want <= len(pool):
            chosen = sorted(gen.choice(len(pool), size=want, replace=False))
        else:
            chosen = sorted(gen.integers(0, len(pool), size=want))
        for j, idx in enumerate(chosen):
            img = image_set.images[pool[idx]]
            if img.id in used_ids:
                img = replace(img, id=f"{img.id}__r{len(images)}")
            used_ids.add(img.id)
            images.append(img)
    targets_txt = ",".join(f"{lab}:{spec.targets[lab]:g}" for lab in labels)
    return ImageSet(images=tuple(images),
                    name=f"{image_set.name}+{spec.kind}({targets_txt})")


# --- mode invention -----------------------------------------------------------------


def invent_contrast_mode(image_set: ImageSet, spec: InventionSpec) -> ImageSet:
    """Opposing contrast scaling of two percentile bands (grey-matter band up,
    white-matter band down with mass-preserving factor), then Gaussian
    smoothing and min-max normalization."""
    images = []
    for img in image_set:
        if spec.sigma == 0.0 and spec.smooth_sigma == 0.0:
            images.append(img)
            continue
        px = img.pixels.astype(np.float64)
        out = px.copy()
        if spec.sigma > 0:
            g_lo, g_hi = np.percentile(px, spec.gm_band)
            w_lo, w_hi = np.percentile(px, spec.wm_band)
            gm = (px >= g_lo) & (px < g_hi)
            wm = (px >= w_lo) & (px < w_hi)
            gm_mass = px[gm].sum() if gm.any() else 0.0
            wm_mass = px[wm].sum() if wm.any() else 0.0
            if gm_mass <= 0.0 or wm_mass <= 0.0:
                log.warning("degenerate histogram in %s: contrast invention "
                            "is the identity", img.id)
                images.append(img)
                continue
            # scale WM down by exactly the mass added to GM
            out[gm] = px[gm] * (1.0 + spec.sigma)
            out[wm] = px[wm] * (1.0 - spec.sigma * gm_mass / wm_mass)
            out = np.clip(out, 0.0, 1.0)
        if spec.smooth_sigma > 0:
            out = _renormalized_blur(out, spec.smooth_sigma)
        images.append(replace(img, pixels=rescale_unit(out)))
    return ImageSet(images=tuple(images),
                    name=f"{image_set.name}+contrast_invention({spec.sigma:g})")


# --- declarative spec parsing and dispatch ---------------------------------------------


PerturbationSpec = NoiseSpec | MorphSpec | ResampleSpec | InventionSpec


def parse_perturbation(obj: dict) -> PerturbationSpec:
    """Parse one {"kind", "params", "seed"} JSON object into a spec."""
    kind = obj.get("kind")
    params = dict(obj.get("params", {}))
    seed = int(obj.get("seed", 0))
    if kind in NOISE_KINDS:
        return NoiseSpec(kind=kind, sigma=float(params["sigma"]), seed=seed)
    if kind == "boundary_blur":
        return MorphSpec(kind=kind, sigma_level=float(params["sigma_level"]),
                         band_width=int(params.get("band_width", 3)))
    if kind == "radial_gradient":
        amap = params.get("amplitude_map")
        kwargs = {}
        if amap is not None:
            kwargs["amplitude_map"] = {float(k): float(v) for k, v in amap.items()}
        return MorphSpec(kind=kind, sigma_level=float(params["sigma_level"]), **kwargs)
    if kind in ("external_dup", "internal_dup"):
        return ResampleSpec(kind=kind, rate=float(params["rate"]), seed=seed)
    if kind in ("class_proportions", "source_proportions"):
        targets = {int(k): float(v) for k, v in params["targets"].items()}
        return ResampleSpec(kind=kind, targets=targets, seed=seed)
    if kind == INVENTION_KIND:
        kwargs = {"sigma": float(params["sigma"])}
        for key in ("gm_band", "wm_band"):
            if key in params:
                kwargs[key] = tuple(float(v) for v in params[key])
        if "smooth_sigma" in params:
            kwargs["smooth_sigma"] = float(params["smooth_sigma"])
        return InventionSpec(**kwargs)
    raise ValueError(f"unknown perturbation kind {kind!r}")


def perturbation_to_dict(spec: PerturbationSpec) -> dict:
    if isinstance(spec, NoiseSpec):
        return {"kind": spec.kind, "params": {"sigma": spec.sigma}, "seed": spec.seed}
    if isinstance(spec, MorphSpec):
        params = {"sigma_level": spec.sigma_level}
        if spec.kind == "boundary_blur":
            params["band_width"] = spec.band_width
        else:
            params["amplitude_map"] = {str(k): v for k, v in spec.amplitude_map.items()}
        return {"kind": spec.kind, "params": params, "seed": 0}
    if isinstance(spec, ResampleSpec):
        params = ({"rate": spec.rate} if spec.kind.endswith("_dup")
                  else {"targets": {str(k): v for k, v in spec.targets.items()}})
        return {"kind": spec.kind, "params": params, "seed": spec.seed}
    if isinstance(spec, InventionSpec):
        return {"kind": INVENTION_KIND,
                "params": {"sigma": spec.sigma, "gm_band": list(spec.gm_band),
                           "wm_band": list(spec.wm_band),
                           "smooth_sigma": spec.smooth_sigma},
                "seed": 0}
    raise TypeError(f"not a perturbation spec: {spec!r}")


def spec_label(spec: PerturbationSpec) -> str:
    """Short condition label used for report and heatmap column names."""
    if isinstance(spec, NoiseSpec):
        return f"{spec.kind}_s{spec.sigma:g}"
    if isinstance(spec, MorphSpec):
        return f"{spec.kind}_s{spec.sigma_level:g}"
    if isinstance(spec, ResampleSpec):
        if spec.kind.endswith("_dup"):
            return f"{spec.kind}_{100 * spec.rate:g}pct"
        parts = "-".join(f"{v:g}" for v in spec.targets.values())
        return f"{spec.kind}_{parts}"
    return f"contrast_invention_s{spec.sigma:g}"


def load_sweep(path) -> list[PerturbationSpec]:
    """Load a JSON list of perturbation specs."""
    with open(path) as f:
        doc = json.load(f)
    if not isinstance(doc, list):
        raise ValueError(f"{path}: sweep file must contain a JSON list")
    return [parse_perturbation(obj) for obj in doc]


def apply_perturbation(image_set: ImageSet, spec: PerturbationSpec,
                       reference: ImageSet | None = None) -> ImageSet:
    """Dispatch a parsed spec to its transform; external duplication requires
    the reference set."""
    if isinstance(spec, NoiseSpec):
        op = {"gaussian": add_gaussian_noise, "rician": add_rician_noise,
              "poisson": add_poisson_noise}[spec.kind]
        return op(image_set, spec)
    if isinstance(spec, MorphSpec):
        op = {"boundary_blur": blur_tumour_boundary,
              "radial_gradient": apply_radial_gradient}[spec.kind]
        return op(image_set, spec)
    if isinstance(spec, ResampleSpec):
        if spec.kind == "external_dup":
            if reference is None:
                raise ValueError("external_dup requires a reference set")
            return duplicate_external(image_set, reference, spec)
        if spec.kind == "internal_dup":
            return duplicate_internal(image_set, spec)
        return resample_proportions(image_set, spec)
    if isinstance(spec, InventionSpec):
        return invent_contrast_mode(image_set, spec)
    raise TypeError(f"not a perturbation spec: {spec!r}")
