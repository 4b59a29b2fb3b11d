"""Upstream no-reference quality metrics over feature embeddings.

Every metric here is a pure function of FeatureMatrix (and ClassProbMatrix)
inputs. Estimators that subsample (kid, fd_inf, ct_score) draw indices
against a content-canonical row order, so all metrics are invariant under
simultaneous identical row permutation of their inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial.distance import cdist, pdist
from scipy.stats import rankdata

from .core import ClassProbMatrix, FeatureMatrix, RngStream
from .featstore import canonical_order, fit_kmeans, pseudo_class_probs

_REALISM_CAP = 1e6


class MetricError(RuntimeError):
    """Numeric failure inside a named metric."""

    def __init__(self, metric: str, message: str):
        super().__init__(f"{metric}: {message}")
        self.metric = metric


class MissingInputError(ValueError):
    """An enabled metric lacks a required input artifact."""

    def __init__(self, metric: str, artifact: str):
        super().__init__(f"metric {metric!r} requires missing input {artifact!r}")
        self.metric = metric
        self.artifact = artifact


def _values64(fm: FeatureMatrix) -> np.ndarray:
    return fm.values.astype(np.float64)


# --- shared numerical kernels -------------------------------------------------


@dataclass(frozen=True)
class GaussianMoments:
    """Mean vector and covariance matrix of a feature sample."""

    mu: np.ndarray
    sigma: np.ndarray
    n: int

    def __post_init__(self):
        mu = np.ascontiguousarray(self.mu, dtype=np.float64).reshape(-1)
        sigma = np.ascontiguousarray(self.sigma, dtype=np.float64)
        if sigma.shape != (mu.size, mu.size):
            raise ValueError(f"sigma shape {sigma.shape} does not match mu dim {mu.size}")
        if np.abs(sigma - sigma.T).max() > 1e-9:
            raise ValueError("sigma must be symmetric within 1e-9")
        if mu.size and np.linalg.eigvalsh(sigma).min() < -1e-8:
            raise ValueError("sigma has eigenvalues below -1e-8")
        mu.flags.writeable = False
        sigma.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def d(self) -> int:
        return self.mu.size


def moments(fm: FeatureMatrix) -> GaussianMoments:
    """Sample mean and covariance (ddof=1; zero matrix for n=1)."""
    x = _values64(fm)
    mu = x.mean(axis=0)
    if x.shape[0] > 1:
        sigma = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    else:
        sigma = np.zeros((x.shape[1], x.shape[1]))
    return GaussianMoments(mu=mu, sigma=sigma, n=x.shape[0])


def matrix_sqrt_psd(a: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition (eigenvalues clamped
    at zero); S satisfies S @ S ~= a."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if np.abs(a - a.T).max() > 1e-9:
        raise ValueError("matrix is not symmetric within 1e-9")
    w, v = np.linalg.eigh((a + a.T) / 2.0)
    s = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    return (s + s.T) / 2.0


def _regularize(sigma: np.ndarray) -> np.ndarray:
    """Add eps*I (eps = 1e-6 * trace/d) when the smallest eigenvalue < 1e-10."""
    d = sigma.shape[0]
    if np.linalg.eigvalsh(sigma).min() < 1e-10:
        eps = 1e-6 * np.trace(sigma) / d
        sigma = sigma + eps * np.eye(d)
    return sigma


@dataclass(frozen=True)
class KernelMatrix:
    """Symmetric self-similarity matrix of one sample under a named kernel."""

    values: np.ndarray
    kernel_tag: str

    def __post_init__(self):
        if self.kernel_tag not in ("poly3", "rbf", "cosine"):
            raise ValueError(f"unknown kernel tag {self.kernel_tag!r}")
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"kernel matrix must be square, got {v.shape}")
        if np.abs(v - v.T).max() > 1e-9:
            raise ValueError("kernel matrix must be symmetric")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class ManifoldIndex:
    """kNN ball radii (self excluded) used by the manifold metrics."""

    points: FeatureMatrix
    k: int
    radii: np.ndarray

    def __post_init__(self):
        r = np.ascontiguousarray(self.radii, dtype=np.float64)
        if self.k >= self.points.n:
            raise ValueError(f"k={self.k} must be < n={self.points.n}")
        if r.shape != (self.points.n,) or (r < 0).any():
            raise ValueError("radii must be one non-negative value per point")
        r.flags.writeable = False
        object.__setattr__(self, "radii", r)


def manifold_index(fm: FeatureMatrix, k: int) -> ManifoldIndex:
    """Distance to the k-th nearest neighbour per point, excluding self."""
    if k < 1 or k >= fm.n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={fm.n}")
    d = cdist(_values64(fm), _values64(fm))
    np.fill_diagonal(d, np.inf)
    radii = np.partition(d, k - 1, axis=1)[:, k - 1]
    return ManifoldIndex(points=fm, k=k, radii=radii)


@dataclass(frozen=True)
class ProjectionSet:
    """Unit projection directions for sliced-distance estimators."""

    directions: np.ndarray
    stream: RngStream

    def __post_init__(self):
        d = np.ascontiguousarray(self.directions, dtype=np.float64)
        norms = np.sqrt((d ** 2).sum(axis=1))
        if np.abs(norms - 1.0).max() > 1e-9:
            raise ValueError("direction rows must have unit L2 norm")
        d.flags.writeable = False
        object.__setattr__(self, "directions", d)


def sample_projections(dim: int, count: int, rng: RngStream) -> ProjectionSet:
    gen = rng.generator()
    dirs = gen.standard_normal((count, dim))
    norms = np.sqrt((dirs ** 2).sum(axis=1, keepdims=True))
    # a zero draw is measure-zero; fall back to the first basis vector
    degenerate = norms[:, 0] == 0
    if degenerate.any():
        dirs[degenerate] = 0.0
        dirs[degenerate, 0] = 1.0
        norms = np.sqrt((dirs ** 2).sum(axis=1, keepdims=True))
    return ProjectionSet(directions=dirs / norms, stream=rng)


# --- distribution distance metrics ---------------------------------------------


def fid(real: GaussianMoments, gen: GaussianMoments) -> float:
    """Frechet distance between Gaussians fitted to the two feature samples:
    ||mu_r - mu_g||^2 + Tr(S_r + S_g - 2 (S_r S_g)^{1/2}).

    The cross term is computed on the symmetrized product
    S_r^{1/2} S_g S_r^{1/2} so the square root stays real PSD. Covariances
    whose smallest eigenvalue is below 1e-10 get +eps*I, eps = 1e-6*trace/d.
    """
    if real.d != gen.d:
        raise ValueError(f"dimension mismatch: {real.d} vs {gen.d}")
    sr = _regularize(real.sigma)
    sg = _regularize(gen.sigma)
    sqrt_r = matrix_sqrt_psd(sr)
    inner = sqrt_r @ sg @ sqrt_r
    cross = matrix_sqrt_psd((inner + inner.T) / 2.0)
    diff = real.mu - gen.mu
    traces = float(np.trace(sr) + np.trace(sg))
    value = float(diff @ diff + traces - 2.0 * np.trace(cross))
    if value < 0:
        # matched moments land at 0 up to eigensolver noise, which grows with
        # the covariance scale; clamp inside that window, fail loudly beyond
        if value < -(1e-8 + 1e-7 * traces):
            raise MetricError("fid", f"negative distance {value} beyond tolerance")
        value = 0.0
    return value


def fid_from_features(real: FeatureMatrix, gen: FeatureMatrix) -> float:
    return fid(moments(real), moments(gen))


def sfid(real_spatial: FeatureMatrix, gen_spatial: FeatureMatrix) -> float:
    """fid applied to spatially-preserved (grid) features."""
    if real_spatial.d != gen_spatial.d:
        raise ValueError(
            f"dimension mismatch: {real_spatial.d} vs {gen_spatial.d}")
    return fid(moments(real_spatial), moments(gen_spatial))


def poly3_kernel(x: np.ndarray) -> KernelMatrix:
    return KernelMatrix(values=_poly3(x, x), kernel_tag="poly3")


def _poly3(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = x.shape[1]
    return (x @ y.T / d + 1.0) ** 3


def _mmd2_unbiased(kxx: np.ndarray, kyy: np.ndarray, kxy: np.ndarray) -> float:
    nx = kxx.shape[0]
    ny = kyy.shape[0]
    sum_xx = (kxx.sum() - np.trace(kxx)) / (nx * (nx - 1))
    sum_yy = (kyy.sum() - np.trace(kyy)) / (ny * (ny - 1))
    return float(sum_xx + sum_yy - 2.0 * kxy.mean())


def kid(real: FeatureMatrix, gen: FeatureMatrix, subset_size: int | None = None,
        num_subsets: int = 100, rng: RngStream | None = None) -> tuple[float, float]:
    """Kernel distance: unbiased MMD^2 with k(x,y) = (x.y/d + 1)^3 averaged
    over seeded subsets; returns (mean, std over subsets). Slightly negative
    values are expected for matched distributions.
    """
    x = _values64(real)
    y = _values64(gen)
    n = min(x.shape[0], y.shape[0])
    s = subset_size if subset_size is not None else min(100, n)
    if s < 2:
        raise ValueError(f"subset size must be >= 2, got {s}")
    if s > n:
        raise ValueError(f"subset size {s} exceeds smaller sample size {n}")
    if num_subsets < 1:
        raise ValueError("num_subsets must be >= 1")
    x = x[canonical_order(x)]
    y = y[canonical_order(y)]
    gen_rng = (rng or RngStream(0)).generator()
    values = np.empty(num_subsets)
    for i in range(num_subsets):
        xi = x[gen_rng.choice(x.shape[0], size=s, replace=False)]
        yi = y[gen_rng.choice(y.shape[0], size=s, replace=False)]
        values[i] = _mmd2_unbiased(_poly3(xi, xi), _poly3(yi, yi), _poly3(xi, yi))
    return float(values.mean()), float(values.std())


def mmd_rbf(real: FeatureMatrix, gen: FeatureMatrix) -> float:
    """Unbiased MMD^2 with a Gaussian RBF kernel; bandwidth is the median
    pairwise distance over the pooled sample (0 when all points coincide)."""
    x = _values64(real)
    y = _values64(gen)
    if x.shape[0] < 2 or y.shape[0] < 2:
        raise ValueError("mmd_rbf needs at least 2 points per sample")
    pooled = np.vstack([x, y])
    med = np.median(pdist(pooled))
    if med == 0.0:
        return 0.0
    gamma = 1.0 / (2.0 * med ** 2)
    kxx = np.exp(-gamma * cdist(x, x, "sqeuclidean"))
    kyy = np.exp(-gamma * cdist(y, y, "sqeuclidean"))
    kxy = np.exp(-gamma * cdist(x, y, "sqeuclidean"))
    return _mmd2_unbiased(kxx, kyy, kxy)


def inception_score(probs: ClassProbMatrix, splits: int = 10) -> tuple[float, float]:
    """exp(mean KL(p(y|x) || p(y))) per split; returns (mean, std) across
    splits. Natural log, 0*log(0) = 0."""
    if splits < 1:
        raise ValueError("splits must be >= 1")
    p = probs.probs
    if p.shape[0] < splits:
        raise ValueError(f"{p.shape[0]} rows cannot fill {splits} splits")
    scores = []
    for chunk in np.array_split(p, splits):
        marginal = chunk.mean(axis=0)
        support = chunk > 0
        logs = np.zeros_like(chunk)
        logs[support] = np.log(chunk[support]) - np.log(marginal[np.nonzero(support)[1]])
        kl = (chunk * logs).sum(axis=1)
        scores.append(np.exp(kl.mean()))
    scores = np.array(scores)
    return float(scores.mean()), float(scores.std())


# --- perceptual proxies --------------------------------------------------------


def perceptual_nn_distance(real: FeatureMatrix, gen: FeatureMatrix) -> float:
    """Mean over generated samples of the distance to the closest real sample."""
    d = cdist(_values64(gen), _values64(real))
    return float(d.min(axis=1).mean())


def perceptual_intra_distance(gen: FeatureMatrix) -> float:
    """Mean pairwise distance inside the generated set; near-zero values are
    the mode-collapse signature."""
    if gen.n < 2:
        raise ValueError("intra distance needs at least 2 samples")
    return float(pdist(_values64(gen)).mean())


def dreamsim_score(real: FeatureMatrix, gen: FeatureMatrix) -> float:
    """Surrogate learned-similarity score: mean over generated samples of the
    maximum cosine similarity against the real set (zero-norm rows score 0)."""
    if real.d != gen.d:
        raise ValueError(f"dimension mismatch: {real.d} vs {gen.d}")

    def _unit(x):
        norms = np.sqrt((x ** 2).sum(axis=1, keepdims=True))
        out = np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)
        return out

    sim = _unit(_values64(gen)) @ _unit(_values64(real)).T
    return float(sim.max(axis=1).mean())


# --- manifold metrics -----------------------------------------------------------


class PRDC(NamedTuple):
    precision: float
    recall: float
    density: float
    coverage: float


def prdc(real: FeatureMatrix, gen: FeatureMatrix, k: int) -> PRDC:
    """Precision, recall, density, coverage from kNN balls (radius = distance
    to the k-th neighbour excluding self; membership uses <=)."""
    if k >= min(real.n, gen.n):
        raise ValueError(f"k={k} must be < min(n_real={real.n}, n_gen={gen.n})")
    radii_r = manifold_index(real, k).radii
    radii_g = manifold_index(gen, k).radii
    d_rg = cdist(_values64(real), _values64(gen))

    inside_real = d_rg <= radii_r[:, None]
    precision = float(inside_real.any(axis=0).mean())
    recall = float((d_rg <= radii_g[None, :]).any(axis=1).mean())
    density = float(inside_real.sum() / (k * gen.n))
    coverage = float((d_rg.min(axis=1) <= radii_r).mean())
    return PRDC(precision, recall, density, coverage)


@dataclass(frozen=True)
class RealismResult:
    per_sample: np.ndarray
    median: float


def realism(real: FeatureMatrix, gen: FeatureMatrix, k: int) -> RealismResult:
    """Radius-ratio realism: max over the kept half of real points (those
    with kNN radius at or below the median) of r_k(x) / d(g, x), capped at
    1e6. Higher means the sample sits deeper inside the real manifold."""
    if k >= real.n:
        raise ValueError(f"k={k} must be < n_real={real.n}")
    radii = manifold_index(real, k).radii
    kept = radii <= np.median(radii)
    d = cdist(_values64(gen), _values64(real)[kept])
    ratios = radii[kept][None, :] / np.maximum(d, 1e-12)
    per_sample = np.minimum(ratios.max(axis=1), _REALISM_CAP)
    return RealismResult(per_sample=per_sample, median=float(np.median(per_sample)))


def authpct(real: FeatureMatrix, gen: FeatureMatrix) -> float:
    """Percentage of generated samples that are authentic: g is inauthentic
    iff it sits strictly closer to its nearest real point r* than r*'s own
    nearest real neighbour (ties count authentic)."""
    if real.n < 2:
        raise ValueError("authpct needs at least 2 real samples")
    x = _values64(real)
    d_rr = cdist(x, x)
    np.fill_diagonal(d_rr, np.inf)
    gap = d_rr.min(axis=1)
    d_gr = cdist(_values64(gen), x)
    nearest = d_gr.argmin(axis=1)
    inauthentic = d_gr[np.arange(gen.n), nearest] < gap[nearest]
    return float(100.0 * (1.0 - inauthentic.mean()))


# --- diversity and likelihood ----------------------------------------------------


def cosine_kernel(fm: FeatureMatrix) -> KernelMatrix:
    """Cosine self-kernel on L2-normalized rows; zero rows are replaced by
    the first basis direction so the diagonal stays 1."""
    x = _values64(fm)
    norms = np.sqrt((x ** 2).sum(axis=1))
    zero = norms == 0
    if zero.any():
        x = x.copy()
        x[zero] = 0.0
        x[zero, 0] = 1.0
        norms = np.where(zero, 1.0, norms)
    xn = x / norms[:, None]
    return KernelMatrix(values=xn @ xn.T, kernel_tag="cosine")


def vendi(fm: FeatureMatrix) -> float:
    """Effective number of distinct samples: exp of the Shannon entropy of the
    (clamped, renormalized) eigenvalues of the cosine kernel divided by n."""
    k = cosine_kernel(fm).values
    eig = np.clip(np.linalg.eigvalsh(k / fm.n), 0.0, None)
    eig = eig / eig.sum()
    pos = eig[eig > 0]
    return float(np.exp(-(pos * np.log(pos)).sum()))


def fls(real: FeatureMatrix, gen: FeatureMatrix) -> float:
    """Mean log-density of generated features under a full-covariance Gaussian
    fitted to the real features (covariance + eps*I, eps = 1e-3*trace/d)."""
    if real.d != gen.d:
        raise ValueError(f"dimension mismatch: {real.d} vs {gen.d}")
    m = moments(real)
    d = m.d
    eps = max(1e-3 * np.trace(m.sigma) / d, 1e-12)
    sigma = m.sigma + eps * np.eye(d)
    chol = np.linalg.cholesky(sigma)
    diff = _values64(gen) - m.mu
    solved = solve_triangular(chol, diff.T, lower=True)
    quad = (solved ** 2).sum(axis=0)
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    logpdf = -0.5 * (d * np.log(2.0 * np.pi) + logdet + quad)
    return float(logpdf.mean())


# --- sliced Wasserstein -----------------------------------------------------------


def wasserstein_1d(x: np.ndarray, y: np.ndarray) -> float:
    """W1 between two sorted 1-D samples. Equal sizes: mean |x_(i) - y_(i)|.
    Unequal: exact integral of |Fx^-1 - Fy^-1| over (0,1) using the
    piecewise-constant empirical quantile functions."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size == 0 or y.size == 0:
        raise ValueError("wasserstein_1d requires non-empty inputs")
    if (np.diff(x) < 0).any() or (np.diff(y) < 0).any():
        raise ValueError("inputs must be sorted ascending")
    n, m = x.size, y.size
    if n == m:
        return float(np.abs(x - y).mean())
    edges = np.union1d(np.arange(1, n) / n, np.arange(1, m) / m)
    ts = np.concatenate([[0.0], edges, [1.0]])
    widths = np.diff(ts)
    mids = (ts[:-1] + ts[1:]) / 2.0
    xi = np.minimum((mids * n).astype(int), n - 1)
    yi = np.minimum((mids * m).astype(int), m - 1)
    return float((widths * np.abs(x[xi] - y[yi])).sum())


def asw(real: FeatureMatrix, gen: FeatureMatrix, num_projections: int = 128,
        rng: RngStream | None = None) -> float:
    """Approximate sliced Wasserstein: mean 1-D W1 over random unit
    projections. Unequal sample sizes are compared on max(n_r, n_g)
    equispaced quantiles (linear interpolation)."""
    if num_projections < 1:
        raise ValueError("need at least one projection")
    if real.d != gen.d:
        raise ValueError(f"dimension mismatch: {real.d} vs {gen.d}")
    dirs = sample_projections(real.d, num_projections, rng or RngStream(0)).directions
    proj_r = np.sort(_values64(real) @ dirs.T, axis=0)
    proj_g = np.sort(_values64(gen) @ dirs.T, axis=0)
    if real.n != gen.n:
        m = max(real.n, gen.n)
        q = np.linspace(0.0, 1.0, m)
        proj_r = np.quantile(proj_r, q, axis=0)
        proj_g = np.quantile(proj_g, q, axis=0)
    return float(np.abs(proj_r - proj_g).mean())


# --- copying / extrapolation statistics ---------------------------------------------


def ct_score(train: FeatureMatrix, test: FeatureMatrix, gen: FeatureMatrix,
             cells: int = 3, rng: RngStream | None = None,
             min_cell_count: int = 20) -> float:
    """Three-sample copying statistic: k-means cells fitted on train; per cell
    with enough test and generated points, a normal-approximated Mann-Whitney
    z compares distances-to-nearest-train of generated vs test points; cells
    are combined weighted by their share of qualifying test mass.

    Strongly negative values signal data copying (generated points hug the
    train set); positive values signal over-dispersion.
    """
    model = fit_kmeans(train, cells, rng or RngStream(0))
    xtr = _values64(train)
    xte = _values64(test)
    xge = _values64(gen)
    cell_tr = model.assign(xtr)
    cell_te = model.assign(xte)
    cell_ge = model.assign(xge)

    weighted = []
    for c in range(cells):
        tr_c = xtr[cell_tr == c]
        te_c = xte[cell_te == c]
        ge_c = xge[cell_ge == c]
        if len(te_c) < min_cell_count or len(ge_c) < min_cell_count or len(tr_c) == 0:
            continue
        d_te = cdist(te_c, tr_c).min(axis=1)
        d_ge = cdist(ge_c, tr_c).min(axis=1)
        m, n = len(d_ge), len(d_te)
        ranks = rankdata(np.concatenate([d_ge, d_te]))
        u = ranks[:m].sum() - m * (m + 1) / 2.0
        mean_u = m * n / 2.0 - 0.5  # continuity correction
        std_u = np.sqrt(m * n * (m + n + 1) / 12.0)
        weighted.append((len(te_c), (u - mean_u) / std_u))
    if not weighted:
        raise MetricError("ct_score", "no cell meets the per-cell count floor")
    masses = np.array([w for w, _ in weighted], dtype=np.float64)
    zs = np.array([z for _, z in weighted])
    return float((masses / masses.sum()) @ zs)


def extrapolate_intercept(inv_sizes, values) -> tuple[float, float]:
    """Least-squares line of metric value vs 1/N: returns (slope, intercept)."""
    inv_sizes = np.asarray(inv_sizes, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    slope, intercept = np.polyfit(inv_sizes, values, 1)
    return float(slope), float(intercept)


def fd_inf(real: FeatureMatrix, gen: FeatureMatrix, sizes=None, reps: int = 3,
           rng: RngStream | None = None) -> float:
    """Sample-size-extrapolated Frechet distance: fid on matched random
    subsamples over several sizes, least-squares line of fid vs 1/N, intercept
    clamped at zero (the infinite-sample estimate)."""
    n = min(real.n, gen.n)
    if sizes is None:
        sizes = sorted(set(int(round(s)) for s in np.geomspace(max(2, n // 5), n, 5)))
    sizes = sorted(set(int(s) for s in sizes))
    if len(sizes) < 2:
        raise ValueError("fd_inf needs at least 2 distinct subsample sizes")
    if sizes[0] < 2 or sizes[-1] > n:
        raise ValueError(f"sizes must lie in [2, {n}], got {sizes}")
    x = _values64(real)
    y = _values64(gen)
    x = x[canonical_order(x)]
    y = y[canonical_order(y)]
    gen_rng = (rng or RngStream(0)).generator()
    means = []
    for s in sizes:
        vals = []
        for _ in range(reps):
            xi = x[gen_rng.choice(x.shape[0], size=s, replace=False)]
            yi = y[gen_rng.choice(y.shape[0], size=s, replace=False)]
            fm_x = FeatureMatrix(xi, tuple(f"r{i}" for i in range(s)), "sub")
            fm_y = FeatureMatrix(yi, tuple(f"g{i}" for i in range(s)), "sub")
            vals.append(fid_from_features(fm_x, fm_y))
        means.append(np.mean(vals))
    _, intercept = extrapolate_intercept([1.0 / s for s in sizes], means)
    return max(0.0, intercept)


# --- aggregation -------------------------------------------------------------------


LOWER_BETTER = "lower-better"
HIGHER_BETTER = "higher-better"

METRIC_DIRECTIONS = {
    "fid": LOWER_BETTER,
    "sfid": LOWER_BETTER,
    "kid": LOWER_BETTER,
    "mmd_rbf": LOWER_BETTER,
    "inception_score": HIGHER_BETTER,
    "perceptual_nn": LOWER_BETTER,
    "perceptual_intra": LOWER_BETTER,
    "dreamsim": HIGHER_BETTER,
    "precision": HIGHER_BETTER,
    "recall": HIGHER_BETTER,
    "density": HIGHER_BETTER,
    "coverage": HIGHER_BETTER,
    "realism": HIGHER_BETTER,
    "vendi": HIGHER_BETTER,
    "fls": HIGHER_BETTER,
    "asw": LOWER_BETTER,
    "authpct": HIGHER_BETTER,
    "ct": LOWER_BETTER,
    "fd_inf": LOWER_BETTER,
}

DEFAULT_METRICS = tuple(METRIC_DIRECTIONS)


@dataclass(frozen=True)
class MetricEntry:
    name: str
    value: float
    direction: str
    std: float | None = None
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.direction not in (LOWER_BETTER, HIGHER_BETTER):
            raise ValueError(f"bad direction {self.direction!r}")
        if not np.isfinite(self.value):
            raise ValueError(f"metric {self.name!r} has non-finite value")
        object.__setattr__(self, "flags", tuple(self.flags))


@dataclass(frozen=True)
class MetricReport:
    """Named metric values for one (reference, candidate) pair."""

    real_name: str
    gen_name: str
    entries: tuple[MetricEntry, ...]

    def __post_init__(self):
        entries = tuple(self.entries)
        names = [e.name for e in entries]
        if len(set(names)) != len(names):
            raise ValueError("metric names must be unique in a report")
        object.__setattr__(self, "entries", entries)

    def names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries)

    def entry(self, name: str) -> MetricEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def value(self, name: str) -> float:
        return self.entry(name).value

    def to_dict(self) -> dict:
        metrics = []
        for e in self.entries:
            rec = {"name": e.name, "value": e.value, "direction": e.direction}
            if e.std is not None:
                rec["std"] = e.std
            rec["flags"] = list(e.flags)
            metrics.append(rec)
        return {"pair": {"real": self.real_name, "gen": self.gen_name},
                "metrics": metrics}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            with open(path, "w") as f:
                f.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricReport":
        entries = tuple(
            MetricEntry(name=m["name"], value=m["value"], direction=m["direction"],
                        std=m.get("std"), flags=tuple(m.get("flags", ())))
            for m in doc["metrics"])
        return cls(real_name=doc["pair"]["real"], gen_name=doc["pair"]["gen"],
                   entries=entries)

    @classmethod
    def from_json(cls, path) -> "MetricReport":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("name,value,direction,std,flags\n")
            for e in self.entries:
                std = format(e.std, ".9g") if e.std is not None else ""
                f.write(f"{e.name},{format(e.value, '.9g')},{e.direction},"
                        f"{std},{';'.join(e.flags)}\n")


@dataclass(frozen=True)
class MetricConfig:
    """Toggles and estimator parameters for evaluate_all."""

    enabled: tuple[str, ...] = DEFAULT_METRICS
    prdc_k: int | None = None          # None: 5, or 3 when min(n) < 50
    kid_subset_size: int | None = None
    kid_subsets: int = 100
    asw_projections: int = 128
    is_splits: int = 10
    ct_cells: int = 3
    ct_min_cell: int = 20
    fd_sizes: tuple[int, ...] | None = None
    fd_reps: int = 3
    kmeans_classes: int = 10
    softmax_temperature: float = 1.0
    probs_source: str = "kmeans"       # "kmeans" | "external"

    def __post_init__(self):
        unknown = set(self.enabled) - set(METRIC_DIRECTIONS)
        if unknown:
            raise ValueError(f"unknown metric names: {sorted(unknown)}")
        if self.probs_source not in ("kmeans", "external"):
            raise ValueError(f"bad probs_source {self.probs_source!r}")
        object.__setattr__(self, "enabled", tuple(self.enabled))


def _shared_rows(real: FeatureMatrix, gen: FeatureMatrix) -> bool:
    real_rows = {row.tobytes() for row in real.values}
    return any(row.tobytes() in real_rows for row in gen.values)


def _default_k(n: int) -> int:
    return 3 if n < 50 else 5


def evaluate_all(real: FeatureMatrix, gen: FeatureMatrix, *,
                 config: MetricConfig = MetricConfig(),
                 rng: RngStream | None = None,
                 real_spatial: FeatureMatrix | None = None,
                 gen_spatial: FeatureMatrix | None = None,
                 train: FeatureMatrix | None = None,
                 probs: ClassProbMatrix | None = None,
                 real_name: str = "real", gen_name: str = "gen") -> MetricReport:
    """Run every enabled metric on one (reference, candidate) feature pair.

    real/gen carry the global features; sfid additionally needs the spatial
    pair, ct_score needs a train split, and inception_score needs either an
    external ClassProbMatrix or (default) k-means pseudo-probabilities
    derived from the real features.
    """
    rng = rng or RngStream(0)
    enabled = config.enabled
    entries: list[MetricEntry] = []

    def on(name):
        return name in enabled

    if on("sfid") and (real_spatial is None or gen_spatial is None):
        raise MissingInputError("sfid", "spatial feature matrices")
    if on("ct") and train is None:
        raise MissingInputError("ct_score", "train feature matrix")
    if on("inception_score") and config.probs_source == "external" and probs is None:
        raise MissingInputError("inception_score", "ClassProbMatrix")

    k = config.prdc_k if config.prdc_k is not None else _default_k(min(real.n, gen.n))

    if on("fid"):
        entries.append(MetricEntry("fid", fid_from_features(real, gen), LOWER_BETTER))
    if on("sfid"):
        entries.append(MetricEntry("sfid", sfid(real_spatial, gen_spatial), LOWER_BETTER))
    if on("kid"):
        mean, std = kid(real, gen, subset_size=config.kid_subset_size,
                        num_subsets=config.kid_subsets, rng=rng.split(1))
        entries.append(MetricEntry("kid", mean, LOWER_BETTER, std=std))
    if on("mmd_rbf"):
        entries.append(MetricEntry("mmd_rbf", mmd_rbf(real, gen), LOWER_BETTER))
    if on("inception_score"):
        if probs is None:
            model = fit_kmeans(real, config.kmeans_classes, rng.split(2))
            probs_used = pseudo_class_probs(model, gen, config.softmax_temperature)
            flags = ("pseudo-labels",)
        else:
            probs_used = probs
            flags = ()
        mean, std = inception_score(probs_used, config.is_splits)
        entries.append(MetricEntry("inception_score", mean, HIGHER_BETTER,
                                   std=std, flags=flags))
    if on("perceptual_nn"):
        entries.append(MetricEntry("perceptual_nn",
                                   perceptual_nn_distance(real, gen), LOWER_BETTER))
    if on("perceptual_intra"):
        entries.append(MetricEntry("perceptual_intra",
                                   perceptual_intra_distance(gen), LOWER_BETTER,
                                   flags=("diversity-caveat",)))
    if on("dreamsim"):
        entries.append(MetricEntry("dreamsim", dreamsim_score(real, gen),
                                   HIGHER_BETTER, flags=("surrogate",)))
    if any(on(m) for m in ("precision", "recall", "density", "coverage")):
        result = prdc(real, gen, k)
        for name in ("precision", "recall", "density", "coverage"):
            if on(name):
                entries.append(MetricEntry(name, getattr(result, name), HIGHER_BETTER))
    if on("realism"):
        entries.append(MetricEntry("realism", realism(real, gen, k).median,
                                   HIGHER_BETTER))
    if on("vendi"):
        entries.append(MetricEntry("vendi", vendi(gen), HIGHER_BETTER))
    if on("fls"):
        entries.append(MetricEntry("fls", fls(real, gen), HIGHER_BETTER))
    if on("asw"):
        entries.append(MetricEntry("asw", asw(real, gen, config.asw_projections,
                                              rng.split(3)), LOWER_BETTER))
    if on("authpct"):
        flags = ("self-copy",) if _shared_rows(real, gen) else ()
        entries.append(MetricEntry("authpct", authpct(real, gen), HIGHER_BETTER,
                                   flags=flags))
    if on("ct"):
        raw = ct_score(train, real, gen, cells=config.ct_cells, rng=rng.split(4),
                       min_cell_count=config.ct_min_cell)
        entries.append(MetricEntry("ct", abs(raw), LOWER_BETTER,
                                   flags=(f"raw={format(raw, '.9g')}",)))
    if on("fd_inf"):
        entries.append(MetricEntry("fd_inf",
                                   fd_inf(real, gen, sizes=config.fd_sizes,
                                          reps=config.fd_reps, rng=rng.split(5)),
                                   LOWER_BETTER))

    return MetricReport(real_name=real_name, gen_name=gen_name,
                        entries=tuple(entries))
