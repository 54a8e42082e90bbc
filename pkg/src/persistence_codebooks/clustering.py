"""Codebook fitting: k-means and diagonal-covariance Gaussian mixtures.

Both fitters are deterministic given ``FitConfig.seed``. Fitted codebooks are
immutable and can be saved to / loaded from a small JSON document.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import logsumexp

from .diagram import PersistenceDiagram, consolidate
from .sampling import SamplingConfig, WeightBounds, quantile_bounds, subsample

CODEBOOK_FORMAT = "persistence-codebook"
CODEBOOK_VERSION = 1

# below this many codewords a dense distance matrix beats the k-d tree
KDTREE_MIN_WORDS = 64

LOG_2PI = float(np.log(2.0 * np.pi))


class CodebookError(ValueError):
    pass


@dataclass(frozen=True)
class FitConfig:
    n_components: int
    max_iter: int = 300
    rel_tolerance: float = 1e-6
    seed: int = 0
    variance_floor_fraction: float = 1e-4

    def __post_init__(self):
        if self.n_components < 1:
            raise ValueError("need at least one codeword")
        if self.max_iter < 1 or self.rel_tolerance <= 0 or self.variance_floor_fraction <= 0:
            raise ValueError("max_iter, rel_tolerance and variance_floor_fraction must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class KMeansCodebook:
    """Cluster centers in the birth-persistence plane."""

    centers: np.ndarray
    seed: int = 0
    bounds: WeightBounds | None = None
    sse_history: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        c = _frozen(self.centers)
        if c.ndim != 2 or c.shape[1] != 2 or c.shape[0] < 1:
            raise CodebookError(f"centers must be an (N, 2) array with N >= 1, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise CodebookError("centers must be finite")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "_tree", None)

    kind = "kmeans"

    @property
    def n_words(self) -> int:
        return self.centers.shape[0]

    def tree(self) -> cKDTree:
        if self._tree is None:
            object.__setattr__(self, "_tree", cKDTree(self.centers))
        return self._tree

    def assign(self, points) -> np.ndarray:
        """Nearest-center index for each row of ``points``; ties go to the lowest index."""
        return assign_nearest(np.asarray(points, dtype=float).reshape(-1, 2), self)


@dataclass(frozen=True, eq=False)
class GmmCodebook:
    """Gaussian mixture with diagonal covariances.

    ``variances`` holds the diagonal of each covariance matrix, i.e. squared
    per-axis standard deviations.
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    seed: int = 0
    bounds: WeightBounds | None = None
    log_likelihood_history: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        w, mu, var = _frozen(self.weights), _frozen(self.means), _frozen(self.variances)
        n = w.shape[0] if w.ndim == 1 else -1
        if n < 1 or mu.shape != (n, 2) or var.shape != (n, 2):
            raise CodebookError("weights (N,), means (N, 2) and variances (N, 2) must agree")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(mu)) and np.all(np.isfinite(var))):
            raise CodebookError("GMM parameters must be finite")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise CodebookError("mixture weights must be positive and sum to one")
        if np.any(var <= 0):
            raise CodebookError("variances must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)

    kind = "gmm"

    @property
    def n_words(self) -> int:
        return self.weights.shape[0]

    @property
    def stds(self) -> np.ndarray:
        return np.sqrt(self.variances)

    def component_log_density(self, points) -> np.ndarray:
        """``log p_i(x)`` for every point and component, shape ``(T, N)``."""
        x = np.asarray(points, dtype=float).reshape(-1, 2)
        diff = x[:, None, :] - self.means[None, :, :]
        maha = np.sum(diff * diff / self.variances[None, :, :], axis=2)
        log_norm = LOG_2PI + 0.5 * np.sum(np.log(self.variances), axis=1)
        return -0.5 * maha - log_norm[None, :]

    def log_responsibilities(self, points) -> np.ndarray:
        joint = self.component_log_density(points) + np.log(self.weights)[None, :]
        return joint - logsumexp(joint, axis=1, keepdims=True)

    def log_likelihood(self, points) -> float:
        joint = self.component_log_density(points) + np.log(self.weights)[None, :]
        return float(np.sum(logsumexp(joint, axis=1)))


Codebook = KMeansCodebook | GmmCodebook


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.sum(diff * diff, axis=2)


def assign_nearest(points: np.ndarray, cb: KMeansCodebook) -> np.ndarray:
    if len(points) == 0:
        return np.empty(0, dtype=np.intp)
    centers = cb.centers
    n = centers.shape[0]
    if n < KDTREE_MIN_WORDS:
        return np.argmin(_sq_dists(points, centers), axis=1)
    k = min(n, 8)
    _, cand = cb.tree().query(points, k=k)
    cand = np.sort(cand, axis=1)  # lowest index first so argmin breaks ties correctly
    diff = points[:, None, :] - centers[cand]
    d = np.sum(diff * diff, axis=2)
    best = np.argmin(d, axis=1)
    out = cand[np.arange(len(points)), best]
    # exact ties may extend past the k candidates; resolve those rows densely
    dmin = d[np.arange(len(points)), best]
    ambiguous = np.flatnonzero(np.max(d, axis=1) <= dmin) if k < n else np.empty(0, int)
    if ambiguous.size:
        out[ambiguous] = np.argmin(_sq_dists(points[ambiguous], centers), axis=1)
    return out


def nearest_codeword(x, cb: KMeansCodebook) -> int:
    """Index (0-based) of the Euclidean-nearest center, lowest index on ties."""
    return int(assign_nearest(np.asarray(x, dtype=float).reshape(1, 2), cb)[0])


def _kmeans_pp(points: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    m = len(points)
    chosen = [int(rng.integers(m))]
    closest = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    for _ in range(1, n):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(m, p=closest / total))
        else:
            idx = int(rng.integers(m))
        chosen.append(idx)
        closest = np.minimum(closest, np.sum((points - points[idx]) ** 2, axis=1))
    return points[chosen].copy()


def _data_diameter(points: np.ndarray) -> float:
    extent = points.max(axis=0) - points.min(axis=0)
    return float(np.hypot(*extent))


def kmeans_fit(points, cfg: FitConfig, bounds: WeightBounds | None = None) -> KMeansCodebook:
    """Lloyd iterations from a k-means++ start.

    Stops when no center moves more than ``rel_tolerance`` times the data
    diameter (bounding-box diagonal) or after ``max_iter`` iterations. Empty
    clusters are moved onto the points farthest from their current centers.
    """
    centers, _, history = _lloyd(points, cfg)
    return KMeansCodebook(centers, seed=cfg.seed, bounds=bounds, sse_history=tuple(history))


def _lloyd(points, cfg: FitConfig):
    x = np.asarray(points, dtype=float).reshape(-1, 2)
    n = cfg.n_components
    if len(x) < n:
        raise CodebookError(f"need at least {n} points for {n} clusters, got {len(x)}")
    rng = np.random.default_rng(cfg.seed)
    centers = _kmeans_pp(x, n, rng)
    tol = cfg.rel_tolerance * _data_diameter(x)
    history = []
    for _ in range(cfg.max_iter):
        d = _sq_dists(x, centers)
        labels = np.argmin(d, axis=1)
        own = d[np.arange(len(x)), labels]
        history.append(float(own.sum()))
        counts = np.bincount(labels, minlength=n)
        sums = np.zeros((n, 2))
        np.add.at(sums, labels, x)
        new = centers.copy()
        filled = counts > 0
        new[filled] = sums[filled] / counts[filled, None]
        empty = np.flatnonzero(~filled)
        if empty.size:
            far = np.argsort(-own, kind="stable")[: empty.size]
            new[empty] = x[far]
        shift = np.max(np.abs(new - centers))
        centers = new
        if shift <= tol and empty.size == 0:
            break
    d = _sq_dists(x, centers)
    labels = np.argmin(d, axis=1)
    history.append(float(d[np.arange(len(x)), labels].sum()))
    return centers, labels, history


def gmm_fit(points, cfg: FitConfig, bounds: WeightBounds | None = None) -> GmmCodebook:
    """EM for a diagonal GMM, initialised from k-means.

    Each per-axis variance is kept above ``variance_floor_fraction`` times the
    global variance of the data along that axis. Iteration stops once the
    relative log-likelihood gain drops below ``rel_tolerance``.
    """
    x = np.asarray(points, dtype=float).reshape(-1, 2)
    n = cfg.n_components
    if len(x) < n:
        raise CodebookError(f"need at least {n} points for {n} components, got {len(x)}")
    m = len(x)
    floor = np.maximum(cfg.variance_floor_fraction * x.var(axis=0), 1e-12)

    centers, labels, _ = _lloyd(x, cfg)
    counts = np.bincount(labels, minlength=n).astype(float)
    counts = np.maximum(counts, 1e-12 * m)
    weights = counts / counts.sum()
    variances = np.empty((n, 2))
    for k in range(n):
        members = x[labels == k]
        variances[k] = members.var(axis=0) if len(members) else x.var(axis=0)
    means = centers
    variances = np.maximum(variances, floor)

    history = []
    prev = -np.inf
    for _ in range(cfg.max_iter):
        log_dens = _log_component(x, means, variances) + np.log(weights)[None, :]
        log_px = logsumexp(log_dens, axis=1)
        ll = float(np.sum(log_px))
        history.append(ll)
        if np.isfinite(prev) and ll - prev < cfg.rel_tolerance * abs(prev):
            break
        prev = ll
        resp = np.exp(log_dens - log_px[:, None])
        nk = resp.sum(axis=0)
        nk = np.maximum(nk, 10 * np.finfo(float).tiny)
        weights = nk / nk.sum()
        means = (resp.T @ x) / nk[:, None]
        centered = np.einsum("tk,tkd->kd", resp, (x[:, None, :] - means[None, :, :]) ** 2)
        variances = np.maximum(centered / nk[:, None], floor)
    weights = weights / weights.sum()
    return GmmCodebook(
        weights, means, variances, seed=cfg.seed, bounds=bounds,
        log_likelihood_history=tuple(history),
    )


def _log_component(x, means, variances):
    diff = x[:, None, :] - means[None, :, :]
    maha = np.sum(diff * diff / variances[None, :, :], axis=2)
    return -0.5 * maha - (LOG_2PI + 0.5 * np.sum(np.log(variances), axis=1))[None, :]


def gaussian_density(x, gmm: GmmCodebook, i: int) -> float:
    """Density ``p_i(x)`` of component ``i`` (no mixture weight)."""
    return float(np.exp(gmm.component_log_density(np.asarray(x, float).reshape(1, 2))[0, i]))


def responsibilities(x, gmm: GmmCodebook) -> np.ndarray:
    """Posterior component probabilities for one point (or rows of points)."""
    x = np.asarray(x, dtype=float)
    g = np.exp(gmm.log_responsibilities(x.reshape(-1, 2)))
    return g[0] if x.ndim == 1 else g


def fit_codebook(
    diagrams: Sequence[PersistenceDiagram],
    kind: str,
    n_words: int,
    sampling: SamplingConfig = SamplingConfig(),
    fit: FitConfig | None = None,
) -> Codebook:
    """Consolidate, subsample and cluster ``diagrams`` into a codebook.

    The persistence quantile bounds of the consolidated diagram are stored on
    the codebook; weighted bag-of-words encoding reuses them.
    """
    D = consolidate(diagrams)
    if len(D) == 0:
        raise CodebookError("no diagram points to fit a codebook on")
    bounds = quantile_bounds(D, sampling.qlo, sampling.qhi)
    pts = subsample(D, sampling, bounds)
    cfg = fit or FitConfig(n_components=n_words, seed=sampling.seed)
    if cfg.n_components != n_words:
        raise ValueError("fit config and n_words disagree")
    if kind == "kmeans":
        return kmeans_fit(pts, cfg, bounds)
    if kind == "gmm":
        return gmm_fit(pts, cfg, bounds)
    raise ValueError(f"unknown codebook kind {kind!r}")


def codebook_to_dict(cb: Codebook) -> dict:
    doc = {
        "format": CODEBOOK_FORMAT,
        "version": CODEBOOK_VERSION,
        "kind": cb.kind,
        "n_words": cb.n_words,
        "seed": int(cb.seed),
        "bounds": None if cb.bounds is None else {"a": cb.bounds.a, "b": cb.bounds.b},
    }
    if isinstance(cb, KMeansCodebook):
        doc["centers"] = cb.centers.tolist()
    else:
        doc["weights"] = cb.weights.tolist()
        doc["means"] = cb.means.tolist()
        doc["variances"] = cb.variances.tolist()
    return doc


def codebook_from_dict(doc: dict) -> Codebook:
    if doc.get("format") != CODEBOOK_FORMAT:
        raise CodebookError("not a codebook document")
    if doc.get("version") != CODEBOOK_VERSION:
        raise CodebookError(f"unsupported codebook version {doc.get('version')!r}")
    bounds = doc.get("bounds")
    bounds = None if bounds is None else WeightBounds(float(bounds["a"]), float(bounds["b"]))
    seed = int(doc.get("seed", 0))
    try:
        if doc["kind"] == "kmeans":
            cb = KMeansCodebook(np.array(doc["centers"], float), seed=seed, bounds=bounds)
        elif doc["kind"] == "gmm":
            cb = GmmCodebook(
                np.array(doc["weights"], float),
                np.array(doc["means"], float),
                np.array(doc["variances"], float),
                seed=seed,
                bounds=bounds,
            )
        else:
            raise CodebookError(f"unknown codebook kind {doc['kind']!r}")
    except KeyError as exc:
        raise CodebookError(f"codebook document lacks field {exc}") from None
    if cb.n_words != doc.get("n_words"):
        raise CodebookError("codebook n_words does not match its parameters")
    return cb


def save_codebook(cb: Codebook, path: str | os.PathLike) -> None:
    text = json.dumps(codebook_to_dict(cb), indent=1, sort_keys=True) + "\n"
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def load_codebook(path: str | os.PathLike) -> Codebook:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CodebookError(f"{path}: invalid codebook file ({exc})") from None
    return codebook_from_dict(doc)
