"""Fixed-length encodings of a persistence diagram against a codebook.

Hard-assignment encodings (``PBOW``, ``WPBOW``, ``PVLAD``) use a
:class:`KMeansCodebook`; soft-assignment encodings (``SPBOW``, ``SPVLAD``,
``PFV``) use a :class:`GmmCodebook`. Vector blocks are laid out codeword by
codeword, birth axis before persistence axis.
"""

from __future__ import annotations

import enum
import hashlib
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .clustering import Codebook, GmmCodebook, KMeansCodebook
from .diagram import PersistenceDiagram
from .sampling import WeightBounds, weight


class Encoding(str, enum.Enum):
    PBOW = "pbow"
    WPBOW = "wpbow"
    SPBOW = "spbow"
    PVLAD = "pvlad"
    SPVLAD = "spvlad"
    PFV = "pfv"

    @property
    def codebook_kind(self) -> str:
        return "kmeans" if self in (Encoding.PBOW, Encoding.WPBOW, Encoding.PVLAD) else "gmm"

    @property
    def width(self) -> int:
        """Vector length per codeword."""
        return {"pvlad": 2, "spvlad": 2, "pfv": 4}.get(self.value, 1)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    encoding: Encoding
    normalized: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "encoding", Encoding(self.encoding))

    def __len__(self) -> int:
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def _canonical(B) -> np.ndarray:
    pts = B.points if isinstance(B, PersistenceDiagram) else np.asarray(B, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        return np.asarray(pts, dtype=float).reshape(-1, 2)
    return pts[np.lexsort((pts[:, 1], pts[:, 0]))]


def _pairwise_sum_over_points(a: np.ndarray) -> np.ndarray:
    """Sum an array over its leading (point) axis with pairwise summation."""
    moved = np.ascontiguousarray(np.moveaxis(a, 0, -1))
    return moved.sum(axis=-1)


def _require(cb, cls, name):
    if not isinstance(cb, cls):
        raise TypeError(f"{name} needs a {cls.__name__}, got {type(cb).__name__}")


def encode_pbow(B, cb: KMeansCodebook) -> FeatureVector:
    """Codeword histogram: how many points fall nearest to each center."""
    _require(cb, KMeansCodebook, "PBoW")
    x = _canonical(B)
    counts = np.bincount(cb.assign(x), minlength=cb.n_words).astype(float)
    return FeatureVector(counts, Encoding.PBOW)


def encode_wpbow(B, cb: KMeansCodebook, bounds: WeightBounds | None = None) -> FeatureVector:
    """Histogram of persistence weights instead of counts.

    ``bounds`` defaults to the bounds stored with the codebook at fit time.
    """
    _require(cb, KMeansCodebook, "wPBoW")
    bounds = bounds or cb.bounds
    if bounds is None:
        raise ValueError("wPBoW needs weight bounds; the codebook carries none")
    x = _canonical(B)
    w = np.atleast_1d(weight(x[:, 1], bounds)) if len(x) else np.empty(0)
    v = np.bincount(cb.assign(x), weights=w, minlength=cb.n_words)
    return FeatureVector(v, Encoding.WPBOW)


def encode_pvlad(B, cb: KMeansCodebook) -> FeatureVector:
    _require(cb, KMeansCodebook, "PVLAD")
    x = _canonical(B)
    n = cb.n_words
    labels = cb.assign(x)
    resid = x - cb.centers[labels]
    v = np.column_stack(
        [np.bincount(labels, weights=resid[:, d], minlength=n) for d in range(2)]
    ) if len(x) else np.zeros((n, 2))
    return FeatureVector(v.reshape(-1), Encoding.PVLAD)


def encode_spbow(B, gmm: GmmCodebook) -> FeatureVector:
    """Mixture-weighted sum of component densities over the diagram."""
    _require(gmm, GmmCodebook, "sPBoW")
    x = _canonical(B)
    if len(x) == 0:
        return FeatureVector(np.zeros(gmm.n_words), Encoding.SPBOW)
    dens = np.exp(gmm.component_log_density(x))
    return FeatureVector(gmm.weights * _pairwise_sum_over_points(dens), Encoding.SPBOW)


def encode_spvlad(B, gmm: GmmCodebook) -> FeatureVector:
    """Responsibility-weighted residual sums (soft VLAD)."""
    _require(gmm, GmmCodebook, "sPVLAD")
    x = _canonical(B)
    if len(x) == 0:
        return FeatureVector(np.zeros(2 * gmm.n_words), Encoding.SPVLAD)
    gamma = np.exp(gmm.log_responsibilities(x))
    diff = x[:, None, :] - gmm.means[None, :, :]
    v = _pairwise_sum_over_points(gamma[:, :, None] * diff)
    return FeatureVector(v.reshape(-1), Encoding.SPVLAD)


def pfv_gradient(B, gmm: GmmCodebook) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the diagram log-likelihood w.r.t. means and standard deviations.

    Returns
    -------
    grad_mu, grad_sigma : ndarray, shape (N, 2)
        ``sum_t gamma_i(x_t) (x_t - mu_i) / sigma_i**2`` and
        ``sum_t gamma_i(x_t) [(x_t - mu_i)**2 / sigma_i**3 - 1 / sigma_i]``.
    """
    x = _canonical(B)
    n = gmm.n_words
    if len(x) == 0:
        return np.zeros((n, 2)), np.zeros((n, 2))
    sigma = gmm.stds
    gamma = np.exp(gmm.log_responsibilities(x))[:, :, None]
    z = (x[:, None, :] - gmm.means[None, :, :]) / sigma[None, :, :]
    g_mu = _pairwise_sum_over_points(gamma * z) / sigma
    g_sigma = _pairwise_sum_over_points(gamma * (z * z - 1.0)) / sigma
    return g_mu, g_sigma


def closed_form_fisher_diagonal(gmm: GmmCodebook, n_points: int) -> np.ndarray:
    """Diagonal Fisher information in PFV layout: ``T w / sigma^2`` and ``2 T w / sigma^2``."""
    base = n_points * gmm.weights[:, None] / gmm.variances
    return np.hstack([base, 2.0 * base]).reshape(-1)


def empirical_fisher_diagonal(diagrams: Iterable, gmm: GmmCodebook) -> np.ndarray:
    """Average squared raw gradient over ``diagrams``, in PFV layout."""
    acc, count = None, 0
    for B in diagrams:
        g_mu, g_sigma = pfv_gradient(B, gmm)
        g = np.hstack([g_mu, g_sigma]).reshape(-1)
        acc = g * g if acc is None else acc + g * g
        count += 1
    if not count:
        raise ValueError("need at least one diagram to estimate the Fisher information")
    return acc / count


def encode_pfv(B, gmm: GmmCodebook, fisher: str | np.ndarray = "closed_form") -> FeatureVector:
    """Fisher vector: log-likelihood gradients scaled by inverse root Fisher information.

    ``fisher`` is ``"closed_form"`` (per-diagram analytic diagonal) or a
    precomputed diagonal of length ``4N`` such as the output of
    :func:`empirical_fisher_diagonal`.
    """
    _require(gmm, GmmCodebook, "PFV")
    x = _canonical(B)
    n = gmm.n_words
    if len(x) == 0:
        return FeatureVector(np.zeros(4 * n), Encoding.PFV)
    g_mu, g_sigma = pfv_gradient(x, gmm)
    raw = np.hstack([g_mu, g_sigma]).reshape(-1)
    if isinstance(fisher, str):
        if fisher != "closed_form":
            raise ValueError(f"unknown Fisher information mode {fisher!r}")
        f = closed_form_fisher_diagonal(gmm, len(x))
    else:
        f = np.asarray(fisher, dtype=float)
        if f.shape != raw.shape:
            raise ValueError(f"Fisher diagonal must have length {raw.size}")
    f = np.maximum(f, np.finfo(float).tiny)
    return FeatureVector(raw / np.sqrt(f), Encoding.PFV)


def normalize(v: FeatureVector | np.ndarray) -> FeatureVector | np.ndarray:
    """Signed square root of each component followed by L2 normalization."""
    vals = np.asarray(v.values if isinstance(v, FeatureVector) else v, dtype=float)
    out = np.sign(vals) * np.sqrt(np.abs(vals))
    norm = np.linalg.norm(out)
    if norm > 0:
        out = out / norm
    if isinstance(v, FeatureVector):
        return FeatureVector(out, v.encoding, normalized=True)
    return out


_ENCODERS = {
    Encoding.PBOW: encode_pbow,
    Encoding.WPBOW: encode_wpbow,
    Encoding.SPBOW: encode_spbow,
    Encoding.PVLAD: encode_pvlad,
    Encoding.SPVLAD: encode_spvlad,
    Encoding.PFV: encode_pfv,
}


def encode(B, codebook: Codebook, encoding: Encoding | str, normalized: bool = True) -> FeatureVector:
    encoding = Encoding(encoding)
    v = _ENCODERS[encoding](B, codebook)
    return normalize(v) if normalized else v


def encode_many(diagrams: Sequence, codebook: Codebook, encoding, normalized: bool = True) -> np.ndarray:
    """Stack encodings of many diagrams into a ``(len(diagrams), dim)`` matrix."""
    encoding = Encoding(encoding)
    dim = encoding.width * codebook.n_words
    if not diagrams:
        return np.empty((0, dim))
    return np.vstack([encode(B, codebook, encoding, normalized).values for B in diagrams])


def file_checksum(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_features(
    path: str | os.PathLike | None,
    rows: np.ndarray,
    encoding: Encoding | str,
    n_words: int,
    normalized: bool,
    codebook_sha256: str,
    stream=None,
) -> None:
    """Write one vector per line under a ``#`` header identifying the model.

    Pass ``path=None`` and a text ``stream`` to write elsewhere (e.g. stdout).
    """
    encoding = Encoding(encoding)
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    lines = [
        f"# encoding={encoding.value} n_words={n_words} normalized={int(bool(normalized))} "
        f"codebook_sha256={codebook_sha256}"
    ]
    lines += [" ".join(f"{x:.17g}" for x in row) for row in rows if row.size]
    text = "\n".join(lines) + "\n"
    if path is None:
        stream.write(text)
        return
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_features(path: str | os.PathLike) -> tuple[dict, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing feature header")
        meta = dict(tok.split("=", 1) for tok in header[1:].split())
        rows = [list(map(float, line.split())) for line in fh if line.strip()]
    meta["n_words"] = int(meta["n_words"])
    meta["normalized"] = meta["normalized"] == "1"
    width = Encoding(meta["encoding"]).width * meta["n_words"]
    arr = np.array(rows, dtype=float).reshape(-1, width)
    return meta, arr
