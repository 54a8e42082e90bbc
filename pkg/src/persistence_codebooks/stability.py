"""Empirical stability checks: Lipschitz bounds, perturbations, distance ratios."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import GmmCodebook, KMeansCodebook
from .diagram import PersistenceDiagram
from .encode import Encoding, encode
from .metrics import w1_distance


def density_gradient_bound(gmm: GmmCodebook, box=((0.0, 1.0), (0.0, 1.0)), grid: int = 401) -> np.ndarray:
    """Per-component bound ``L_i`` on ``||grad p_i||_1`` over ``box``.

    The 1-norm is the dual of the infinity ground metric, so
    ``|p_i(x) - p_i(y)| <= L_i ||x - y||_inf`` on the box. The grid maximum is
    doubled as a safety margin for what the grid misses between nodes.
    """
    (b0, b1), (p0, p1) = box
    gb, gp = np.meshgrid(np.linspace(b0, b1, grid), np.linspace(p0, p1, grid), indexing="ij")
    coarse = np.column_stack([gb.ravel(), gp.ravel()])
    lo, hi = np.array([b0, p0]), np.array([b1, p1])
    offs = np.linspace(-3.0, 3.0, 61)
    stencil = np.stack(np.meshgrid(offs, offs, indexing="ij"), axis=-1).reshape(-1, 2)
    out = np.empty(gmm.n_words)
    for i in range(gmm.n_words):
        # a component narrower than the grid spacing would be missed, so add
        # a fine stencil scaled by its own standard deviations
        local = np.clip(gmm.means[i] + stencil * gmm.stds[i], lo, hi)
        pts = np.vstack([coarse, local])
        d = pts - gmm.means[i]
        var = gmm.variances[i]
        dens = np.exp(-0.5 * np.sum(d * d / var, axis=1)) / (2 * np.pi * np.sqrt(np.prod(var)))
        out[i] = 2.0 * np.max(dens * np.sum(np.abs(d) / var, axis=1))
    return out


def spbow_constant(gmm: GmmCodebook, **kw) -> float:
    """``C = max_i w_i L_i`` for the sPBoW bound ``||dv||_inf <= C W1``."""
    return float(np.max(gmm.weights * density_gradient_bound(gmm, **kw)))


def random_diagram(rng: np.random.Generator, max_points: int = 10, min_points: int = 1) -> PersistenceDiagram:
    """Uniform points in the unit box (birth-persistence coordinates)."""
    k = int(rng.integers(min_points, max_points + 1))
    return PersistenceDiagram(rng.random((k, 2)))


def perturb(B: PersistenceDiagram, delta: float, rng: np.random.Generator) -> PersistenceDiagram:
    """Move every point by at most ``delta`` in the infinity norm, staying in the unit box."""
    pts = B.points + delta * rng.uniform(-1.0, 1.0, size=B.points.shape)
    return PersistenceDiagram(np.clip(pts, 0.0, 1.0), B.homology_dim)


def distance_ratio(B, B_prime, codebook, encoding, ord=np.inf) -> float:
    """``||v(B) - v(B')|| / W1(B, B')`` on unnormalized encodings; inf when W1 is zero
    but the vectors differ, nan when both vanish."""
    dv = encode(B, codebook, encoding, normalized=False).values - encode(
        B_prime, codebook, encoding, normalized=False
    ).values
    num = float(np.linalg.norm(dv, ord))
    den = w1_distance(B, B_prime)
    if den == 0.0:
        return np.inf if num > 0 else np.nan
    return num / den


@dataclass(frozen=True)
class CounterexampleResult:
    eps: float
    w1: float
    pbow_ratio: float
    pvlad_ratio: float


def counterexample(eps: float, persistence: float = 0.0) -> CounterexampleResult:
    """Two one-point diagrams straddling the bisector of two codewords.

    Centers sit at ``(0, h)`` and ``(1, h)``; diagrams are ``{(1/2 - eps, h)}``
    and ``{(1/2 + eps, h)}``. With ``h = 0`` both points lie on the diagonal,
    so W1 is zero and the ratio is infinite; ``h > 0`` gives the
    non-degenerate form with W1 ``= min(2 eps, 2h)``.
    """
    h = float(persistence)
    cb = KMeansCodebook(np.array([[0.0, h], [1.0, h]]))
    B = PersistenceDiagram(np.array([[0.5 - eps, h]]))
    Bp = PersistenceDiagram(np.array([[0.5 + eps, h]]))
    return CounterexampleResult(
        eps,
        w1_distance(B, Bp),
        distance_ratio(B, Bp, cb, Encoding.PBOW, ord=1),
        distance_ratio(B, Bp, cb, Encoding.PVLAD, ord=1),
    )


def max_perturbation_ratio(
    gmm: GmmCodebook,
    encoding: Encoding | str,
    delta: float,
    trials: int = 10_000,
    seed: int = 0,
    max_points: int = 10,
) -> float:
    """Largest ``||dv||_inf / W1`` over random diagrams and their ``delta`` perturbations."""
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(trials):
        B = random_diagram(rng, max_points)
        r = distance_ratio(B, perturb(B, delta, rng), gmm, encoding)
        if np.isfinite(r):
            best = max(best, r)
    return best
