"""Persistence weighting and subsampling of the consolidated diagram."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diagram import PersistenceDiagram


@dataclass(frozen=True)
class WeightBounds:
    """Ramp endpoints ``a < b`` of the piecewise linear persistence weight."""

    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or not self.a < self.b:
            raise ValueError(f"weight bounds need finite a < b, got a={self.a!r}, b={self.b!r}")


@dataclass(frozen=True)
class SamplingConfig:
    n: int = 10000
    weighted: bool = False
    seed: int = 0
    exponent: float = 1.0
    qlo: float = 0.05
    qhi: float = 0.95

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("subsample size must be at least 1")
        if self.exponent <= 0:
            raise ValueError("weight exponent must be positive")
        if not 0 <= self.qlo < self.qhi <= 1:
            raise ValueError("quantiles must satisfy 0 <= qlo < qhi <= 1")


def weight(t, bounds: WeightBounds, exponent: float = 1.0):
    """Piecewise linear ramp: 0 below ``a``, 1 from ``b`` on, linear in between.

    ``exponent`` raises the ramp to a power, which favours high-persistence
    points more strongly. Scalars in, scalar out.
    """
    t_arr = np.asarray(t, dtype=float)
    w = np.clip((t_arr - bounds.a) / (bounds.b - bounds.a), 0.0, 1.0)
    if exponent != 1.0:
        w = w**exponent
    return float(w) if w.ndim == 0 else w


def quantile_bounds(D, qlo: float = 0.05, qhi: float = 0.95) -> WeightBounds:
    """Weight bounds from persistence quantiles (linear interpolation).

    If both quantiles coincide, ``b`` is nudged above ``a`` by a few machine
    epsilons so the ramp stays well defined.
    """
    pers = D.persistence if isinstance(D, PersistenceDiagram) else np.asarray(D, float)[:, 1]
    if pers.size == 0:
        raise ValueError("cannot compute quantile bounds of an empty diagram")
    a, b = np.quantile(pers, [qlo, qhi], method="linear")
    a, b = float(a), float(b)
    if not a < b:
        b = a + 4 * np.finfo(float).eps * max(1.0, abs(a))
    return WeightBounds(a, b)


def subsample(D, cfg: SamplingConfig, bounds: WeightBounds | None = None) -> np.ndarray:
    """Draw ``cfg.n`` points of ``D`` without replacement.

    When ``cfg.weighted`` is set, inclusion probability follows the persistence
    weight. Zero-weight points are only drawn once every positive-weight point
    has been taken, and then uniformly.

    Returns an ``(k, 2)`` array, ``k = min(n, |D|)``.
    """
    pts = D.points if isinstance(D, PersistenceDiagram) else np.asarray(D, dtype=float)
    total = len(pts)
    if total == 0:
        raise ValueError("cannot subsample an empty diagram")
    if total <= cfg.n:
        return np.array(pts, copy=True)
    rng = np.random.default_rng(cfg.seed)
    if not cfg.weighted:
        idx = rng.choice(total, size=cfg.n, replace=False)
        return np.array(pts[idx])

    if bounds is None:
        bounds = quantile_bounds(pts, cfg.qlo, cfg.qhi)
    w = weight(pts[:, 1], bounds, cfg.exponent)
    positive = np.flatnonzero(w > 0)
    if positive.size == 0:
        idx = rng.choice(total, size=cfg.n, replace=False)
    elif positive.size <= cfg.n:
        zero = np.flatnonzero(w <= 0)
        fill = rng.choice(zero, size=cfg.n - positive.size, replace=False)
        idx = np.concatenate([positive, fill])
    else:
        p = w[positive] / w[positive].sum()
        idx = positive[rng.choice(positive.size, size=cfg.n, replace=False, p=p)]
    return np.array(pts[idx])
