"""Persistence diagrams in birth-persistence coordinates.

Diagrams are stored as an ``(T, 2)`` float array whose columns are
``(birth, persistence)``. On disk they use the usual ``birth death`` text
layout produced by most persistent-homology tools.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class DiagramError(ValueError):
    """Raised for malformed diagrams or diagram files."""


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        arr = np.empty((0, 2), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DiagramError(f"expected an (T, 2) array of points, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DiagramError("diagram coordinates must be finite")
    if np.any(arr[:, 1] < 0):
        raise DiagramError("persistence must be non-negative")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


def _multiset_key(points: np.ndarray) -> np.ndarray:
    order = np.lexsort((points[:, 1], points[:, 0]))
    return points[order]


@dataclass(frozen=True, eq=False)
class PersistenceDiagram:
    """A finite multiset of ``(birth, persistence)`` points.

    Equality is multiset equality: point order is irrelevant, duplicates count.
    """

    points: np.ndarray
    homology_dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "points", _as_points(self.points))
        if int(self.homology_dim) < 0:
            raise DiagramError("homology dimension must be non-negative")
        object.__setattr__(self, "homology_dim", int(self.homology_dim))

    def __len__(self) -> int:
        return self.points.shape[0]

    def __iter__(self):
        return iter(map(tuple, self.points))

    def __eq__(self, other) -> bool:
        if not isinstance(other, PersistenceDiagram):
            return NotImplemented
        return (
            self.homology_dim == other.homology_dim
            and len(self) == len(other)
            and np.array_equal(_multiset_key(self.points), _multiset_key(other.points))
        )

    __hash__ = None

    @property
    def birth(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def persistence(self) -> np.ndarray:
        return self.points[:, 1]

    def to_birth_death(self) -> np.ndarray:
        """Return an ``(T, 2)`` array of ``(birth, death)`` pairs."""
        return np.column_stack([self.birth, self.birth + self.persistence])

    def union(self, other: "PersistenceDiagram") -> "PersistenceDiagram":
        if other.homology_dim != self.homology_dim:
            raise DiagramError("cannot merge diagrams of different homology dimensions")
        return PersistenceDiagram(np.vstack([self.points, other.points]), self.homology_dim)

    def __repr__(self) -> str:
        return f"PersistenceDiagram(n={len(self)}, homology_dim={self.homology_dim})"


@dataclass(frozen=True, eq=False)
class ConsolidatedDiagram(PersistenceDiagram):
    """Multiset union of several diagrams, the input to codebook fitting."""

    source_count: int = field(default=0)

    def __repr__(self) -> str:
        return (
            f"ConsolidatedDiagram(n={len(self)}, homology_dim={self.homology_dim}, "
            f"source_count={self.source_count})"
        )


def from_birth_death(pairs, homology_dim: int = 1) -> PersistenceDiagram:
    """Build a diagram from ``(birth, death)`` pairs.

    Pairs with infinite death are dropped (essential classes are ignored).

    Raises
    ------
    DiagramError
        If some finite pair has ``death < birth``.
    """
    arr = np.asarray(pairs, dtype=float)
    if arr.size == 0:
        return PersistenceDiagram(np.empty((0, 2)), homology_dim)
    arr = arr.reshape(-1, 2)
    if np.any(np.isnan(arr)) or np.any(~np.isfinite(arr[:, 0])):
        raise DiagramError("birth values must be finite numbers")
    finite = np.isfinite(arr[:, 1])
    if np.any(arr[~finite, 1] < 0):
        raise DiagramError("death of -inf is not a valid interval")
    arr = arr[finite]
    bad = np.flatnonzero(arr[:, 1] < arr[:, 0])
    if bad.size:
        b, d = arr[bad[0]]
        raise DiagramError(f"malformed interval ({b!r}, {d!r}): death < birth")
    return PersistenceDiagram(np.column_stack([arr[:, 0], arr[:, 1] - arr[:, 0]]), homology_dim)


def consolidate(diagrams: Sequence[PersistenceDiagram]) -> ConsolidatedDiagram:
    """Merge diagrams into one, keeping duplicates."""
    diagrams = list(diagrams)
    dims = {d.homology_dim for d in diagrams}
    if len(dims) > 1:
        raise DiagramError(f"mixed homology dimensions: {sorted(dims)}")
    dim = dims.pop() if dims else 1
    pts = [d.points for d in diagrams]
    merged = np.vstack(pts) if pts else np.empty((0, 2))
    return ConsolidatedDiagram(merged, dim, source_count=len(diagrams))


def read_pd_file(path: str | os.PathLike, homology_dim: int | None = None) -> PersistenceDiagram:
    """Read a ``birth death`` text file.

    ``inf`` deaths are dropped and ``#`` lines are skipped, except that a
    ``# homology_dim=K`` comment sets the dimension when none is passed.
    """
    pairs = []
    header_dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key.strip() == "homology_dim" and value.strip().isdigit():
                    header_dim = int(value)
                continue
            tokens = line.split()
            if len(tokens) != 2:
                raise DiagramError(f"{path}:{lineno}: expected 'birth death', got {line!r}")
            try:
                b, d = float(tokens[0]), float(tokens[1])
            except ValueError:
                raise DiagramError(f"{path}:{lineno}: cannot parse {line!r}") from None
            if math.isnan(b) or math.isnan(d) or not math.isfinite(b):
                raise DiagramError(f"{path}:{lineno}: invalid values {line!r}")
            if d < b:
                raise DiagramError(f"{path}:{lineno}: death < birth in {line!r}")
            pairs.append((b, d))
    if homology_dim is None:
        homology_dim = 1 if header_dim is None else header_dim
    return from_birth_death(pairs, homology_dim)


def write_pd_file(diagram: PersistenceDiagram, path: str | os.PathLike) -> None:
    """Write a diagram as ``birth death`` lines with 17 significant digits.

    Points are stored as birth and persistence; the death column written is
    ``birth + persistence`` and reading recovers the persistence by subtraction,
    which is exact only up to floating-point rounding of that sum.
    """
    bd = diagram.to_birth_death()
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(f"# homology_dim={diagram.homology_dim}\n")
        for b, d in bd:
            fh.write(f"{b:.17g} {d:.17g}\n")
    os.replace(tmp, path)


def diagrams_from_arrays(arrays: Iterable, homology_dim: int = 1) -> list[PersistenceDiagram]:
    return [PersistenceDiagram(a, homology_dim) for a in arrays]
