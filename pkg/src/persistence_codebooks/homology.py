"""Small-scale persistent homology for point clouds.

Synthetic shape generators, Vietoris-Rips filtrations up to triangles, and the
standard boundary-matrix column reduction over Z/2. This is meant for clouds
of a few hundred points at most.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .diagram import PersistenceDiagram, from_birth_death

TORUS_MAJOR_RADIUS = 0.5
TORUS_MINOR_RADIUS = 0.25
# spread of the minor cluster centres around each major centre
MINOR_CLUSTER_SPREAD = 0.15


class FiltrationError(ValueError):
    pass


class ShapeClass(str, enum.Enum):
    RANDOM_CLOUD = "random_cloud"
    CIRCLE = "circle"
    SPHERE = "sphere"
    CLUSTERS = "clusters"
    CLUSTERS_OF_CLUSTERS = "clusters_of_clusters"
    TORUS = "torus"


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray

    def __post_init__(self):
        p = np.array(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(p)):
            raise ValueError("point coordinates must be finite")
        p.flags.writeable = False
        object.__setattr__(self, "points", p)

    def __len__(self) -> int:
        return self.points.shape[0]


def _unit_vectors(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _torus(rng, n, R, r):
    # rejection sampling on the tube angle gives a uniform surface density
    out = np.empty((0, 3))
    while len(out) < n:
        u = rng.uniform(0, 2 * np.pi, size=2 * n)
        v = rng.uniform(0, 2 * np.pi, size=2 * n)
        keep = rng.uniform(0, R + r, size=2 * n) < R + r * np.cos(v)
        u, v = u[keep], v[keep]
        ring = R + r * np.cos(v)
        out = np.vstack([out, np.column_stack([ring * np.cos(u), ring * np.sin(u), r * np.sin(v)])])
    return out[:n]


def generate_shape(
    shape: ShapeClass | str,
    n_points: int = 100,
    noise_sigma: float = 0.1,
    seed: int | np.random.SeedSequence | None = 0,
) -> PointCloud:
    """Sample a synthetic shape, then jitter every point with isotropic Gaussian noise.

    Shapes have unit scale: the unit cube, circle and sphere of diameter one,
    three clusters with centres drawn from the unit cube, three groups of three
    nearby clusters, and a torus with radii 0.5 and 0.25. For the cluster
    shapes the noise alone gives each cluster its spread.
    """
    shape = ShapeClass(shape)
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    rng = np.random.default_rng(seed)
    if shape is ShapeClass.RANDOM_CLOUD:
        pts = rng.uniform(0.0, 1.0, size=(n_points, 3))
    elif shape is ShapeClass.CIRCLE:
        theta = rng.uniform(0, 2 * np.pi, size=n_points)
        pts = np.column_stack([0.5 * np.cos(theta), 0.5 * np.sin(theta), np.zeros(n_points)])
    elif shape is ShapeClass.SPHERE:
        pts = 0.5 * _unit_vectors(rng, n_points)
    elif shape is ShapeClass.CLUSTERS:
        centers = rng.uniform(0.0, 1.0, size=(3, 3))
        pts = centers[rng.integers(3, size=n_points)]
    elif shape is ShapeClass.CLUSTERS_OF_CLUSTERS:
        major = rng.uniform(0.0, 1.0, size=(3, 3))
        minor = (major[:, None, :] + rng.normal(0, MINOR_CLUSTER_SPREAD, size=(3, 3, 3))).reshape(9, 3)
        pts = minor[rng.integers(9, size=n_points)]
    else:
        pts = _torus(rng, n_points, TORUS_MAJOR_RADIUS, TORUS_MINOR_RADIUS)
    if noise_sigma > 0:
        pts = pts + rng.normal(0.0, noise_sigma, size=pts.shape)
    return PointCloud(pts)


@dataclass(frozen=True, eq=False)
class FiltrationComplex:
    """Simplices sorted by (filtration value, dimension, vertex tuple).

    ``faces`` optionally caches, for every simplex, the positions of its
    codimension-one faces *within the list of simplices of that dimension*.
    """

    simplices: tuple[tuple[int, ...], ...]
    values: np.ndarray
    faces: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.simplices),):
            raise FiltrationError("one filtration value per simplex required")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.simplices)

    def dims(self) -> np.ndarray:
        return np.fromiter((len(s) - 1 for s in self.simplices), dtype=int, count=len(self.simplices))

    def _face_ranks(self) -> list:
        """Per simplex: ranks of its facets, validating closure along the way."""
        if self.faces is not None:
            return self.faces
        position = {}
        counts: dict[int, int] = {}
        out = []
        for pos, s in enumerate(self.simplices):
            k = len(s) - 1
            if k > 0:
                ranks = []
                for drop in range(len(s)):
                    face = s[:drop] + s[drop + 1:]
                    hit = position.get(face)
                    if hit is None:
                        raise FiltrationError(f"face {face} of simplex {s} missing or appears after it")
                    if self.values[hit[0]] > self.values[pos]:
                        raise FiltrationError(f"face {face} has a larger filtration value than {s}")
                    ranks.append(hit[1])
                out.append(ranks)
            else:
                out.append([])
            if s in position:
                raise FiltrationError(f"duplicate simplex {s}")
            position[s] = (pos, counts.get(k, 0))
            counts[k] = counts.get(k, 0) + 1
        return out


def vr_filtration(cloud: PointCloud | np.ndarray, max_dim: int = 2, max_radius: float | None = None) -> FiltrationComplex:
    """Vietoris-Rips filtration with all simplices up to ``max_dim`` and diameter ``<= max_radius``.

    ``max_radius`` defaults to the largest pairwise distance, so the final
    complex is the full ``max_dim``-skeleton.
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=float)
    n = len(pts)
    if n < 1:
        raise ValueError("need at least one point")
    if max_dim < 0 or max_dim > 2:
        raise ValueError("max_dim must be 0, 1 or 2")
    D = squareform(pdist(pts)) if n > 1 else np.zeros((1, 1))
    if max_radius is None:
        max_radius = float(D.max())
    if max_radius < 0:
        raise ValueError("max_radius must be non-negative")

    blocks_s: list[np.ndarray] = [np.arange(n)[:, None]]
    blocks_v: list[np.ndarray] = [np.zeros(n)]
    face_blocks: list = [np.empty((n, 0), dtype=np.int64)]

    edge_rank = None
    if max_dim >= 1 and n > 1:
        iu, ju = np.triu_indices(n, 1)
        ev = D[iu, ju]
        keep = ev <= max_radius
        iu, ju, ev = iu[keep], ju[keep], ev[keep]
        order = np.lexsort((ju, iu, ev))
        iu, ju, ev = iu[order], ju[order], ev[order]
        blocks_s.append(np.column_stack([iu, ju]))
        blocks_v.append(ev)
        face_blocks.append(np.column_stack([iu, ju]).astype(np.int64))  # vertex rank == index
        edge_rank = np.full((n, n), -1, dtype=np.int64)
        edge_rank[iu, ju] = np.arange(len(ev))
        edge_rank[ju, iu] = np.arange(len(ev))

    if max_dim >= 2 and n > 2:
        # triangles whose three edges all survived the radius cut
        a, b, c = _triangles(n)
        ab, ac, bc = edge_rank[a, b], edge_rank[a, c], edge_rank[b, c]
        keep = (ab >= 0) & (ac >= 0) & (bc >= 0)
        a, b, c, ab, ac, bc = a[keep], b[keep], c[keep], ab[keep], ac[keep], bc[keep]
        tv = np.maximum(np.maximum(D[a, b], D[a, c]), D[b, c])
        order = np.lexsort((c, b, a, tv))
        blocks_s.append(np.column_stack([a, b, c])[order])
        blocks_v.append(tv[order])
        # facets in the order (b,c), (a,c), (a,b): drop vertex 0, 1, 2
        face_blocks.append(np.column_stack([bc, ac, ab])[order])

    # merge blocks: primary value, secondary dimension (reverse to beat lexsort priority)
    values = np.concatenate(blocks_v)
    dims = np.concatenate([np.full(len(v), k) for k, v in enumerate(blocks_v)])
    within = np.concatenate([np.arange(len(v)) for v in blocks_v])
    order = np.lexsort((within, dims, values))
    simplices = []
    faces = []
    lists_s = [blk.tolist() for blk in blocks_s]
    lists_f = [blk.tolist() for blk in face_blocks]
    for k, i in zip(dims[order].tolist(), within[order].tolist()):
        simplices.append(tuple(lists_s[k][i]))
        faces.append(lists_f[k][i])
    return FiltrationComplex(tuple(simplices), values[order], tuple(faces))


def _triangles(n: int):
    i, j, k = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij", sparse=False)
    mask = (i < j) & (j < k)
    return i[mask], j[mask], k[mask]


@dataclass(frozen=True)
class PersistencePairs:
    """Birth/death pairs per homology dimension; ``inf`` death marks an essential class."""

    pairs: dict

    def __getitem__(self, dim: int) -> np.ndarray:
        return self.pairs.get(dim, np.empty((0, 2)))

    def dims(self):
        return sorted(self.pairs)


def reduce(fc: FiltrationComplex) -> PersistencePairs:
    """Standard column reduction of the Z/2 boundary matrix in filtration order.

    Columns are Python integers used as bitsets over the simplices of one
    dimension lower, so adding two columns is a single XOR. Within a dimension,
    bit order equals filtration order, so the pivot is the highest set bit.
    """
    face_ranks = fc._face_ranks()
    dims = fc.dims().tolist()
    values = fc.values.tolist()
    top = max(dims) if dims else -1
    # filtration values per dimension, in rank order
    vals = [[] for _ in range(top + 1)]
    for k, v in zip(dims, values):
        vals[k].append(v)
    # pivots[k][r]: reduced column (over k-simplices) whose lowest one is r; 0 if none
    pivots = [[0] * len(vals[k]) for k in range(top + 1)]
    negative = [bytearray(len(vals[k])) for k in range(top + 1)]
    killed = [bytearray(len(vals[k])) for k in range(top + 1)]
    out = [[] for _ in range(top + 1)]
    rank = [0] * (top + 1)

    for k, v, fr in zip(dims, values, face_ranks):
        r = rank[k]
        rank[k] = r + 1
        if k == 0:
            continue
        col = 0
        for f in fr:
            col ^= 1 << f
        piv = pivots[k - 1]
        while col:
            low = col.bit_length() - 1
            other = piv[low]
            if not other:
                piv[low] = col
                killed[k - 1][low] = 1
                negative[k][r] = 1
                out[k - 1].append((vals[k - 1][low], v))
                break
            col ^= other

    result = {}
    for k in range(top + 1):
        pairs = out[k] + [
            (vals[k][r], np.inf)
            for r in range(len(vals[k]))
            if not killed[k][r] and not negative[k][r]
        ]
        result[k] = np.array(pairs, dtype=float).reshape(-1, 2)
    return PersistencePairs(result)


def pd_from_cloud(cloud: PointCloud | np.ndarray, dim: int = 1, max_radius: float | None = None) -> PersistenceDiagram:
    """Persistence diagram of a Rips filtration in homology dimension ``dim`` (0 or 1).

    Infinite intervals and zero-persistence pairs are dropped.
    """
    if dim not in (0, 1):
        raise ValueError("only homology dimensions 0 and 1 are supported")
    fc = vr_filtration(cloud, max_dim=dim + 1, max_radius=max_radius)
    bd = reduce(fc)[dim]
    bd = bd[np.isfinite(bd[:, 1]) & (bd[:, 1] > bd[:, 0])]
    return from_birth_death(bd, homology_dim=dim)


def write_cloud(cloud: PointCloud, path: str | os.PathLike) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        for x, y, z in cloud.points:
            fh.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
    os.replace(tmp, path)


def read_cloud(path: str | os.PathLike) -> PointCloud:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                row = [float(t) for t in line.split()]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: cannot parse {line!r}") from None
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected three coordinates")
            rows.append(row)
    return PointCloud(np.array(rows).reshape(-1, 3))
