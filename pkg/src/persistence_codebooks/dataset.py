"""Synthetic shape datasets on disk, described by a JSON manifest."""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .diagram import PersistenceDiagram, read_pd_file, write_pd_file
from .homology import (
    MINOR_CLUSTER_SPREAD,
    TORUS_MAJOR_RADIUS,
    TORUS_MINOR_RADIUS,
    ShapeClass,
    generate_shape,
    pd_from_cloud,
    read_cloud,
    write_cloud,
)

MANIFEST_FORMAT = "persistence-manifest"
MANIFEST_VERSION = 1


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class Sample:
    pd: Path | None
    label: int
    cloud: Path | None = None
    class_name: str = ""


@dataclass(frozen=True)
class Manifest:
    name: str
    samples: tuple[Sample, ...]
    class_names: tuple[str, ...]
    homology_dim: int = 1
    generation: dict | None = None

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=int)

    def load_diagrams(self) -> list[PersistenceDiagram]:
        missing = [s for s in self.samples if s.pd is None]
        if missing:
            raise ManifestError("manifest has samples without persistence diagrams")
        return [read_pd_file(s.pd, self.homology_dim) for s in self.samples]


def _sample_task(args):
    shape, n_points, noise, seed_seq, dim = args
    cloud = generate_shape(shape, n_points, noise, seed_seq)
    return cloud, (pd_from_cloud(cloud, dim) if dim is not None else None)


def _tasks(classes, clouds_per_class, n_points, noise, seed, dim):
    classes = [ShapeClass(c) for c in classes]
    seeds = np.random.SeedSequence(seed).spawn(len(classes) * clouds_per_class)
    tasks, meta = [], []
    for ci, shape in enumerate(classes):
        for j in range(clouds_per_class):
            tasks.append((shape, n_points, noise, seeds[ci * clouds_per_class + j], dim))
            meta.append((ci, shape, j))
    return tasks, meta


def _run(tasks, jobs):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sample_task, tasks, chunksize=4))
    return [_sample_task(t) for t in tasks]


def synthetic_diagrams(
    classes: Sequence[ShapeClass | str] = tuple(ShapeClass),
    clouds_per_class: int = 50,
    n_points: int = 100,
    noise: float = 0.1,
    seed: int = 0,
    dim: int = 1,
    jobs: int = 1,
) -> tuple[list[PersistenceDiagram], np.ndarray]:
    """In-memory version of :func:`build_synthetic_dataset`; same seeds, same diagrams."""
    tasks, meta = _tasks(classes, clouds_per_class, n_points, noise, seed, dim)
    results = _run(tasks, jobs)
    return [pd for _, pd in results], np.array([ci for ci, _, _ in meta], dtype=int)


def build_synthetic_dataset(
    out_dir: str | os.PathLike,
    classes: Sequence[ShapeClass | str] = tuple(ShapeClass),
    clouds_per_class: int = 50,
    n_points: int = 100,
    noise: float = 0.1,
    seed: int = 0,
    dim: int | None = 1,
    jobs: int = 1,
    name: str = "synthetic",
) -> Path:
    """Write clouds (and their diagrams unless ``dim`` is None) plus ``manifest.json``.

    Every cloud gets its own child seed of ``seed``, so the output does not
    depend on ``jobs``.
    """
    out = Path(out_dir)
    (out / "clouds").mkdir(parents=True, exist_ok=True)
    if dim is not None:
        (out / "pds").mkdir(parents=True, exist_ok=True)
    classes = [ShapeClass(c) for c in classes]
    tasks, meta = _tasks(classes, clouds_per_class, n_points, noise, seed, dim)
    results = _run(tasks, jobs)
    samples = []
    for (ci, shape, j), (cloud, pd) in zip(meta, results):
        stem = f"{shape.value}_{j:03d}.txt"
        write_cloud(cloud, out / "clouds" / stem)
        entry = {"cloud": f"clouds/{stem}", "label": ci, "class": shape.value}
        if pd is not None:
            write_pd_file(pd, out / "pds" / stem)
            entry["pd"] = f"pds/{stem}"
        samples.append(entry)
    doc = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "name": name,
        "homology_dim": 1 if dim is None else dim,
        "classes": [c.value for c in classes],
        "generation": {
            "seed": seed,
            "noise_sigma": noise,
            "points_per_cloud": n_points,
            "clouds_per_class": clouds_per_class,
            "torus_radii": [TORUS_MAJOR_RADIUS, TORUS_MINOR_RADIUS],
            "minor_cluster_spread": MINOR_CLUSTER_SPREAD,
        },
        "samples": samples,
    }
    path = out / "manifest.json"
    write_manifest(doc, path)
    return path


def write_manifest(doc: dict, path: str | os.PathLike) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    os.replace(tmp, path)


def load_manifest(path: str | os.PathLike, require_pds: bool = True) -> Manifest:
    """Parse and validate a manifest; sample paths are resolved relative to it."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ManifestError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from None
    if doc.get("format") != MANIFEST_FORMAT:
        raise ManifestError(f"{path}: not a dataset manifest")
    root = path.parent
    samples = []
    for i, entry in enumerate(doc.get("samples", [])):
        try:
            label = int(entry["label"])
        except (KeyError, TypeError, ValueError):
            raise ManifestError(f"{path}: sample {i} has no integer label") from None
        pd = root / entry["pd"] if entry.get("pd") else None
        cloud = root / entry["cloud"] if entry.get("cloud") else None
        if require_pds and pd is None:
            raise ManifestError(f"{path}: sample {i} has no persistence diagram")
        for p in (pd, cloud):
            if p is not None and not p.exists():
                raise ManifestError(f"{path}: sample {i} refers to missing file {p}")
        samples.append(Sample(pd, label, cloud, entry.get("class", "")))
    if not samples:
        raise ManifestError(f"{path}: manifest lists no samples")
    labels = sorted({s.label for s in samples})
    if labels != list(range(len(labels))):
        raise ManifestError(f"{path}: labels must be contiguous from 0, got {labels}")
    names = tuple(doc.get("classes") or [str(k) for k in labels])
    return Manifest(
        name=doc.get("name", path.stem),
        samples=tuple(samples),
        class_names=names,
        homology_dim=int(doc.get("homology_dim", 1)),
        generation=doc.get("generation"),
    )


def compute_pd_file(cloud_path, pd_path, dim: int = 1) -> None:
    write_pd_file(pd_from_cloud(read_cloud(cloud_path), dim), pd_path)
