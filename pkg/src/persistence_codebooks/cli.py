"""Command-line front end: ``persistence-codebooks <subcommand> ...``.

Exit codes: 0 success, 2 usage error, 3 missing file, 4 malformed input
file, 5 invalid argument value or model mismatch.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .clustering import CodebookError, FitConfig, fit_codebook, load_codebook, save_codebook
from .dataset import ManifestError, build_synthetic_dataset, compute_pd_file, load_manifest
from .diagram import DiagramError, read_pd_file
from .encode import Encoding, encode, file_checksum, write_features
from .evaluation import run_experiment
from .homology import ShapeClass
from .metrics import w1_distance
from .sampling import SamplingConfig

EXIT_USAGE, EXIT_MISSING, EXIT_FORMAT, EXIT_VALUE = 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_VALUE):
        super().__init__(message)
        self.code = code


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise CliError(f"file not found: {path}", EXIT_MISSING)
    return p


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return vals


def _pd_files(paths: list[str]) -> list[Path]:
    """Expand directories to their sorted ``*.txt`` files."""
    out = []
    for p in map(_existing, paths):
        out.extend(sorted(p.glob("*.txt")) if p.is_dir() else [p])
    if not out:
        raise CliError(f"no diagram files found in {', '.join(paths)}", EXIT_MISSING)
    return out


def _read_pds(files):
    try:
        return [read_pd_file(f) for f in files]
    except (DiagramError, ValueError) as exc:
        raise CliError(f"malformed diagram file: {exc}", EXIT_FORMAT) from None


def _load_codebook(path):
    try:
        return load_codebook(_existing(path))
    except (CodebookError, KeyError, ValueError) as exc:
        raise CliError(f"malformed codebook file {path}: {exc}", EXIT_FORMAT) from None


def cmd_gen_synthetic(args) -> None:
    classes = list(ShapeClass) if args.classes == "all" else args.classes.split(",")
    try:
        classes = [ShapeClass(c) for c in classes]
    except ValueError:
        valid = ", ".join(s.value for s in ShapeClass)
        raise CliError(f"unknown shape class in {args.classes!r}; choose from: {valid}") from None
    dim = None if args.no_pds else args.dim
    path = build_synthetic_dataset(
        args.out, classes, args.clouds_per_class, args.points, args.noise, args.seed, dim, args.jobs,
    )
    print(path)


def _compute_one(pair):
    src, dst, dim = pair
    compute_pd_file(src, dst, dim)


def cmd_compute_pd(args) -> None:
    src = _existing(args.input)
    if src.is_dir():
        dst = Path(args.out)
        dst.mkdir(parents=True, exist_ok=True)
        jobs = [(f, dst / f.name, args.dim) for f in sorted(src.glob("*.txt"))]
    else:
        jobs = [(src, Path(args.out), args.dim)]
    try:
        if args.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                list(pool.map(_compute_one, jobs))
        else:
            for j in jobs:
                _compute_one(j)
    except (ValueError, IndexError) as exc:
        raise CliError(f"malformed point cloud file: {exc}", EXIT_FORMAT) from None


def cmd_fit(args) -> None:
    diagrams = _read_pds(_pd_files(args.pds))
    sampling = SamplingConfig(n=args.subsample, weighted=args.weighted, seed=args.seed,
                              exponent=args.weight_exponent)
    fit = FitConfig(n_components=args.words, max_iter=args.max_iter, seed=args.seed)
    try:
        cb = fit_codebook(diagrams, args.kind, args.words, sampling, fit)
    except (CodebookError, ValueError) as exc:
        raise CliError(f"cannot fit codebook: {exc}") from None
    save_codebook(cb, args.out)


def _encode_rows(task):
    cb_path, enc, normalized, files = task
    cb = load_codebook(cb_path)
    return [encode(read_pd_file(f), cb, enc, normalized).values for f in files]


def cmd_encode(args) -> None:
    enc = Encoding(args.encoding)
    cb = _load_codebook(args.codebook)
    if cb.kind != enc.codebook_kind:
        raise CliError(f"encoding {enc.value} needs a {enc.codebook_kind} codebook, "
                       f"but {args.codebook} holds a {cb.kind} codebook")
    files = _pd_files(args.pd)
    _read_pds(files)  # validate up front so workers never see bad input
    normalized = not args.no_normalize
    if args.jobs > 1 and len(files) > 1:
        chunks = [files[i::args.jobs] for i in range(args.jobs)]
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            parts = list(pool.map(_encode_rows, [(args.codebook, enc, normalized, c) for c in chunks]))
        rows = [None] * len(files)
        for j, part in enumerate(parts):
            rows[j::args.jobs] = part
    else:
        rows = _encode_rows((args.codebook, enc, normalized, files))
    write_features(
        None if args.out == "-" else args.out, np.vstack(rows), enc, cb.n_words, normalized,
        file_checksum(args.codebook), stream=sys.stdout,
    )


def cmd_w1(args) -> None:
    a, b = _read_pds([_existing(args.a), _existing(args.b)])
    print(f"{w1_distance(a, b):.17g}")


def cmd_eval(args) -> None:
    try:
        manifest = load_manifest(args.manifest)
    except ManifestError as exc:
        code = EXIT_MISSING if "not found" in str(exc) or "missing file" in str(exc) else EXIT_FORMAT
        raise CliError(f"bad manifest: {exc}", code) from None
    diagrams = _read_pds([s.pd for s in manifest.samples])
    weighted = {"yes": (True,), "no": (False,), "both": (False, True)}[args.weighted]
    report = run_experiment(
        diagrams, manifest.labels, [Encoding(e) for e in args.encoding.split(",")],
        args.sizes, args.reps, args.seed, weighted, args.subsample,
        args.train_fraction,
    )
    text = report.to_csv(None if args.report == "-" else args.report, timings=not args.no_timings)
    if args.report == "-":
        sys.stdout.write(text)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: usage error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="persistence-codebooks",
                description="Codebook vectorization of persistence diagrams.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    encodings = [e.value for e in Encoding]

    g = sub.add_parser("gen-synthetic", help="write a synthetic point-cloud dataset and manifest")
    g.add_argument("--classes", default="all", help="comma-separated shape names or 'all'")
    g.add_argument("--clouds-per-class", type=int, default=50)
    g.add_argument("--points", type=int, default=100)
    g.add_argument("--noise", type=float, default=0.1)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--dim", type=int, default=1, help="homology dimension of the diagrams")
    g.add_argument("--no-pds", action="store_true", help="write clouds only")
    g.add_argument("--jobs", type=int, default=1)
    g.set_defaults(func=cmd_gen_synthetic)

    c = sub.add_parser("compute-pd", help="persistence diagram of a cloud file or directory")
    c.add_argument("--dim", type=int, default=1)
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--jobs", type=int, default=1)
    c.set_defaults(func=cmd_compute_pd)

    f = sub.add_parser("fit", help="fit a codebook on a directory of diagrams")
    f.add_argument("--kind", choices=["kmeans", "gmm"], required=True)
    f.add_argument("--words", type=int, default=50)
    f.add_argument("--subsample", type=int, default=10000)
    f.add_argument("--weighted", action=argparse.BooleanOptionalAction, default=False)
    f.add_argument("--weight-exponent", type=float, default=1.0)
    f.add_argument("--max-iter", type=int, default=300)
    f.add_argument("--seed", type=int, required=True)
    f.add_argument("--pds", nargs="+", required=True)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("encode", help="encode diagrams against a codebook")
    e.add_argument("--codebook", required=True)
    e.add_argument("--encoding", choices=encodings, required=True)
    e.add_argument("--pd", nargs="+", required=True)
    e.add_argument("--out", default="-")
    e.add_argument("--no-normalize", action="store_true")
    e.add_argument("--jobs", type=int, default=1)
    e.set_defaults(func=cmd_encode)

    w = sub.add_parser("w1", help="1-Wasserstein distance between two diagram files")
    w.add_argument("a")
    w.add_argument("b")
    w.set_defaults(func=cmd_w1)

    v = sub.add_parser("eval", help="classification experiment over a manifest")
    v.add_argument("--manifest", required=True)
    v.add_argument("--encoding", default="pbow", help="comma-separated encodings")
    v.add_argument("--sizes", type=_int_list, default=[50])
    v.add_argument("--reps", type=int, default=5)
    v.add_argument("--seed", type=int, required=True)
    v.add_argument("--weighted", choices=["yes", "no", "both"], default="yes")
    v.add_argument("--subsample", type=int, default=10000)
    v.add_argument("--train-fraction", type=float, default=0.8)
    v.add_argument("--report", default="-")
    v.add_argument("--no-timings", action="store_true",
                   help="omit timing columns so reruns are byte-identical")
    v.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "encoding", None) and args.command == "eval":
        bad = [t for t in args.encoding.split(",") if t not in {e.value for e in Encoding}]
        if bad:
            print(f"persistence-codebooks: usage error: unknown encoding {bad[0]!r}", file=sys.stderr)
            return EXIT_USAGE
    try:
        args.func(args)
    except CliError as exc:
        print(f"persistence-codebooks: error: {exc}", file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        print(f"persistence-codebooks: error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_MISSING
    except (OSError, ValueError) as exc:
        print(f"persistence-codebooks: error: {exc}", file=sys.stderr)
        return EXIT_VALUE
    return 0


if __name__ == "__main__":
    sys.exit(main())
