import subprocess
import sys

import numpy as np
import pytest

from persistence_codebooks.cli import EXIT_FORMAT, EXIT_MISSING, EXIT_USAGE, EXIT_VALUE, main
from persistence_codebooks.diagram import PersistenceDiagram, write_pd_file
from persistence_codebooks.encode import file_checksum, read_features


@pytest.fixture
def pd_dir(tmp_path):
    d = tmp_path / "pds"
    d.mkdir()
    rng = np.random.default_rng(0)
    for i in range(6):
        write_pd_file(PersistenceDiagram(rng.random((30, 2))), d / f"d{i}.txt")
    return d


def run(args, capsys):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_fit_is_reproducible(tmp_path, pd_dir, capsys):
    a, b = tmp_path / "a.model", tmp_path / "b.model"
    for out in (a, b):
        code, _, err = run(["fit", "--kind", "kmeans", "--words", "5", "--subsample", "100",
                            "--weighted", "--seed", "7", "--pds", pd_dir, "--out", out], capsys)
        assert code == 0, err
    assert a.read_bytes() == b.read_bytes()


def test_encode_pfv_dimension(tmp_path, pd_dir, capsys):
    model = tmp_path / "g.model"
    run(["fit", "--kind", "gmm", "--words", "3", "--seed", "1", "--pds", pd_dir, "--out", model], capsys)
    out = tmp_path / "f.txt"
    code, _, err = run(["encode", "--codebook", model, "--encoding", "pfv",
                        "--pd", pd_dir / "d0.txt", "--out", out], capsys)
    assert code == 0, err
    meta, rows = read_features(out)
    assert rows.shape == (1, 12)
    assert meta["codebook_sha256"] == file_checksum(model) and meta["normalized"]


def test_encode_directory_in_parallel(tmp_path, pd_dir, capsys):
    model = tmp_path / "k.model"
    run(["fit", "--kind", "kmeans", "--words", "4", "--seed", "2", "--pds", pd_dir, "--out", model], capsys)
    outs = []
    for jobs in (1, 2):
        out = tmp_path / f"f{jobs}.txt"
        code, _, err = run(["encode", "--codebook", model, "--encoding", "pvlad", "--pd", pd_dir,
                            "--jobs", jobs, "--out", out], capsys)
        assert code == 0, err
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert read_features(tmp_path / "f1.txt")[1].shape == (6, 8)


def test_encode_rejects_wrong_codebook_kind(tmp_path, pd_dir, capsys):
    model = tmp_path / "k.model"
    run(["fit", "--kind", "kmeans", "--words", "2", "--seed", "2", "--pds", pd_dir, "--out", model], capsys)
    code, _, err = run(["encode", "--codebook", model, "--encoding", "spbow", "--pd", pd_dir], capsys)
    assert code == EXIT_VALUE and "needs a gmm codebook" in err


def test_w1_identical_files_prints_zero(pd_dir, capsys):
    code, out, _ = run(["w1", pd_dir / "d0.txt", pd_dir / "d0.txt"], capsys)
    assert code == 0 and out.strip() == "0"


def test_w1_full_precision(tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    a.write_text("0 0.1\n")
    b.write_text("")
    code, out, _ = run(["w1", a, b], capsys)
    assert float(out) == 0.1 and out.strip() == "0.10000000000000001"


def test_error_kinds_are_distinct(tmp_path, pd_dir, capsys):
    code, _, err_missing = run(["w1", tmp_path / "nope.txt", pd_dir / "d0.txt"], capsys)
    assert code == EXIT_MISSING and "file not found" in err_missing
    bad = tmp_path / "bad.txt"
    bad.write_text("3 1\n")
    code, _, err_format = run(["w1", bad, pd_dir / "d0.txt"], capsys)
    assert code == EXIT_FORMAT and "malformed diagram" in err_format
    broken = tmp_path / "broken.model"
    broken.write_text("{not json")
    code, _, err_model = run(["encode", "--codebook", broken, "--encoding", "pbow", "--pd", pd_dir], capsys)
    assert code == EXIT_FORMAT and "malformed codebook" in err_model
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--bogus"])
    assert exc.value.code == EXIT_USAGE
    assert "usage error" in capsys.readouterr().err
    assert len({err_missing, err_format, err_model}) == 3


def test_fit_too_many_words(tmp_path, pd_dir, capsys):
    code, _, err = run(["fit", "--kind", "kmeans", "--words", "1000", "--seed", "0",
                        "--pds", pd_dir / "d0.txt", "--out", tmp_path / "m"], capsys)
    assert code == EXIT_VALUE and "cannot fit codebook" in err


def test_pipeline_end_to_end_is_byte_identical(tmp_path, capsys):
    def pipeline(root):
        data = root / "data"
        assert run(["gen-synthetic", "--classes", "circle,clusters", "--clouds-per-class", "5",
                    "--points", "20", "--seed", "3", "--out", data], capsys)[0] == 0
        assert run(["fit", "--kind", "gmm", "--words", "4", "--seed", "5", "--weighted",
                    "--pds", data / "pds", "--out", root / "cb.model"], capsys)[0] == 0
        assert run(["encode", "--codebook", root / "cb.model", "--encoding", "spvlad",
                    "--pd", data / "pds", "--out", root / "feat.txt"], capsys)[0] == 0
        code, _, err = run(["eval", "--manifest", data / "manifest.json", "--encoding", "pbow,spbow",
                            "--sizes", "3,5", "--reps", "2", "--seed", "1", "--subsample", "200",
                            "--report", root / "report.csv", "--no-timings"], capsys)
        assert code == 0, err
        return [(root / p).read_bytes() for p in ("cb.model", "feat.txt", "report.csv")]

    (tmp_path / "one").mkdir()
    (tmp_path / "two").mkdir()
    assert pipeline(tmp_path / "one") == pipeline(tmp_path / "two")
    report = (tmp_path / "one" / "report.csv").read_text().splitlines()
    assert len(report) == 1 + 4


def test_compute_pd_single_and_directory(tmp_path, capsys):
    run(["gen-synthetic", "--classes", "torus", "--clouds-per-class", "2", "--points", "15",
         "--seed", "0", "--no-pds", "--out", tmp_path / "d"], capsys)
    code, _, err = run(["compute-pd", "--dim", "1", "--in", tmp_path / "d" / "clouds" / "torus_000.txt",
                        "--out", tmp_path / "one.txt"], capsys)
    assert code == 0, err
    code, _, err = run(["compute-pd", "--in", tmp_path / "d" / "clouds", "--out", tmp_path / "all",
                        "--jobs", "2"], capsys)
    assert code == 0, err
    assert (tmp_path / "all" / "torus_000.txt").read_bytes() == (tmp_path / "one.txt").read_bytes()


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "persistence_codebooks.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "gen-synthetic" in proc.stdout
