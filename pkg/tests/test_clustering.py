import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from persistence_codebooks.clustering import (
    KDTREE_MIN_WORDS,
    CodebookError,
    FitConfig,
    GmmCodebook,
    KMeansCodebook,
    codebook_from_dict,
    codebook_to_dict,
    fit_codebook,
    gaussian_density,
    gmm_fit,
    kmeans_fit,
    load_codebook,
    nearest_codeword,
    responsibilities,
    save_codebook,
)
from persistence_codebooks.diagram import PersistenceDiagram
from persistence_codebooks.sampling import SamplingConfig

from conftest import gmm_codebooks


def _sse(x, centers):
    d = ((x[:, None, :] - centers[None]) ** 2).sum(-1)
    return d.min(axis=1).sum()


def test_kmeans_on_n_points_returns_them():
    x = np.array([[0.0, 0.0], [1.0, 0.5], [3.0, 2.0], [0.2, 4.0]])
    cb = kmeans_fit(x, FitConfig(4, seed=3))
    assert sorted(map(tuple, cb.centers)) == sorted(map(tuple, x))


def test_kmeans_separated_pairs():
    x = np.array([[0, 0], [0, 0.1], [10, 10], [10, 10.1]])
    cb = kmeans_fit(x, FitConfig(2, seed=0))
    got = sorted(map(tuple, np.round(cb.centers, 12)))
    assert got == [(0.0, 0.05), (10.0, 10.05)]


def test_kmeans_beats_random_center_pairs(rng):
    x = np.vstack([rng.normal((0, 0), 0.3, (500, 2)), rng.normal((3, 1), 0.3, (500, 2))])
    sse = _sse(x, kmeans_fit(x, FitConfig(2, seed=1)).centers)
    for _ in range(100):
        assert sse <= _sse(x, x[rng.choice(len(x), 2, replace=False)]) + 1e-9


def test_kmeans_too_few_points():
    with pytest.raises(CodebookError, match="at least 3"):
        kmeans_fit(np.zeros((2, 2)), FitConfig(3))


def test_kmeans_duplicates_do_not_crash():
    cb = kmeans_fit(np.zeros((10, 2)), FitConfig(3))
    assert cb.n_words == 3 and np.all(np.isfinite(cb.centers))


@given(st.integers(0, 2**31), st.integers(1, 8))
def test_kmeans_sse_non_increasing(seed, n):
    x = np.random.default_rng(seed).random((80, 2))
    h = np.array(kmeans_fit(x, FitConfig(n, seed=seed)).sse_history)
    assert np.all(np.diff(h) <= 1e-9 * max(1.0, h[0]))


def test_kmeans_deterministic(rng):
    x = rng.random((300, 2))
    a, b = kmeans_fit(x, FitConfig(7, seed=5)), kmeans_fit(x, FitConfig(7, seed=5))
    assert a.centers.tobytes() == b.centers.tobytes()


def test_nearest_codeword_examples():
    cb = KMeansCodebook(np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 5.0]]))
    assert nearest_codeword((0.51, 0.0), cb) == 1
    assert nearest_codeword((5.0, 5.0), cb) == 2
    assert nearest_codeword((0.5, 0.0), cb) == 0


@given(arrays(np.float64, (300, 2), elements=st.floats(0, 1)), st.integers(0, 2**31))
def test_nearest_codeword_matches_linear_scan(queries, seed):
    centers = np.random.default_rng(seed).random((KDTREE_MIN_WORDS + 36, 2))
    # snap to a coarse grid so exact ties actually occur
    centers = np.round(centers * 8) / 8
    queries = np.round(queries * 16) / 16
    cb = KMeansCodebook(centers)
    d = ((queries[:, None, :] - centers[None]) ** 2).sum(-1)
    np.testing.assert_array_equal(cb.assign(queries), np.argmin(d, axis=1))


def test_kdtree_tie_beyond_candidates():
    # twelve identical centers; the answer must be the lowest index
    centers = np.vstack([np.full((12, 2), 0.5), np.random.default_rng(0).random((KDTREE_MIN_WORDS, 2)) + 3])
    cb = KMeansCodebook(centers)
    assert nearest_codeword((0.5, 0.5), cb) == 0


def test_gmm_single_component(rng):
    x = rng.normal(size=(400, 2)) * (1.0, 3.0) + (2.0, -1.0)
    g = gmm_fit(x, FitConfig(1))
    np.testing.assert_allclose(g.weights, [1.0])
    np.testing.assert_allclose(g.means[0], x.mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(g.variances[0], x.var(axis=0), rtol=1e-10)


def test_gmm_recovers_equal_blobs(rng):
    x = np.vstack([rng.normal((0, 0), 0.2, (500, 2)), rng.normal((5, 5), 0.2, (500, 2))])
    g = gmm_fit(x, FitConfig(2, seed=2))
    np.testing.assert_allclose(g.weights, [0.5, 0.5], atol=0.05)


@given(st.integers(0, 2**31), st.integers(1, 6))
def test_em_log_likelihood_non_decreasing(seed, n):
    x = np.random.default_rng(seed).random((120, 2))
    h = np.array(gmm_fit(x, FitConfig(n, seed=seed)).log_likelihood_history)
    assert np.all(np.diff(h) >= -1e-9)


def test_gmm_variance_floor_on_duplicates():
    x = np.vstack([np.zeros((20, 2)), np.ones((20, 2))])
    g = gmm_fit(x, FitConfig(2))
    floor = 1e-4 * x.var(axis=0)
    assert np.all(g.variances >= floor - 1e-18)


def test_gmm_validation():
    with pytest.raises(CodebookError, match="sum to one"):
        GmmCodebook(np.array([0.5, 0.4]), np.zeros((2, 2)), np.ones((2, 2)))
    with pytest.raises(CodebookError, match="positive"):
        GmmCodebook(np.array([1.0]), np.zeros((1, 2)), np.array([[1.0, 0.0]]))


def _standard(mu=(0.0, 0.0), var=(1.0, 1.0)):
    return GmmCodebook(np.array([1.0]), np.array([mu]), np.array([var]))


def test_density_at_mean():
    assert gaussian_density((0, 0), _standard(), 0) == pytest.approx(1 / (2 * np.pi), abs=1e-15)
    assert gaussian_density((0, 0), _standard(), 0) == pytest.approx(0.1591549, abs=1e-7)


def test_density_one_std_away():
    g = _standard(var=(4.0, 1.0))
    expected = np.exp(-0.5) / (2 * np.pi * 2.0)
    assert gaussian_density((2.0, 0.0), g, 0) == pytest.approx(expected, rel=1e-14)


@given(gmm_codebooks(), st.floats(-1, 2), st.floats(-1, 2))
def test_density_matches_product_of_1d_normals(g, x, y):
    for i in range(g.n_words):
        (mb, mp), (sb, sp) = g.means[i], g.stds[i]
        oracle = (np.exp(-0.5 * ((x - mb) / sb) ** 2) / (np.sqrt(2 * np.pi) * sb)
                  * np.exp(-0.5 * ((y - mp) / sp) ** 2) / (np.sqrt(2 * np.pi) * sp))
        assert gaussian_density((x, y), g, i) == pytest.approx(oracle, rel=1e-10, abs=1e-300)


def test_responsibilities_single_component():
    np.testing.assert_array_equal(responsibilities((3.0, 4.0), _standard()), [1.0])


def test_responsibilities_far_apart():
    g = GmmCodebook(np.array([0.5, 0.5]), np.array([[0.0, 0.0], [10.0, 0.0]]), np.ones((2, 2)))
    np.testing.assert_allclose(responsibilities((0.0, 0.0), g), [1.0, 0.0], atol=1e-6)


@given(gmm_codebooks(), st.floats(-50, 50), st.floats(-50, 50))
def test_responsibilities_sum_to_one(g, x, y):
    assert abs(responsibilities((x, y), g).sum() - 1.0) <= 1e-12


def test_fit_codebook_attaches_bounds(rng):
    ds = [PersistenceDiagram(rng.random((20, 2))) for _ in range(5)]
    cb = fit_codebook(ds, "kmeans", 4, SamplingConfig(n=50, weighted=True, seed=1))
    assert cb.bounds is not None and cb.bounds.a < cb.bounds.b
    with pytest.raises(ValueError, match="unknown codebook kind"):
        fit_codebook(ds, "svm", 4)


@pytest.mark.parametrize("kind", ["kmeans", "gmm"])
def test_codebook_file_round_trip(tmp_path, rng, kind):
    ds = [PersistenceDiagram(rng.random((30, 2))) for _ in range(3)]
    cb = fit_codebook(ds, kind, 5, SamplingConfig(n=60, weighted=True, seed=4))
    p = tmp_path / "cb.json"
    save_codebook(cb, p)
    back = load_codebook(p)
    assert codebook_to_dict(back) == codebook_to_dict(cb)
    first = p.read_bytes()
    save_codebook(back, p)
    assert p.read_bytes() == first


def test_codebook_document_errors():
    with pytest.raises(CodebookError, match="not a codebook"):
        codebook_from_dict({"format": "other"})
    doc = codebook_to_dict(KMeansCodebook(np.zeros((2, 2))))
    doc["version"] = 99
    with pytest.raises(CodebookError, match="version"):
        codebook_from_dict(doc)
