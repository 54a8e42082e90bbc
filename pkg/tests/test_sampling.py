import numpy as np
import pytest
from hypothesis import given, strategies as st

from persistence_codebooks.diagram import PersistenceDiagram
from persistence_codebooks.sampling import (
    SamplingConfig,
    WeightBounds,
    quantile_bounds,
    subsample,
    weight,
)


@pytest.mark.parametrize("t, expected", [(-1, 0.0), (0.5, 0.5), (2, 1.0), (0, 0.0), (1, 1.0)])
def test_weight_ramp(t, expected):
    assert weight(t, WeightBounds(0.0, 1.0)) == expected


def test_weight_exponent():
    assert weight(0.5, WeightBounds(0, 1), exponent=2.0) == 0.25


def test_weight_vectorized():
    np.testing.assert_array_equal(weight(np.array([-1, 0.25, 3]), WeightBounds(0, 1)), [0, 0.25, 1])


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-3, 3), st.floats(0.01, 3))
def test_weight_monotone_and_lipschitz(s, t, a, width):
    bounds = WeightBounds(a, a + width)
    lo, hi = sorted((s, t))
    assert weight(lo, bounds) <= weight(hi, bounds)
    assert abs(weight(s, bounds) - weight(t, bounds)) <= abs(s - t) / width + 1e-12


def test_bounds_validation():
    with pytest.raises(ValueError):
        WeightBounds(1.0, 1.0)


def test_quantile_bounds_grid():
    D = PersistenceDiagram(np.column_stack([np.zeros(101), np.arange(101.0)]))
    b = quantile_bounds(D)
    assert (b.a, b.b) == pytest.approx((5.0, 95.0), abs=1e-12)


def test_quantile_bounds_four_values():
    # linear interpolation at rank 0.05*3 = 0.15 and 0.95*3 = 2.85
    pers = np.array([1.0, 2.0, 3.0, 4.0])
    b = quantile_bounds(np.column_stack([np.zeros(4), pers]))
    rank = lambda q: pers[int(q * 3)] + (q * 3 - int(q * 3)) * (pers[int(q * 3) + 1] - pers[int(q * 3)])
    assert b.a == pytest.approx(rank(0.05), abs=1e-12) and b.a == pytest.approx(1.15)
    assert b.b == pytest.approx(rank(0.95), abs=1e-12) and b.b == pytest.approx(3.85)


def test_quantile_bounds_degenerate():
    b = quantile_bounds(np.column_stack([np.zeros(7), np.full(7, 3.0)]))
    assert b.a == 3.0
    assert 3.0 < b.b <= 3.0 + 4 * np.finfo(float).eps * 3.0


def test_subsample_returns_everything_when_small():
    D = np.random.default_rng(0).random((500, 2))
    out = subsample(D, SamplingConfig(n=10000, weighted=True))
    np.testing.assert_array_equal(out, D)


def test_single_positive_weight_is_always_picked():
    pts = np.column_stack([np.zeros(10), np.r_[np.zeros(9), 1.0]])
    for seed in range(20):
        out = subsample(pts, SamplingConfig(n=1, weighted=True, seed=seed), WeightBounds(0.5, 1.0))
        np.testing.assert_array_equal(out, [[0.0, 1.0]])


def test_all_zero_weights_fall_back_to_uniform():
    k, n, trials = 10, 3, 100_000
    pts = np.column_stack([np.arange(k, dtype=float), np.zeros(k)])
    counts = np.zeros(k)
    rng = np.random.default_rng(0)
    for seed in rng.integers(0, 2**32, size=trials):
        out = subsample(pts, SamplingConfig(n=n, weighted=True, seed=int(seed)), WeightBounds(1.0, 2.0))
        counts[out[:, 0].astype(int)] += 1
    p = n / k
    sigma = np.sqrt(trials * p * (1 - p))
    assert np.all(np.abs(counts - trials * p) <= 3 * sigma)


def test_weighted_draw_prefers_persistent_points():
    rng = np.random.default_rng(1)
    pts = np.column_stack([rng.random(2000), rng.random(2000)])
    cfg = SamplingConfig(n=200, weighted=True, seed=3)
    out = subsample(pts, cfg)
    assert out[:, 1].mean() > pts[:, 1].mean() + 0.1


@given(st.integers(1, 60), st.integers(0, 2**31), st.booleans())
def test_subsample_is_a_submultiset(n, seed, weighted):
    pts = np.random.default_rng(seed).random((40, 2))
    out = subsample(pts, SamplingConfig(n=n, weighted=weighted, seed=seed))
    assert len(out) == min(n, 40)
    idx = [np.flatnonzero((pts == row).all(axis=1))[0] for row in out]
    assert len(set(idx)) == len(idx)


def test_subsample_deterministic():
    pts = np.random.default_rng(2).random((300, 2))
    cfg = SamplingConfig(n=50, weighted=True, seed=9)
    np.testing.assert_array_equal(subsample(pts, cfg), subsample(pts, cfg))


def test_config_validation():
    with pytest.raises(ValueError):
        SamplingConfig(n=0)
    with pytest.raises(ValueError):
        SamplingConfig(exponent=0)
