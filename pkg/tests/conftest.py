import numpy as np
import pytest
from hypothesis import settings, strategies as st
from hypothesis.extra.numpy import arrays

from persistence_codebooks import GmmCodebook, KMeansCodebook, PersistenceDiagram

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


unit = st.floats(0.0, 1.0, allow_nan=False, allow_infinity=False)


@st.composite
def diagrams(draw, min_size=0, max_size=8):
    k = draw(st.integers(min_size, max_size))
    pts = draw(arrays(np.float64, (k, 2), elements=unit))
    return PersistenceDiagram(pts)


@st.composite
def kmeans_codebooks(draw, max_words=6):
    n = draw(st.integers(1, max_words))
    centers = draw(arrays(np.float64, (n, 2), elements=unit))
    return KMeansCodebook(centers)


@st.composite
def gmm_codebooks(draw, max_words=5):
    n = draw(st.integers(1, max_words))
    raw = draw(arrays(np.float64, n, elements=st.floats(0.1, 1.0)))
    means = draw(arrays(np.float64, (n, 2), elements=unit))
    stds = draw(arrays(np.float64, (n, 2), elements=st.floats(0.05, 0.5)))
    return GmmCodebook(raw / raw.sum(), means, stds**2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
