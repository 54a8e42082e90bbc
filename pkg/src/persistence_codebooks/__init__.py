"""Fixed-length vectorizations of persistence diagrams via codebooks.

The pipeline: consolidate training diagrams, subsample (optionally weighted by
persistence), fit a k-means or GMM codebook, then encode every diagram with one
of six bag-of-words style encodings.
"""

from .diagram import (
    ConsolidatedDiagram,
    PersistenceDiagram,
    consolidate,
    from_birth_death,
    read_pd_file,
    write_pd_file,
)
from .metrics import w1_bruteforce, w1_distance, w1_matching
from .sampling import SamplingConfig, WeightBounds, quantile_bounds, subsample, weight
from .clustering import (
    FitConfig,
    GmmCodebook,
    KMeansCodebook,
    gaussian_density,
    gmm_fit,
    kmeans_fit,
    load_codebook,
    nearest_codeword,
    responsibilities,
    save_codebook,
)
from .encode import (
    Encoding,
    FeatureVector,
    encode,
    encode_pbow,
    encode_pfv,
    encode_pvlad,
    encode_spbow,
    encode_spvlad,
    encode_wpbow,
    normalize,
)

__version__ = "0.1.0"
