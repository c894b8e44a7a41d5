"""Acoustic word embeddings and query-by-example keyword search."""

from .corpus import (
    Corpus,
    FeatureSequence,
    NormalizationScope,
    WordAlignment,
    WordSegment,
    extract_segments,
    load_corpus,
    normalize,
    sample_pairs,
    write_corpus,
)
from .embedders import (
    Awe,
    CaeRnn,
    MeanpoolEmbedder,
    RnnConfig,
    RnnEmbedder,
    SubsampleConfig,
    SubsampleEmbedder,
    TransformerConfig,
    TransformerEmbedder,
    load_embedder,
    meanpool,
    subsample,
)
from .losses import nt_xent_loss, reconstruction_loss, same_different_ap
from .training import ContrastiveConfig, PairBatch, train
from .dtw import DtwResult, dtw_cost, dtw_search
from .kws import (
    Detection,
    KeywordTemplateSet,
    RankedDetections,
    WindowConfig,
    dtw_search_all,
    generate_windows,
    score_keyword,
    search,
    template_sets,
)
from .metrics import GroundTruth, MetricsReport, average_precision, evaluate, precision_at

__version__ = "0.1.0"
