"""Quality-based filtering and analysis of parallel MT training corpora."""

__version__ = "0.1.0"

from .corpus import (
    CorpusStats,
    FilterDecision,
    ScoreRecord,
    SentencePair,
    compute_stats,
    length_filter,
    read_corpus,
    tokenize,
    write_corpus,
)
from .thresholding import (
    Decisions,
    ScoreTable,
    median_split,
    random_select,
    select_top_fraction,
)

__all__ = [
    "CorpusStats",
    "Decisions",
    "FilterDecision",
    "ScoreRecord",
    "ScoreTable",
    "SentencePair",
    "compute_stats",
    "length_filter",
    "median_split",
    "random_select",
    "read_corpus",
    "select_top_fraction",
    "tokenize",
    "write_corpus",
]
