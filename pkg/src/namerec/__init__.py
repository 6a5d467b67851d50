"""Method-name recommendation from call-graph embeddings.

Pipeline: :mod:`namerec.corpus` extracts method definitions and their
callee names, :mod:`namerec.acg` aggregates them into a call graph over
names, :mod:`namerec.embed` trains one vector per name, and
:mod:`namerec.recommend` ranks names for a new method body by cosine
similarity to the mean of its callees' vectors.
"""

__version__ = "0.1.0"

from .acg import AggregatedCallGraph, UnknownNodeError, build_acg
from .corpus import MethodRecord, SourceUnit, cleanse, extract_methods, scan_corpus
from .embed import EmbeddingTable, TrainConfig, gradient, init_embeddings, loss, train
from .lexicon import Lexicon, nouns_of, split_identifier, verb_of
from .recommend import RecommendationList, cosine, query_embedding, recommend, top_k

__all__ = [
    "AggregatedCallGraph",
    "EmbeddingTable",
    "Lexicon",
    "MethodRecord",
    "RecommendationList",
    "SourceUnit",
    "TrainConfig",
    "UnknownNodeError",
    "build_acg",
    "cleanse",
    "cosine",
    "extract_methods",
    "gradient",
    "init_embeddings",
    "loss",
    "nouns_of",
    "query_embedding",
    "recommend",
    "scan_corpus",
    "split_identifier",
    "top_k",
    "train",
    "verb_of",
]
