"""Featurization: tokenization, tf-idf, embedding pooling, citation counts, PCA."""

from .citations import (
    build_code_space,
    build_pair_space,
    onehop_cpc_counts,
    twohop_pair_counts,
)
from .embeddings import EmbeddingTable, cpc_avg_embedding, mean_embedding
from .pca import PcaProjection, pca_fit, pca_project
from .sparse import SparseVector
from .text import (
    STOPWORD_SET_ID,
    Vocabulary,
    build_vocabulary,
    load_stopwords,
    tfidf_vector,
    tokenize,
)

__all__ = [
    "EmbeddingTable",
    "PcaProjection",
    "SparseVector",
    "STOPWORD_SET_ID",
    "Vocabulary",
    "build_code_space",
    "build_pair_space",
    "build_vocabulary",
    "cpc_avg_embedding",
    "load_stopwords",
    "mean_embedding",
    "onehop_cpc_counts",
    "pca_fit",
    "pca_project",
    "tfidf_vector",
    "tokenize",
    "twohop_pair_counts",
]
