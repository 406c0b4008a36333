"""
LexRank centrality and query narrative expansion for short queries.

    CentralityConfig                                    frozen dataclass: similarity_threshold, damping,
                                                        epsilon, max_iterations
    similarity_graph(sentences, cfg)                    -> np.ndarray   row-stochastic transition matrix
    lexrank_scores(sentences, cfg)                      -> list[float]  sums to 1
    expand_query(query, cluster_sentences, word_budget, cfg) -> str

The graph links distinct sentences whose TF-IDF cosine reaches the threshold
(no self loops); a sentence with no neighbours jumps uniformly. Scores come
from damped power iteration p <- d * M^T p + (1 - d) / n.
"""
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from config import (
    EXPANSION_WORD_BUDGET,
    LEXRANK_DAMPING,
    LEXRANK_EPSILON,
    LEXRANK_MAX_ITERATIONS,
    LEXRANK_THRESHOLD,
)
from text import TokenSeq, compute_idf, cosine, tokenize, vectorize_tfidf

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CentralityConfig:
    similarity_threshold: float = LEXRANK_THRESHOLD
    damping: float = LEXRANK_DAMPING
    epsilon: float = LEXRANK_EPSILON
    max_iterations: int = LEXRANK_MAX_ITERATIONS

    def __post_init__(self) -> None:
        if not 0.0 <= self.similarity_threshold < 1.0:
            raise ValueError(f"similarity_threshold must be in [0, 1), got {self.similarity_threshold}")
        if not 0.0 < self.damping < 1.0:
            raise ValueError(f"damping must be in (0, 1), got {self.damping}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


def similarity_graph(sentences: Sequence[TokenSeq], cfg: CentralityConfig = CentralityConfig()) -> np.ndarray:
    n = len(sentences)
    idf = compute_idf(s.words for s in sentences)
    vecs = [vectorize_tfidf(s, idf) for s in sentences]
    adj = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            sim = cosine(vecs[i], vecs[j])
            if sim >= cfg.similarity_threshold and sim > 0.0:
                adj[i, j] = adj[j, i] = sim
    row_sums = adj.sum(axis=1)
    m = np.full((n, n), 1.0 / n)
    linked = row_sums > 0
    m[linked] = adj[linked] / row_sums[linked, None]
    return m


def lexrank_scores(sentences: Sequence[TokenSeq], cfg: CentralityConfig = CentralityConfig()) -> list[float]:
    if not sentences:
        raise ValueError("lexrank_scores needs at least one sentence")
    n = len(sentences)
    m = similarity_graph(sentences, cfg)
    p = np.full(n, 1.0 / n)
    for it in range(cfg.max_iterations):
        nxt = cfg.damping * (m.T @ p) + (1.0 - cfg.damping) / n
        delta = float(np.max(np.abs(nxt - p)))
        p = nxt
        if delta < cfg.epsilon:
            break
    else:
        logger.debug(f"LexRank stopped at max_iterations={cfg.max_iterations} (delta={delta:.2e})")
    p = p / p.sum()
    return [float(x) for x in p]


def expand_query(
    query: str,
    cluster_sentences: Sequence[str],
    word_budget: int = EXPANSION_WORD_BUDGET,
    cfg: CentralityConfig = CentralityConfig(),
) -> str:
    """Append the most central sentences that fit in `word_budget` words.

    Sentences that do not fit are skipped, not treated as a stop signal.
    """
    if word_budget < 1:
        raise ValueError(f"word_budget must be >= 1, got {word_budget}")
    if not cluster_sentences:
        return query
    toks = [tokenize(s) for s in cluster_sentences]
    scores = lexrank_scores(toks, cfg)
    order = sorted(range(len(toks)), key=lambda i: (-scores[i], i))

    selected, used = [], 0
    for i in order:
        wc = toks[i].word_count
        if wc and used + wc <= word_budget:
            selected.append(cluster_sentences[i])
            used += wc
    if not selected:
        return query
    return query + " " + " ".join(selected)
