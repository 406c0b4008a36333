"""
Retrieval metrics, budgeted extracts and non-learned baselines.

    ExtractBudget                                      frozen dataclass: word_budget, redundancy_threshold

    recall_at_k(ranked, references, k)                 -> float   mean ROUGE-2 recall of the top-k concatenation
    assemble_extract(ranked, budget, idf=None)         -> list[str]
    evaluate_extract(sentences, references, stem=False) -> dict[variant, RougeScore]
    baseline_rank(method, query, documents, seed=0, centrality=CentralityConfig())
                                                       -> RankedEvidence
    gold_upper_bound(references, stem=False)           -> dict[variant, RougeScore]

Baselines: 'termfreq' (shared content words weighted by their cluster
frequency), 'lead' (sentences of the last, i.e. most recent, document
first), 'lexrank' (query-agnostic centrality) and 'random' (seeded
permutation).
"""
import logging
import random
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from config import EXTRACT_WORD_BUDGET, REDUNDANCY_THRESHOLD
from expansion import CentralityConfig, lexrank_scores
from ranker import RankedEvidence, rank_by_scores
from rouge import RougeScore, multi_ref_f1, rouge_n
from text import SparseVector, TokenSeq, compute_idf, cosine, tokenize, truncate_words, vectorize_tfidf
from umr import MASK_TOKEN, load_slot_lexicon, umr_tokens

logger = logging.getLogger(__name__)

VARIANTS = ("R1", "R2", "SU4")
BASELINES = ("termfreq", "lead", "lexrank", "random")


@dataclass(frozen=True)
class ExtractBudget:
    word_budget: int = EXTRACT_WORD_BUDGET
    redundancy_threshold: float = REDUNDANCY_THRESHOLD

    def __post_init__(self) -> None:
        if self.word_budget < 1:
            raise ValueError(f"word_budget must be >= 1, got {self.word_budget}")
        if not 0.0 < self.redundancy_threshold <= 1.0:
            raise ValueError(f"redundancy_threshold must be in (0, 1], got {self.redundancy_threshold}")


def _concat(texts: Sequence[str]) -> TokenSeq:
    return TokenSeq(tuple(t for s in texts for t in tokenize(s).tokens))


def recall_at_k(ranked: RankedEvidence, references: Sequence[TokenSeq], k: int) -> float:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not references:
        raise ValueError("recall_at_k needs at least one reference")
    top = _concat([r.sentence for r in ranked[:k]])
    return sum(rouge_n(2, ref, top).recall for ref in references) / len(references)


def assemble_extract(
    ranked: RankedEvidence,
    budget: ExtractBudget = ExtractBudget(),
    idf: dict[str, float] | None = None,
) -> list[str]:
    """Walk the ranking, skip redundant sentences, cut the last one at the word budget."""
    toks = [tokenize(r.sentence) for r in ranked]
    if idf is None:
        idf = compute_idf(t.words for t in toks)

    kept: list[str] = []
    kept_vecs: list[SparseVector] = []
    used = 0
    for r, t in zip(ranked, toks):
        if t.word_count == 0:
            continue
        vec = vectorize_tfidf(t, idf)
        if any(cosine(vec, other) >= budget.redundancy_threshold for other in kept_vecs):
            continue
        if used + t.word_count <= budget.word_budget:
            kept.append(r.sentence)
            kept_vecs.append(vec)
            used += t.word_count
            continue
        remaining = budget.word_budget - used
        if remaining > 0:
            kept.append(truncate_words(r.sentence, remaining))
        break
    return kept


def evaluate_extract(
    sentences: Sequence[str],
    references: Sequence[TokenSeq],
    stem: bool = False,
) -> dict[str, RougeScore]:
    candidate = _concat(sentences)
    return {v: multi_ref_f1(references, candidate, v, stem) for v in VARIANTS}


def gold_upper_bound(references: Sequence[TokenSeq], stem: bool = False) -> dict[str, RougeScore]:
    """Each reference scored against the remaining ones, averaged over references."""
    if len(references) < 2:
        raise ValueError("gold_upper_bound needs at least two references")
    out = {}
    for v in VARIANTS:
        scores = [
            multi_ref_f1([r for j, r in enumerate(references) if j != i], ref, v, stem)
            for i, ref in enumerate(references)
        ]
        k = len(scores)
        out[v] = RougeScore(
            recall=sum(s.recall for s in scores) / k,
            precision=sum(s.precision for s in scores) / k,
            f1=sum(s.f1 for s in scores) / k,
        )
    return out


def _positional(sentences: list[str], order: list[int]) -> RankedEvidence:
    n = len(order)
    scores = [0.0] * len(sentences)
    for pos, i in enumerate(order):
        scores[i] = float(n - pos)
    return rank_by_scores(sentences, scores)


def baseline_rank(
    method: str,
    query: str,
    documents: Sequence[Sequence[str]],
    seed: int = 0,
    centrality: CentralityConfig = CentralityConfig(),
) -> RankedEvidence:
    """Rank every sentence of the cluster; indices refer to the flattened document order."""
    sentences = [s for doc in documents for s in doc]
    if method == "termfreq":
        stopwords = load_slot_lexicon().function_words
        toks = [tokenize(s) for s in sentences]
        cluster_tf = Counter(w for t in toks for w in t.words if w not in stopwords)
        q_words = {t for t in umr_tokens(query) if t != MASK_TOKEN and t[:1].isalnum() and t not in stopwords}
        scores = [float(sum(cluster_tf[w] for w in q_words & set(t.words))) for t in toks]
        return rank_by_scores(sentences, scores)

    if method == "lead":
        last_start = len(sentences) - len(documents[-1]) if documents else 0
        order = list(range(last_start, len(sentences))) + list(range(last_start))
        return _positional(sentences, order)

    if method == "lexrank":
        if not sentences:
            return []
        return rank_by_scores(sentences, lexrank_scores([tokenize(s) for s in sentences], centrality))

    if method == "random":
        order = list(range(len(sentences)))
        random.Random(seed).shuffle(order)
        return _positional(sentences, order)

    raise ValueError(f"Unknown baseline method '{method}'")
