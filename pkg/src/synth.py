"""
Synthetic multi-document clusters built from single-document data by
retrieving articles whose summaries resemble the seed summary.

    SummaryIndex                                       dataclass: ids, idf, vectors, lengths, postings
    SyntheticCluster                                   dataclass: cluster_id, documents, raw_summary,
                                                       final_summary, size

    build_index(records)                               -> SummaryIndex   records: [(id, TokenSeq)]
    retrieve_neighbors(index, query_id, pool)          -> list[str]
    choose_cluster_size(own_length, neighbor_lengths, target=250) -> int
    dedup_sentences(sentences, threshold=0.6, idf=None) -> list[str]
    form_cluster(record, retrieved, size, dedup_threshold=0.6) -> SyntheticCluster
    build_synthetic_corpus(records, pool, target, threshold, workers=1) -> list[SyntheticCluster]

Summaries are indexed as hashed unigram+bigram TF-IDF vectors with
idf = ln(N / df); scoring is exact cosine via an inverted index, ties broken by
ascending id.
"""
import logging
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from config import HASH_DIM, REDUNDANCY_THRESHOLD, RETRIEVAL_POOL, SYNTH_TARGET_WORDS
from data.corpus import CorpusRecord, Document
from text import SparseVector, TokenSeq, compute_idf, cosine, feature_strings, tokenize, vectorize_hashed_bigrams, vectorize_tfidf

logger = logging.getLogger(__name__)


@dataclass
class SummaryIndex:
    ids: list[str]
    idf: dict[str, float]
    vectors: list[SparseVector]
    lengths: list[int]                                   # summary word counts
    postings: dict[int, list[tuple[int, float]]] = field(default_factory=dict)
    dim: int = HASH_DIM
    _positions: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self._positions = {sid: i for i, sid in enumerate(self.ids)}

    def position(self, summary_id: str) -> int:
        try:
            return self._positions[summary_id]
        except KeyError:
            raise ValueError(f"Unknown summary id '{summary_id}'") from None


@dataclass
class SyntheticCluster:
    cluster_id: str
    documents: list[Document]
    raw_summary: list[str]
    final_summary: list[str]
    size: int

    def to_record(self) -> CorpusRecord:
        return CorpusRecord(cluster_id=self.cluster_id, documents=self.documents, summary=self.final_summary)


def build_index(records: Sequence[tuple[str, TokenSeq]], dim: int = HASH_DIM) -> SummaryIndex:
    if len(records) < 2:
        raise ValueError(f"build_index needs at least 2 summaries, got {len(records)}")
    ids = [rid for rid, _ in records]
    dupes = sorted(rid for rid, c in Counter(ids).items() if c > 1)
    if dupes:
        raise ValueError(f"Duplicate summary ids: {', '.join(dupes)}")

    idf = compute_idf((feature_strings(toks) for _, toks in records), smooth=False)
    vectors = [vectorize_hashed_bigrams(toks, idf, dim) for _, toks in records]
    postings: dict[int, list[tuple[int, float]]] = defaultdict(list)
    for pos, vec in enumerate(vectors):
        for k in sorted(vec.entries):
            postings[k].append((pos, vec.entries[k]))
    logger.info(f"Indexed {len(ids)} summaries ({len(postings)} active buckets)")
    return SummaryIndex(
        ids=ids,
        idf=idf,
        vectors=vectors,
        lengths=[toks.word_count for _, toks in records],
        postings=dict(postings),
        dim=dim,
    )


def retrieve_neighbors(index: SummaryIndex, query_summary_id: str, pool: int = RETRIEVAL_POOL) -> list[str]:
    """Top-`pool` summary ids by cosine, self excluded; ties by ascending id."""
    if pool < 1:
        raise ValueError(f"pool must be >= 1, got {pool}")
    q = index.position(query_summary_id)
    qvec = index.vectors[q]
    dots: dict[int, float] = defaultdict(float)
    for k, w in qvec.entries.items():
        for pos, v in index.postings.get(k, ()):
            dots[pos] += w * v

    qnorm = qvec.norm()
    scores = []
    for pos, sid in enumerate(index.ids):
        if pos == q:
            continue
        denom = qnorm * index.vectors[pos].norm()
        sim = dots.get(pos, 0.0) / denom if denom else 0.0
        scores.append((-sim, sid))
    scores.sort()
    return [sid for _, sid in scores[:pool]]


def choose_cluster_size(own_length: int, neighbor_lengths: Sequence[int], target: int = SYNTH_TARGET_WORDS) -> int:
    """N in 1..1+len(neighbors) minimising |own + first N-1 neighbours - target|; ties -> smaller N."""
    if target < 1:
        raise ValueError(f"target must be >= 1, got {target}")
    best_n, best_gap = 1, abs(own_length - target)
    total = own_length
    for n, length in enumerate(neighbor_lengths, start=2):
        total += length
        gap = abs(total - target)
        if gap < best_gap:
            best_n, best_gap = n, gap
    return best_n


def dedup_sentences(
    sentences: Sequence[str],
    threshold: float = REDUNDANCY_THRESHOLD,
    idf: dict[str, float] | None = None,
) -> list[str]:
    """Front-to-back scan keeping a sentence iff its cosine to every kept one is below threshold."""
    kept: list[str] = []
    kept_vecs: list[SparseVector] = []
    for s in sentences:
        vec = vectorize_tfidf(tokenize(s), idf)
        if any(cosine(vec, other) >= threshold for other in kept_vecs):
            continue
        kept.append(s)
        kept_vecs.append(vec)
    return kept


def form_cluster(
    record: CorpusRecord,
    retrieved: Sequence[CorpusRecord],
    size: int,
    dedup_threshold: float = REDUNDANCY_THRESHOLD,
    idf: dict[str, float] | None = None,
) -> SyntheticCluster:
    """Seed document plus the first size - 1 retrieved articles; summaries concatenated then deduplicated."""
    if size < 1 or size - 1 > len(retrieved):
        raise ValueError(f"size={size} inconsistent with {len(retrieved)} retrieved records")
    members = [record] + list(retrieved[: size - 1])
    documents = [doc for m in members for doc in m.documents]
    raw_summary = [s for m in members for s in m.summary]
    final = dedup_sentences(raw_summary, dedup_threshold, idf)
    return SyntheticCluster(
        cluster_id=record.cluster_id,
        documents=documents,
        raw_summary=raw_summary,
        final_summary=final,
        size=size,
    )


def build_synthetic_corpus(
    records: Sequence[CorpusRecord],
    pool: int = RETRIEVAL_POOL,
    target: int = SYNTH_TARGET_WORDS,
    threshold: float = REDUNDANCY_THRESHOLD,
    workers: int = 1,
) -> list[SyntheticCluster]:
    by_id = {r.cluster_id: r for r in records}
    summaries = [(r.cluster_id, TokenSeq(tuple(t for s in r.summary for t in tokenize(s).tokens))) for r in records]
    index = build_index(summaries)

    def one(record: CorpusRecord) -> SyntheticCluster:
        neighbor_ids = retrieve_neighbors(index, record.cluster_id, pool)
        own = index.lengths[index.position(record.cluster_id)]
        size = choose_cluster_size(own, [index.lengths[index.position(n)] for n in neighbor_ids], target)
        return form_cluster(record, [by_id[n] for n in neighbor_ids], size, threshold)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool_exec:
            clusters = list(pool_exec.map(one, records))
    else:
        clusters = [one(r) for r in records]

    sizes = Counter(c.size for c in clusters)
    logger.info(f"Formed {len(clusters)} synthetic clusters; size histogram {dict(sorted(sizes.items()))}")
    return clusters
