"""
Distant supervision: turn (documents, summary) records into
(proxy query, candidate sentence, target) training pairs.

    SamplingPolicy                            frozen dataclass: granularity, head, tail
    Candidate                                 frozen dataclass: doc_id, sentence_index, text
    TrainingPair                              dataclass: pair_id, query_umr, sentence, target

    sample_candidates(record, policy)         -> list[Candidate]
    record_seed(global_seed, cluster_id)      -> int
    proxy_query(record, mask_policy, ablation='none', propositions=None) -> str
    build_pairs(record, policy, mask_policy, cfg, ablation='none', propositions=None) -> list[TrainingPair]
    build_corpus_pairs(records, policy, gamma, seed, cfg, ..., workers=1) -> list[TrainingPair]
    read_pairs(path)                          -> Iterator[TrainingPair]

Targets are always computed against the raw summary; the mask only shapes the
query side. Per-record seeds are derived from (global seed, cluster_id) so
output is independent of worker count.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterator, Literal

from config import RANDOM_MASK_RATE, SAMPLING_GRANULARITY, SAMPLING_HEAD, SAMPLING_TAIL
from data.corpus import CorpusRecord, read_jsonl, stable_hash
from rouge import TargetConfig, regression_target
from text import TokenSeq, tokenize
from umr import (
    MaskPolicy,
    load_slot_lexicon,
    mask_summary,
    random_slots,
    render_umr,
    resolve_slots,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplingPolicy:
    granularity: Literal["cluster", "document"] = SAMPLING_GRANULARITY
    head: int = SAMPLING_HEAD
    tail: int = SAMPLING_TAIL

    def __post_init__(self) -> None:
        if self.granularity not in ("cluster", "document"):
            raise ValueError(f"Unknown sampling granularity '{self.granularity}'")
        if self.head < 0 or self.tail < 0 or self.head + self.tail < 1:
            raise ValueError(f"Need head, tail >= 0 and head + tail >= 1, got {self.head}/{self.tail}")


@dataclass(frozen=True)
class Candidate:
    doc_id: str
    sentence_index: int
    text: str


@dataclass
class TrainingPair:
    pair_id: str
    query_umr: str
    sentence: str
    target: float

    def to_dict(self) -> dict:
        return asdict(self)


def _head_tail(n: int, head: int, tail: int) -> list[int]:
    """Positions of the first `head` and last `tail` items, each once, ascending."""
    return sorted(set(range(min(head, n))) | set(range(max(0, n - tail), n)))


def sample_candidates(record: CorpusRecord, policy: SamplingPolicy = SamplingPolicy()) -> list[Candidate]:
    if policy.granularity == "document":
        out = []
        for doc in record.documents:
            for i in _head_tail(len(doc.sentences), policy.head, policy.tail):
                out.append(Candidate(doc.doc_id, i, doc.sentences[i]))
        return out

    flat = [(doc.doc_id, i, s) for doc in record.documents for i, s in enumerate(doc.sentences)]
    return [Candidate(*flat[k]) for k in _head_tail(len(flat), policy.head, policy.tail)]


def record_seed(global_seed: int, cluster_id: str) -> int:
    return stable_hash("mask", global_seed, cluster_id)


def proxy_query(
    record: CorpusRecord,
    mask_policy: MaskPolicy,
    ablation: str = "none",
    propositions: dict | None = None,
) -> str:
    """Render the summary of `record` as a masked proxy query."""
    if ablation == "no_query":
        return ""
    sentences = [tokenize(s) for s in record.summary]
    lexicon = load_slot_lexicon()

    if ablation == "no_openie":
        slots = random_slots(sentences, RANDOM_MASK_RATE, seed=mask_policy.seed)
        mask_policy = MaskPolicy(gamma=0.0, seed=mask_policy.seed)
    else:
        blockers = lexicon.blockers(verbs_as_slots=(ablation == "no_verb"))
        slots = resolve_slots(sentences, record.cluster_id, propositions, blockers)
        if ablation == "no_mask":
            mask_policy = MaskPolicy(gamma=1.0, seed=mask_policy.seed)

    if not any(slots):
        logger.warning(f"Summary of {record.cluster_id} has no information slots; proxy query is the plain summary")
    return render_umr(mask_summary(sentences, slots, mask_policy))


def build_pairs(
    record: CorpusRecord,
    policy: SamplingPolicy,
    mask_policy: MaskPolicy,
    cfg: TargetConfig = TargetConfig(),
    ablation: str = "none",
    propositions: dict | None = None,
) -> list[TrainingPair]:
    """One pair per sampled candidate, all sharing the record's proxy query."""
    query = proxy_query(record, mask_policy, ablation, propositions)
    summary = TokenSeq(tuple(t for s in record.summary for t in tokenize(s).tokens))
    return [
        TrainingPair(
            pair_id=f"{record.cluster_id}:{c.doc_id}:{c.sentence_index}",
            query_umr=query,
            sentence=c.text,
            target=regression_target(summary, tokenize(c.text), cfg),
        )
        for c in sample_candidates(record, policy)
    ]


def build_corpus_pairs(
    records: list[CorpusRecord],
    policy: SamplingPolicy,
    gamma: float,
    seed: int,
    cfg: TargetConfig = TargetConfig(),
    ablation: str = "none",
    propositions: dict | None = None,
    workers: int = 1,
) -> list[TrainingPair]:
    """build_pairs over every record; output order follows input order."""
    def one(record: CorpusRecord) -> list[TrainingPair]:
        mask_policy = MaskPolicy(gamma=gamma, seed=record_seed(seed, record.cluster_id))
        return build_pairs(record, policy, mask_policy, cfg, ablation, propositions)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(one, records))
    else:
        chunks = [one(r) for r in records]
    return [pair for chunk in chunks for pair in chunk]


def read_pairs(path: str | Path) -> Iterator[TrainingPair]:
    for d in read_jsonl(path):
        yield TrainingPair(
            pair_id=str(d["pair_id"]),
            query_umr=d["query_umr"],
            sentence=d["sentence"],
            target=float(d["target"]),
        )
