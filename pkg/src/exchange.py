"""
File-based exchange with an external (e.g. neural) evidence scorer.

    ScoreRequest                                        dataclass: id, query, sentence

    write_score_requests(requests, path)                -> int   {id, query, sentence} JSONL
    read_scores(path)                                   -> dict[str, float]
    rank_with_scores(requests, scores)                  -> RankedEvidence
    exchange_external_scores(requests, scores_file)     -> RankedEvidence

The external scorer reads the request file and writes one {id, score} line per
request. Ranking uses the same comparator as ranker.rank_evidence, so external
scores equal to the internal predictions give an identical ranking.
"""
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Sequence

from data.corpus import read_jsonl, write_jsonl
from ranker import RankedEvidence, rank_by_scores

logger = logging.getLogger(__name__)


@dataclass
class ScoreRequest:
    id: str
    query: str
    sentence: str


def write_score_requests(requests: Sequence[ScoreRequest], path: str | Path) -> int:
    n = write_jsonl(path, (asdict(r) for r in requests))
    logger.info(f"Wrote {n} score requests -> {path}")
    return n


def read_scores(path: str | Path) -> dict[str, float]:
    """Read {id, score} lines. Duplicate ids and non-finite scores raise ValueError."""
    scores: dict[str, float] = {}
    for row in read_jsonl(path):
        rid = str(row["id"])
        if rid in scores:
            raise ValueError(f"duplicate score for id {rid}")
        score = float(row["score"])
        if not math.isfinite(score):
            raise ValueError(f"non-finite score for id {rid}: {score}")
        scores[rid] = score
    return scores


def rank_with_scores(requests: Sequence[ScoreRequest], scores: Mapping[str, float]) -> RankedEvidence:
    """Rank `requests` by externally supplied scores. A request without a score raises ValueError."""
    ordered = []
    for r in requests:
        if str(r.id) not in scores:
            raise ValueError(f"missing score for id {r.id}")
        ordered.append(scores[str(r.id)])
    return rank_by_scores([r.sentence for r in requests], ordered)


def exchange_external_scores(requests: Sequence[ScoreRequest], scores_file: str | Path) -> RankedEvidence:
    scores = read_scores(scores_file)
    extra = set(scores) - {str(r.id) for r in requests}
    if extra:
        logger.warning(f"Ignoring {len(extra)} scores with no matching request")
    return rank_with_scores(requests, scores)
