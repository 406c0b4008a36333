"""
Input preparation for an external abstractive generator.

    LengthBin                                         frozen dataclass: lower, upper, median, token
    LengthBinTable                                    bins with lookup(requested_length) -> token
    GeneratorInput                                    dataclass: id, text, length_token, requested_length, token_count

    oracle_order(sentences, reference, metric="f1")   -> list[str]
    build_length_bins(lengths, n_bins=10)             -> LengthBinTable
    prepare_generator_input(record_id, evidence, query_umr, requested_length, bins, max_tokens=768,
                            evidence_order="ranked", positions=None)
                                                      -> GeneratorInput
    has_repeated_trigram(tokens)                      -> bool
    save_length_bins(table, path) / load_length_bins(path)
    read_generated(path)                              -> dict[id, summary]

Serialized input: "[LEN_x] <query UMR> [SEP] sent_1 [SEP] sent_2 ...". token_count
counts the length token and every [SEP] as one token each, the query by
umr_tokens and each sentence by tokenize.
"""
import json
import logging
import math
import statistics
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

from config import EVIDENCE_ORDERS, MAX_INPUT_TOKENS, N_LENGTH_BINS
from data.corpus import read_jsonl, write_json
from rouge import rouge_n
from text import TokenSeq, tokenize, truncate_tokens
from umr import umr_tokens

logger = logging.getLogger(__name__)

SEP_TOKEN = "[SEP]"
ORACLE_METRICS = ("f1", "recall", "precision")


@dataclass(frozen=True)
class LengthBin:
    lower: int
    upper: int
    median: float
    token: str

    def contains(self, length: int) -> bool:
        return self.lower <= length <= self.upper


@dataclass
class LengthBinTable:
    bins: list[LengthBin]

    def __post_init__(self) -> None:
        if not self.bins:
            raise ValueError("LengthBinTable needs at least one bin")
        tokens = [b.token for b in self.bins]
        if len(set(tokens)) != len(tokens):
            raise ValueError(f"Length tokens are not distinct: {tokens}")

    def lookup(self, requested_length: int) -> str:
        for b in self.bins:
            if b.contains(requested_length):
                return b.token
        nearest = min(self.bins, key=lambda b: abs(b.median - requested_length))
        return nearest.token

    def to_dict(self) -> dict:
        return {"bins": [asdict(b) for b in self.bins]}

    @classmethod
    def from_dict(cls, d: dict) -> "LengthBinTable":
        return cls([LengthBin(int(b["lower"]), int(b["upper"]), float(b["median"]), str(b["token"])) for b in d["bins"]])


@dataclass
class GeneratorInput:
    id: str
    text: str
    length_token: str
    requested_length: int
    token_count: int

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "length_token": self.length_token,
            "requested_length": self.requested_length,
        }


# ---------------------------------------------------------------------------
# Oracle ordering
# ---------------------------------------------------------------------------

def oracle_order(sentences: Sequence[str], reference: TokenSeq, metric: str = "f1") -> list[str]:
    """Sentences by descending ROUGE-2 against the reference, ties by original index."""
    if reference.word_count == 0:
        raise ValueError("oracle_order needs a non-empty reference")
    if metric not in ORACLE_METRICS:
        raise ValueError(f"Unknown oracle metric '{metric}'")
    scores = [getattr(rouge_n(2, reference, tokenize(s)), metric) for s in sentences]
    order = sorted(range(len(sentences)), key=lambda i: (-scores[i], i))
    return [sentences[i] for i in order]


# ---------------------------------------------------------------------------
# Length bins
# ---------------------------------------------------------------------------

def _round_half_up(x: float, step: int) -> int:
    return int(math.floor(x / step + 0.5)) * step


def build_length_bins(lengths: Sequence[int], n_bins: int = N_LENGTH_BINS) -> LengthBinTable:
    """Equal-frequency bins over the observed lengths.

    Each bin holds whole distinct values. Ranges are contiguous from the
    shortest to the longest observed length. Token = bin median rounded to the
    nearest 10; bins whose rounded tokens collide use the integer median.
    """
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    counts = Counter(int(x) for x in lengths)
    values = sorted(counts)
    if len(values) < n_bins:
        raise ValueError(f"build_length_bins needs >= {n_bins} distinct lengths, got {len(values)}")

    total = sum(counts.values())
    groups: list[list[int]] = [[]]
    cum = 0
    for i, v in enumerate(values):
        groups[-1].append(v)
        cum += counts[v]
        remaining_values = len(values) - i - 1
        remaining_bins = n_bins - len(groups)
        if remaining_bins == 0:
            continue
        if cum * n_bins >= len(groups) * total or remaining_values == remaining_bins:
            groups.append([])

    medians = []
    for g in groups:
        obs = [v for v in g for _ in range(counts[v])]
        medians.append(statistics.median(obs))

    rounded = [_round_half_up(m, 10) for m in medians]
    clashes = {t for t, c in Counter(rounded).items() if c > 1}
    if clashes:
        logger.debug(f"Length tokens collide at {sorted(clashes)}; using integer medians there")
    numbers = [_round_half_up(m, 1) if r in clashes else r for m, r in zip(medians, rounded)]

    bins = []
    for k, g in enumerate(groups):
        upper = groups[k + 1][0] - 1 if k + 1 < len(groups) else g[-1]
        bins.append(LengthBin(lower=g[0], upper=upper, median=float(medians[k]), token=f"[LEN_{numbers[k]}]"))
    return LengthBinTable(bins)


def save_length_bins(table: LengthBinTable, path: str | Path) -> None:
    write_json(path, table.to_dict())


def load_length_bins(path: str | Path) -> LengthBinTable:
    with open(path) as f:
        return LengthBinTable.from_dict(json.load(f))


# ---------------------------------------------------------------------------
# Generator input
# ---------------------------------------------------------------------------

def prepare_generator_input(
    record_id: str,
    evidence: Sequence[str],
    query_umr: str | None,
    requested_length: int,
    bins: LengthBinTable,
    max_tokens: int = MAX_INPUT_TOKENS,
    evidence_order: str = "ranked",
    positions: Sequence[int] | None = None,
) -> GeneratorInput:
    """Serialize ranked evidence under the token cap.

    Sentences are admitted whole in ranked order until the next one would not
    fit; an oversized first sentence is cut to the remaining tokens instead.
    With evidence_order="document" the admitted sentences are then emitted by
    ascending `positions` (their index in the source cluster).
    """
    if not evidence:
        raise ValueError(f"{record_id}: prepare_generator_input needs at least one evidence sentence")
    if evidence_order not in EVIDENCE_ORDERS:
        raise ValueError(f"Unknown evidence order '{evidence_order}'")
    if positions is not None and len(positions) != len(evidence):
        raise ValueError(f"{record_id}: {len(positions)} positions for {len(evidence)} evidence sentences")
    if evidence_order == "document" and positions is None:
        raise ValueError(f"{record_id}: document evidence order needs sentence positions")
    length_token = bins.lookup(requested_length)
    head = [length_token]
    used = 1
    if query_umr:
        head.append(query_umr)
        used += len(umr_tokens(query_umr))
    if used + 2 > max_tokens:
        raise ValueError(f"{record_id}: length token and query take {used} of {max_tokens} tokens")

    selected: list[tuple[int, str]] = []
    for i, sentence in enumerate(evidence):
        n_tokens = len(tokenize(sentence))
        if n_tokens == 0:
            continue
        if used + 1 + n_tokens <= max_tokens:
            selected.append((i, sentence))
            used += 1 + n_tokens
            continue
        if not selected:
            cut = truncate_tokens(sentence, max_tokens - used - 1)
            selected.append((i, cut))
            used += 1 + len(tokenize(cut))
        break
    if not selected:
        raise ValueError(f"{record_id}: no evidence sentence has any tokens")

    if evidence_order == "document":
        selected.sort(key=lambda item: positions[item[0]])
    parts = list(head)
    for _, sentence in selected:
        parts += [SEP_TOKEN, sentence]

    return GeneratorInput(
        id=record_id,
        text=" ".join(parts),
        length_token=length_token,
        requested_length=requested_length,
        token_count=used,
    )


def has_repeated_trigram(tokens: TokenSeq) -> bool:
    seen = set()
    t = tokens.tokens
    for i in range(len(t) - 2):
        tri = t[i:i + 3]
        if tri in seen:
            return True
        seen.add(tri)
    return False


def read_generated(path: str | Path) -> dict[str, str]:
    """Generated summaries from the external generator, {id, summary} per line."""
    out: dict[str, str] = {}
    for row in read_jsonl(path):
        rid = str(row["id"])
        if rid in out:
            raise ValueError(f"duplicate generated summary for id {rid}")
        out[rid] = str(row["summary"])
    logger.info(f"Loaded {len(out)} generated summaries from {path}")
    return out
