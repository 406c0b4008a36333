"""
Masked query / proxy-query construction.

    SlotSpan                                  frozen dataclass: sentence_index, token_start, token_end, source
    Revealed, Mask                            segment types; Segment = Revealed | Mask
    MaskedText                                dataclass: sentences (segments per sentence), provenance,
                                              slot_tokens, budget, revealed_tokens
    MaskPolicy                                frozen dataclass: gamma, seed
    QueryLexicon                              frozen dataclass: patterns (longest first)
    SlotLexicon                               frozen dataclass: function_words, verbs

    load_query_lexicon(path=QUERY_LEXICON_FILE)        -> QueryLexicon
    load_slot_lexicon(...)                             -> SlotLexicon
    extract_slots(sentence, blockers=None, sentence_index=0) -> list[SlotSpan]
    random_slots(sentences, rate=0.15, seed=0)         -> list[list[SlotSpan]]
    validate_spans(spans, sentence_length)             -> None   raises ValueError
    load_propositions(path)                            -> dict[(doc_id, sentence_index), list[(start, end)]]
    resolve_slots(sentences, doc_id, propositions, blockers) -> list[list[SlotSpan]]
    mask_summary(sentences, slots, policy)             -> MaskedText
    mask_all(sentences)                                -> MaskedText
    mask_query(title, narrative, lexicon)              -> MaskedText
    render_umr(m)                                      -> str
    umr_tokens(text)                                   -> list[str]   "[MASK]" kept as one token

Reveal budget is counted in slot tokens: floor(gamma * total slot tokens).
Slots are revealed round-robin over sentences, one seeded random slot per
visit, and the budget is checked before every reveal so gamma=0 reveals nothing.
"""
import json
import logging
import math
import random
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Collection, Literal, Sequence

from config import FUNCTION_WORDS_FILE, QUERY_LEXICON_FILE, RANDOM_MASK_RATE, VERBS_FILE
from text import TokenSeq, is_word, tokenize

logger = logging.getLogger(__name__)

MASK_TOKEN = "[MASK]"
_EPS = 1e-9


@dataclass(frozen=True)
class SlotSpan:
    sentence_index: int
    token_start: int
    token_end: int        # exclusive
    source: Literal["heuristic", "imported", "random"] = "heuristic"

    def __len__(self) -> int:
        return self.token_end - self.token_start


@dataclass(frozen=True)
class Revealed:
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class Mask:
    pass


Segment = Revealed | Mask


@dataclass
class MaskedText:
    sentences: list[list[Segment]]
    provenance: Literal["summary_proxy", "query"]
    slot_tokens: int = 0       # total tokens covered by slots
    budget: int = 0            # reveal budget in slot tokens
    revealed_tokens: int = 0   # slot tokens actually revealed

    @property
    def mask_count(self) -> int:
        return sum(isinstance(seg, Mask) for sent in self.sentences for seg in sent)


@dataclass(frozen=True)
class MaskPolicy:
    gamma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")


@dataclass(frozen=True)
class QueryLexicon:
    patterns: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        if not self.patterns:
            raise ValueError("QueryLexicon needs at least one pattern")
        # longest match first; ties keep file order
        ordered = tuple(sorted(self.patterns, key=lambda p: -len(p)))
        object.__setattr__(self, "patterns", ordered)

    @classmethod
    def from_strings(cls, patterns: Sequence[str]) -> "QueryLexicon":
        return cls(tuple(tokenize(p).tokens for p in patterns if tokenize(p).tokens))


@dataclass(frozen=True)
class SlotLexicon:
    function_words: frozenset[str] = field(default_factory=frozenset)
    verbs: frozenset[str] = field(default_factory=frozenset)

    def blockers(self, verbs_as_slots: bool = False) -> frozenset[str]:
        """Words that end a content run. Verbs only block when they are not slots."""
        return self.function_words if verbs_as_slots else self.function_words | self.verbs


# ---------------------------------------------------------------------------
# Lexicon files
# ---------------------------------------------------------------------------

def _read_lexicon_lines(path: Path) -> list[str]:
    lines = []
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            line = line.split("#", 1)[0].strip().lower()
            if line:
                lines.append(line)
    return lines


@lru_cache(maxsize=8)
def load_query_lexicon(path: Path = QUERY_LEXICON_FILE) -> QueryLexicon:
    return QueryLexicon.from_strings(_read_lexicon_lines(path))


@lru_cache(maxsize=8)
def load_slot_lexicon(function_words: Path = FUNCTION_WORDS_FILE, verbs: Path = VERBS_FILE) -> SlotLexicon:
    return SlotLexicon(
        function_words=frozenset(_read_lexicon_lines(function_words)),
        verbs=frozenset(_read_lexicon_lines(verbs)),
    )


# ---------------------------------------------------------------------------
# Slots
# ---------------------------------------------------------------------------

def extract_slots(
    sentence: TokenSeq,
    blockers: Collection[str] | None = None,
    sentence_index: int = 0,
) -> list[SlotSpan]:
    """Maximal runs of words that are not blockers; punctuation also ends a run."""
    if blockers is None:
        blockers = load_slot_lexicon().blockers()
    spans: list[SlotSpan] = []
    start = None
    for i, tok in enumerate(sentence.tokens):
        inside = is_word(tok) and tok not in blockers
        if inside and start is None:
            start = i
        elif not inside and start is not None:
            spans.append(SlotSpan(sentence_index, start, i))
            start = None
    if start is not None:
        spans.append(SlotSpan(sentence_index, start, len(sentence.tokens)))
    return spans


def random_slots(sentences: Sequence[TokenSeq], rate: float = RANDOM_MASK_RATE, seed: int = 0) -> list[list[SlotSpan]]:
    """Single-word slots chosen independently with probability `rate`."""
    rng = random.Random(seed)
    out = []
    for s_idx, sent in enumerate(sentences):
        spans = []
        for i, tok in enumerate(sent.tokens):
            if is_word(tok) and rng.random() < rate:
                spans.append(SlotSpan(s_idx, i, i + 1, "random"))
        out.append(spans)
    return out


def validate_spans(spans: Sequence[tuple[int, int]], sentence_length: int) -> None:
    """Raise ValueError unless spans are in range, non-empty and non-overlapping."""
    prev_end = 0
    for start, end in sorted(spans):
        if not 0 <= start < end <= sentence_length:
            raise ValueError(f"span [{start}, {end}) out of range for sentence of length {sentence_length}")
        if start < prev_end:
            raise ValueError(f"span [{start}, {end}) overlaps a previous span")
        prev_end = end


def load_propositions(path: str | Path) -> dict[tuple[str, int], list[tuple[int, int]]]:
    """Read externally produced slot spans: {doc_id, sentence_index, spans: [[start, end], ...]} per line."""
    props: dict[tuple[str, int], list[tuple[int, int]]] = {}
    with Path(path).open("r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                key = (str(rec["doc_id"]), int(rec["sentence_index"]))
                props[key] = [(int(s), int(e)) for s, e in rec["spans"]]
            except (KeyError, TypeError, ValueError) as e:
                logger.warning(f"Rejected proposition record at {path}:{line_no}: {e}")
    return props


def resolve_slots(
    sentences: Sequence[TokenSeq],
    doc_id: str,
    propositions: dict[tuple[str, int], list[tuple[int, int]]] | None = None,
    blockers: Collection[str] | None = None,
) -> list[list[SlotSpan]]:
    """Per-sentence slots: imported spans where available and valid, heuristic otherwise."""
    out = []
    for s_idx, sent in enumerate(sentences):
        imported = (propositions or {}).get((doc_id, s_idx))
        if imported is not None:
            try:
                validate_spans(imported, len(sent))
                out.append([SlotSpan(s_idx, s, e, "imported") for s, e in sorted(imported)])
                continue
            except ValueError as e:
                logger.warning(f"Rejected propositions for {doc_id} sentence {s_idx}: {e}")
        out.append(extract_slots(sent, blockers, sentence_index=s_idx))
    return out


# ---------------------------------------------------------------------------
# Masking
# ---------------------------------------------------------------------------

def _segments(tokens: Sequence[str], masked: Sequence[bool]) -> list[Segment]:
    """Group tokens into segments, merging adjacent masked tokens into one Mask."""
    segs: list[Segment] = []
    run: list[str] = []
    for tok, is_masked in zip(tokens, masked):
        if is_masked:
            if run:
                segs.append(Revealed(tuple(run)))
                run = []
            if not segs or not isinstance(segs[-1], Mask):
                segs.append(Mask())
        else:
            run.append(tok)
    if run:
        segs.append(Revealed(tuple(run)))
    return segs


def mask_summary(
    sentences: Sequence[TokenSeq],
    slots: Sequence[Sequence[SlotSpan]],
    policy: MaskPolicy = MaskPolicy(),
) -> MaskedText:
    """Mask every slot, then reveal slots round-robin until the token budget is met."""
    if len(slots) != len(sentences):
        raise ValueError(f"Got slots for {len(slots)} sentences, expected {len(sentences)}")

    total = sum(len(span) for sent_slots in slots for span in sent_slots)
    budget = math.floor(policy.gamma * total + _EPS)
    rng = random.Random(policy.seed)

    pending = [list(sent_slots) for sent_slots in slots]
    revealed: set[SlotSpan] = set()
    shown = 0
    while shown < budget and any(pending):
        for s_idx in range(len(pending)):
            if not pending[s_idx]:
                continue
            if shown >= budget:
                break
            span = pending[s_idx].pop(rng.randrange(len(pending[s_idx])))
            revealed.add(span)
            shown += len(span)

    out: list[list[Segment]] = []
    for s_idx, sent in enumerate(sentences):
        masked = [False] * len(sent)
        for span in slots[s_idx]:
            if span not in revealed:
                for i in range(span.token_start, span.token_end):
                    masked[i] = True
        out.append(_segments(sent.tokens, masked))
    return MaskedText(out, "summary_proxy", slot_tokens=total, budget=budget, revealed_tokens=shown)


def mask_all(sentences: Sequence[TokenSeq]) -> MaskedText:
    """Every word masked; punctuation kept. Query-agnostic reference point."""
    out = [_segments(sent.tokens, [is_word(t) for t in sent.tokens]) for sent in sentences]
    return MaskedText(out, "summary_proxy")


def mask_query(title: TokenSeq | None, narrative: TokenSeq, lexicon: QueryLexicon | None = None) -> MaskedText:
    """Mask query words in the narrative; a title becomes "[MASK] <title> ." up front."""
    if not narrative.tokens:
        raise ValueError("mask_query needs a non-empty narrative")
    lexicon = lexicon or load_query_lexicon()
    tokens = narrative.tokens
    masked = [False] * len(tokens)
    i = 0
    while i < len(tokens):
        for pattern in lexicon.patterns:
            if tokens[i:i + len(pattern)] == pattern:
                for j in range(i, i + len(pattern)):
                    masked[j] = True
                i += len(pattern)
                break
        else:
            i += 1

    sentences: list[list[Segment]] = []
    if title is not None and title.tokens:
        sentences.append([Mask(), Revealed(title.tokens + (".",))])
    sentences.append(_segments(tokens, masked))
    return MaskedText(sentences, "query")


def render_umr(m: MaskedText) -> str:
    """Space-joined tokens; a mask closing one sentence absorbs a mask opening the next."""
    parts: list[str] = []
    for sent in m.sentences:
        for seg in sent:
            if isinstance(seg, Mask):
                if not parts or parts[-1] != MASK_TOKEN:
                    parts.append(MASK_TOKEN)
            elif seg.tokens:
                parts.append(" ".join(seg.tokens))
    return " ".join(parts)


def umr_tokens(text: str) -> list[str]:
    """Tokenize rendered UMR text, keeping each "[MASK]" as a single token."""
    out: list[str] = []
    for i, chunk in enumerate(text.split(MASK_TOKEN)):
        if i:
            out.append(MASK_TOKEN)
        out.extend(tokenize(chunk).tokens)
    return out
