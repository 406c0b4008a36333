"""
Tokenization, sentence splitting and sparse vectors shared by every stage.

    TokenSeq                                  frozen dataclass: tokens, word_count, words
    SparseVector                              frozen dataclass: entries, dim

    tokenize(text)                            -> TokenSeq
    split_sentences(text)                     -> list[str]
    truncate_words(text, n)                   -> str        first n words, original surface kept
    truncate_tokens(text, n)                  -> str        first n tokens, original surface kept
    compute_idf(docs, smooth=True)            -> dict[str, float]
    vectorize_tfidf(tokens, idf=None)         -> SparseVector   keyed by token, open vocabulary
    feature_strings(tokens)                   -> list[str]      unigrams + adjacent word bigrams
    fnv1a_64(s)                               -> int
    vectorize_hashed_bigrams(tokens, idf=None, dim=HASH_DIM) -> SparseVector
    cosine(u, v)                              -> float in [0, 1]

"Words" are alphanumeric tokens; punctuation tokens never count towards word
budgets, ROUGE units or vectors.
"""
import math
import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Hashable, Iterable, Mapping

from config import HASH_DIM

_TOKEN_RE = re.compile(r"[^\W_]+|[^\w\s]|_")
_WORD_RE = re.compile(r"[^\W_]+")
# break after . ? ! when followed by whitespace and an uppercase letter, digit or opening quote
_SENT_BREAK_RE = re.compile(r"(?<=[.?!])\s+(?=[A-Z0-9\"'“‘])")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def is_word(token: str) -> bool:
    return token[:1].isalnum()


@dataclass(frozen=True)
class TokenSeq:
    tokens: tuple[str, ...] = ()

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(t for t in self.tokens if is_word(t))

    @property
    def word_count(self) -> int:
        return sum(1 for t in self.tokens if is_word(t))

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __add__(self, other: "TokenSeq") -> "TokenSeq":
        return TokenSeq(self.tokens + other.tokens)

    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class SparseVector:
    """Sparse weights keyed by dimension.

    Hashed vectors use integer indices below `dim`; TF-IDF vectors are keyed by
    the token itself and have dim=None (open vocabulary).
    """
    entries: Mapping[Hashable, float]
    dim: int | None = None

    def __post_init__(self) -> None:
        for key, w in self.entries.items():
            if not math.isfinite(w) or w == 0.0:
                raise ValueError(f"SparseVector weight for {key!r} must be finite and non-zero, got {w}")
            if self.dim is not None and not (isinstance(key, int) and 0 <= key < self.dim):
                raise ValueError(f"SparseVector index {key!r} outside [0, {self.dim})")

    def __len__(self) -> int:
        return len(self.entries)

    def norm(self) -> float:
        return math.sqrt(sum(w * w for w in self.entries.values()))


def _sparse(weights: Mapping[Hashable, float], dim: int | None) -> SparseVector:
    return SparseVector({k: w for k, w in weights.items() if w != 0.0}, dim)


def tokenize(text: str) -> TokenSeq:
    """Lowercase; alphanumeric runs are tokens, each punctuation char is its own token."""
    return TokenSeq(tuple(_TOKEN_RE.findall(text.lower())))


def split_sentences(text: str) -> list[str]:
    """Rule-based splitter. Only inter-sentence whitespace is dropped."""
    if not text.strip():
        return []
    return [s.strip() for s in _SENT_BREAK_RE.split(text.strip()) if s.strip()]


def truncate_words(text: str, n: int) -> str:
    """Cut text right after its n-th word, keeping the original surface form."""
    if n <= 0:
        return ""
    for i, m in enumerate(_WORD_RE.finditer(text), start=1):
        if i == n:
            return text[: m.end()]
    return text


def truncate_tokens(text: str, n: int) -> str:
    """Cut text right after its n-th token (as counted by tokenize), keeping the surface form."""
    if n <= 0:
        return ""
    for i, m in enumerate(_TOKEN_RE.finditer(text), start=1):
        if i == n:
            return text[: m.end()]
    return text


def compute_idf(docs: Iterable[Iterable[str]], smooth: bool = True) -> dict[str, float]:
    """Document-frequency idf over collections of feature strings.

    smooth=True  -> 1 + ln((1 + N) / (1 + df))   strictly positive
    smooth=False -> ln(N / df)
    """
    df: Counter = Counter()
    n = 0
    for doc in docs:
        n += 1
        df.update(set(doc))
    if smooth:
        return {t: 1.0 + math.log((1 + n) / (1 + c)) for t, c in df.items()}
    return {t: math.log(n / c) for t, c in df.items()}


def vectorize_tfidf(tokens: TokenSeq, idf: Mapping[str, float] | None = None) -> SparseVector:
    """One dimension per distinct word; weight = tf * idf (missing idf -> 1)."""
    idf = idf or {}
    tf = Counter(tokens.words)
    return _sparse({t: c * idf.get(t, 1.0) for t, c in tf.items()}, None)


def feature_strings(tokens: TokenSeq) -> list[str]:
    """Word unigrams followed by adjacent word bigrams ("a b")."""
    words = tokens.words
    return list(words) + [f"{a} {b}" for a, b in zip(words, words[1:])]


@lru_cache(maxsize=2 ** 18)
def fnv1a_64(s: str) -> int:
    """64-bit FNV-1a over the UTF-8 bytes of s."""
    h = _FNV_OFFSET
    for byte in s.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def vectorize_hashed_bigrams(
    tokens: TokenSeq,
    idf: Mapping[str, float] | None = None,
    dim: int = HASH_DIM,
) -> SparseVector:
    """Hash unigram and bigram features into `dim` buckets; collisions add up."""
    if dim <= 0 or dim & (dim - 1):
        raise ValueError(f"dim must be a power of two, got {dim}")
    idf = idf or {}
    weights: dict[int, float] = {}
    for feat, count in Counter(feature_strings(tokens)).items():
        idx = fnv1a_64(feat) % dim
        weights[idx] = weights.get(idx, 0.0) + count * idf.get(feat, 1.0)
    return _sparse(weights, dim)


def cosine(u: SparseVector, v: SparseVector) -> float:
    if u.dim != v.dim:
        raise ValueError(f"Cannot compare vectors of dim {u.dim} and {v.dim}")
    if not u.entries or not v.entries:
        return 0.0
    small, large = (u, v) if len(u) <= len(v) else (v, u)
    dot = sum(w * large.entries.get(k, 0.0) for k, w in small.entries.items())
    denom = u.norm() * v.norm()
    if denom == 0.0:
        return 0.0
    return max(0.0, min(1.0, dot / denom))
