"""
ROUGE-1/2/SU4 and the smoothed regression target. Pure functions.

    RougeScore                                        frozen dataclass: recall, precision, f1
    TargetConfig                                      frozen dataclass: lambda_ (default 0.15)

    rouge_n(n, reference, candidate, stem=False)      -> RougeScore
    rouge_su4(reference, candidate, stem=False)       -> RougeScore
    regression_target(summary, sentence, cfg)         -> float   f1(R2) + lambda * f1(R1)
    multi_ref_f1(references, candidate, variant)      -> RougeScore   mean over references

Counting units are words only (punctuation excluded). Overlap is clipped
multiset intersection. SU4 units are unigrams plus skip-bigrams with at most
four intervening words. Multi-reference scores are plain means, not the
jackknife of the Perl ROUGE package.
"""
from collections import Counter
from dataclasses import dataclass
from typing import Literal, Sequence

from config import LAMBDA
from text import TokenSeq

Variant = Literal["R1", "R2", "SU4"]

SKIP_DISTANCE = 5  # j - i <= 5, i.e. at most 4 words in between

_stemmer = None


@dataclass(frozen=True)
class RougeScore:
    recall: float
    precision: float
    f1: float

    @classmethod
    def from_counts(cls, overlap: int, ref_total: int, cand_total: int) -> "RougeScore":
        r = overlap / ref_total if ref_total else 0.0
        p = overlap / cand_total if cand_total else 0.0
        f1 = 2 * r * p / (r + p) if r + p > 0 else 0.0
        return cls(recall=r, precision=p, f1=f1)

    def as_dict(self) -> dict[str, float]:
        return {"recall": self.recall, "precision": self.precision, "f1": self.f1}


@dataclass(frozen=True)
class TargetConfig:
    lambda_: float = LAMBDA

    def __post_init__(self) -> None:
        if self.lambda_ < 0:
            raise ValueError(f"lambda must be non-negative, got {self.lambda_}")


def _get_stemmer():
    global _stemmer
    if _stemmer is None:
        from nltk.stem.porter import PorterStemmer
        _stemmer = PorterStemmer()
    return _stemmer


def _words(tokens: TokenSeq, stem: bool) -> list[str]:
    words = list(tokens.words)
    if stem:
        stemmer = _get_stemmer()
        words = [stemmer.stem(w) for w in words]
    return words


def _ngrams(words: list[str], n: int) -> Counter:
    return Counter(tuple(words[i:i + n]) for i in range(len(words) - n + 1))


def _su4_units(words: list[str]) -> Counter:
    units: Counter = Counter((w,) for w in words)
    for i in range(len(words)):
        for j in range(i + 1, min(i + SKIP_DISTANCE, len(words) - 1) + 1):
            units[(words[i], words[j])] += 1
    return units


def _score(ref_units: Counter, cand_units: Counter) -> RougeScore:
    overlap = sum((ref_units & cand_units).values())
    return RougeScore.from_counts(overlap, sum(ref_units.values()), sum(cand_units.values()))


def rouge_n(n: int, reference: TokenSeq, candidate: TokenSeq, stem: bool = False) -> RougeScore:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return _score(_ngrams(_words(reference, stem), n), _ngrams(_words(candidate, stem), n))


def rouge_su4(reference: TokenSeq, candidate: TokenSeq, stem: bool = False) -> RougeScore:
    return _score(_su4_units(_words(reference, stem)), _su4_units(_words(candidate, stem)))


def regression_target(summary: TokenSeq, sentence: TokenSeq, cfg: TargetConfig = TargetConfig()) -> float:
    """Label-smoothed evidence target: ROUGE-2 F1 plus lambda * ROUGE-1 F1."""
    return rouge_n(2, summary, sentence).f1 + cfg.lambda_ * rouge_n(1, summary, sentence).f1


def score_variant(variant: Variant, reference: TokenSeq, candidate: TokenSeq, stem: bool = False) -> RougeScore:
    if variant == "R1":
        return rouge_n(1, reference, candidate, stem)
    if variant == "R2":
        return rouge_n(2, reference, candidate, stem)
    if variant == "SU4":
        return rouge_su4(reference, candidate, stem)
    raise ValueError(f"Unknown ROUGE variant '{variant}'")


def multi_ref_f1(
    references: Sequence[TokenSeq],
    candidate: TokenSeq,
    variant: Variant = "R2",
    stem: bool = False,
) -> RougeScore:
    """Score against each reference independently and average r, p and f1."""
    if not references:
        raise ValueError("multi_ref_f1 needs at least one reference")
    scores = [score_variant(variant, ref, candidate, stem) for ref in references]
    k = len(scores)
    return RougeScore(
        recall=sum(s.recall for s in scores) / k,
        precision=sum(s.precision for s in scores) / k,
        f1=sum(s.f1 for s in scores) / k,
    )
