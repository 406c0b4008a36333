"""
Pointwise evidence regressor over hashed (query UMR, sentence) features.

    FeatureVector                             alias of text.SparseVector with dim FEATURE_DIM
    RegressorParams                           dataclass: weights (np.ndarray), bias, metadata
    TrainConfig                               frozen dataclass: learning_rate, batch_size, epochs, seed
    RankedSentence                            frozen dataclass: index, sentence, score
    RankedEvidence                            list[RankedSentence], best first

    featurize(query_umr, sentence, dim=FEATURE_DIM)    -> FeatureVector
    train(pairs, cfg)                                  -> RegressorParams   metadata['epoch_mse'] per epoch
    mse_loss(params, batch, targets)                   -> float
    mse_gradient(params, batch, targets)               -> (np.ndarray, float)
    predict(params, query_umr, sentence)               -> float   unclipped
    rank_by_scores(sentences, scores)                  -> RankedEvidence
    rank_evidence(params, query_umr, sentences)        -> RankedEvidence
    pearson_r(xs, ys)                                  -> float
    save_params(params, path) / load_params(path)

Feature layout: dims 0-2 are reserved (shared-unigram ratio, shared-bigram
ratio, log1p of the query mask count); all other features are hashed into
[RESERVED_DIMS, dim). Each lexical group (q:, s:, x:) is L2-normalised so the
squared feature norm stays small and SGD is stable at the default step size.

Params file: little-endian header (magic b"MRGE", uint32 version, uint32 dim),
dim float64 weights, then a UTF-8 JSON trailer {"bias": ..., "metadata": {...}}.
"""
import json
import logging
import math
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from config import BATCH_SIZE, EPOCHS, FEATURE_DIM, LEARNING_RATE, SEED
from supervision import TrainingPair
from text import SparseVector, fnv1a_64, is_word, tokenize
from umr import MASK_TOKEN, umr_tokens

logger = logging.getLogger(__name__)

FeatureVector = SparseVector

OVERLAP_UNIGRAM_DIM = 0
OVERLAP_BIGRAM_DIM = 1
MASK_COUNT_DIM = 2
RESERVED_DIMS = 3
LENGTH_BUCKET_WIDTH = 5
LENGTH_BUCKETS = 10

PARAMS_MAGIC = b"MRGE"
PARAMS_VERSION = 1
_HEADER = struct.Struct("<4sII")


@dataclass
class RegressorParams:
    weights: np.ndarray
    bias: float = 0.0
    metadata: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, dim: int = FEATURE_DIM) -> "RegressorParams":
        return cls(weights=np.zeros(dim, dtype=np.float64))

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.weights))) and math.isfinite(self.bias)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = LEARNING_RATE
    batch_size: int = BATCH_SIZE
    epochs: int = EPOCHS
    seed: int = SEED

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")


@dataclass(frozen=True)
class RankedSentence:
    index: int
    sentence: str
    score: float


RankedEvidence = list[RankedSentence]


# ---------------------------------------------------------------------------
# Features
# ---------------------------------------------------------------------------

def _bigrams(words: Sequence[str]) -> list[str]:
    return [f"{a} {b}" for a, b in zip(words, words[1:])]


def _hash_group(prefix: str, feats: Iterable[str], dim: int, out: dict[int, float]) -> None:
    counts = Counter(feats)
    norm = math.sqrt(sum(c * c for c in counts.values()))
    if norm == 0.0:
        return
    span = dim - RESERVED_DIMS
    for feat, c in counts.items():
        idx = RESERVED_DIMS + fnv1a_64(f"{prefix}:{feat}") % span
        out[idx] = out.get(idx, 0.0) + c / norm


def featurize(query_umr: str, sentence: str, dim: int = FEATURE_DIM) -> FeatureVector:
    """Hashed features for one (query UMR, sentence) pair. "[MASK]" is an ordinary query token."""
    q_words = [t for t in umr_tokens(query_umr) if t == MASK_TOKEN or is_word(t)]
    s_words = list(tokenize(sentence).words)
    q_bigrams, s_bigrams = _bigrams(q_words), _bigrams(s_words)
    q_vocab, q_bigram_set = set(q_words) - {MASK_TOKEN}, set(q_bigrams)

    out: dict[int, float] = {}
    _hash_group("q", q_words + q_bigrams, dim, out)
    _hash_group("s", s_words + s_bigrams, dim, out)
    _hash_group("x", (w for w in s_words if w in q_vocab), dim, out)

    if s_words:
        out[OVERLAP_UNIGRAM_DIM] = sum(w in q_vocab for w in s_words) / len(s_words)
    if s_bigrams:
        out[OVERLAP_BIGRAM_DIM] = sum(b in q_bigram_set for b in s_bigrams) / len(s_bigrams)
    n_masks = q_words.count(MASK_TOKEN)
    if n_masks:
        out[MASK_COUNT_DIM] = math.log1p(n_masks)
    bucket = min(len(s_words) // LENGTH_BUCKET_WIDTH, LENGTH_BUCKETS)
    _hash_group("len", [str(bucket)], dim, out)

    return SparseVector({k: v for k, v in out.items() if v != 0.0}, dim)


# ---------------------------------------------------------------------------
# Loss / gradient on a batch of featurized examples
# ---------------------------------------------------------------------------

def _pack(batch: Sequence[FeatureVector]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flatten a batch into (example ids, feature indices, values)."""
    rows, idx, vals = [], [], []
    for i, vec in enumerate(batch):
        rows.extend([i] * len(vec.entries))
        idx.extend(vec.entries.keys())
        vals.extend(vec.entries.values())
    return (
        np.asarray(rows, dtype=np.int64),
        np.asarray(idx, dtype=np.int64),
        np.asarray(vals, dtype=np.float64),
    )


def _predict_packed(params: RegressorParams, rows, idx, vals, n: int) -> np.ndarray:
    return np.bincount(rows, weights=params.weights[idx] * vals, minlength=n) + params.bias


def mse_loss(params: RegressorParams, batch: Sequence[FeatureVector], targets: Sequence[float]) -> float:
    rows, idx, vals = _pack(batch)
    preds = _predict_packed(params, rows, idx, vals, len(batch))
    return float(np.mean((np.asarray(targets, dtype=np.float64) - preds) ** 2))


def mse_gradient(
    params: RegressorParams,
    batch: Sequence[FeatureVector],
    targets: Sequence[float],
) -> tuple[np.ndarray, float]:
    """Analytic gradient of the batch MSE: -2/n * sum (y - y_hat) x, and the same for the bias."""
    n = len(batch)
    rows, idx, vals = _pack(batch)
    resid = np.asarray(targets, dtype=np.float64) - _predict_packed(params, rows, idx, vals, n)
    grad_w = np.bincount(idx, weights=-2.0 / n * resid[rows] * vals, minlength=params.dim)
    grad_b = float(-2.0 / n * resid.sum())
    return grad_w, grad_b


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def train(pairs: Iterable[TrainingPair], cfg: TrainConfig = TrainConfig(), dim: int = FEATURE_DIM) -> RegressorParams:
    """Mini-batch SGD on mean squared error.

    Pairs with non-finite targets are skipped with a warning. Batches are
    reduced in a fixed order, so equal inputs give bit-identical params.
    """
    feats: list[FeatureVector] = []
    targets: list[float] = []
    skipped = 0
    for p in pairs:
        if not math.isfinite(p.target):
            logger.warning(f"Skipping pair {p.pair_id}: non-finite target {p.target}")
            skipped += 1
            continue
        feats.append(featurize(p.query_umr, p.sentence, dim))
        targets.append(p.target)
    if not feats:
        raise ValueError(f"No trainable pairs ({skipped} skipped)")

    y = np.asarray(targets, dtype=np.float64)
    params = RegressorParams.zeros(dim)
    rng = np.random.default_rng(cfg.seed)
    epoch_mse: list[float] = []

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(feats))
        sq_err = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            xs = [feats[i] for i in batch]
            sq_err += mse_loss(params, xs, y[batch]) * len(batch)
            grad_w, grad_b = mse_gradient(params, xs, y[batch])
            params.weights -= cfg.learning_rate * grad_w
            params.bias -= cfg.learning_rate * grad_b

        epoch_mse.append(sq_err / len(order))
        logger.info(f"epoch={epoch + 1}/{cfg.epochs} mse={epoch_mse[-1]:.6f} pairs={len(order)}")
        if not params.is_finite():
            raise FloatingPointError(f"Parameters diverged in epoch {epoch + 1}; lower the learning rate")

    params.metadata = {
        "seed": cfg.seed,
        "epochs": cfg.epochs,
        "lr": cfg.learning_rate,
        "batch_size": cfg.batch_size,
        "pairs": len(feats),
        "skipped": skipped,
        "epoch_mse": epoch_mse,
    }
    return params


# ---------------------------------------------------------------------------
# Prediction / ranking
# ---------------------------------------------------------------------------

def predict_features(params: RegressorParams, x: FeatureVector) -> float:
    return float(sum(params.weights[k] * v for k, v in x.entries.items())) + params.bias


def predict(params: RegressorParams, query_umr: str, sentence: str) -> float:
    return predict_features(params, featurize(query_umr, sentence, params.dim))


def rank_by_scores(sentences: Sequence[str], scores: Sequence[float]) -> RankedEvidence:
    """Descending score; ties keep ascending original index."""
    order = sorted(range(len(sentences)), key=lambda i: (-scores[i], i))
    return [RankedSentence(i, sentences[i], float(scores[i])) for i in order]


def rank_evidence(params: RegressorParams, query_umr: str, sentences: Sequence[str]) -> RankedEvidence:
    if not sentences:
        raise ValueError("rank_evidence needs at least one sentence")
    return rank_by_scores(sentences, [predict(params, query_umr, s) for s in sentences])


def pearson_r(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation; 0.0 when either side is constant."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if len(x) < 2 or np.std(x) == 0.0 or np.std(y) == 0.0:
        return 0.0
    return float(np.corrcoef(x, y)[0, 1])


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_params(params: RegressorParams, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trailer = json.dumps({"bias": params.bias, "metadata": params.metadata}, sort_keys=True)
    tmp_path = path.with_suffix(path.suffix + ".tmp")
    with tmp_path.open("wb") as f:
        f.write(_HEADER.pack(PARAMS_MAGIC, PARAMS_VERSION, params.dim))
        f.write(params.weights.astype("<f8").tobytes())
        f.write(trailer.encode("utf-8"))
    tmp_path.replace(path)


def load_params(path: str | Path) -> RegressorParams:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path} is too short to be a params file")
    magic, version, dim = _HEADER.unpack_from(raw)
    if magic != PARAMS_MAGIC:
        raise ValueError(f"{path} is not a params file (magic {magic!r})")
    if version != PARAMS_VERSION:
        raise ValueError(f"Unsupported params version {version}")
    end = _HEADER.size + 8 * dim
    if len(raw) < end:
        raise ValueError(f"{path} is truncated: expected {dim} weights")
    weights = np.frombuffer(raw[_HEADER.size:end], dtype="<f8").astype(np.float64)
    trailer = json.loads(raw[end:].decode("utf-8"))
    params = RegressorParams(weights=weights, bias=float(trailer["bias"]), metadata=trailer.get("metadata", {}))
    if not params.is_finite():
        raise FloatingPointError(f"{path} contains non-finite parameters")
    return params
