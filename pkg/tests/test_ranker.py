import math
import random
import time

import numpy as np
import pytest
from exchange import ScoreRequest, exchange_external_scores, rank_with_scores, read_scores, write_score_requests
from ranker import (
    MASK_COUNT_DIM,
    OVERLAP_BIGRAM_DIM,
    OVERLAP_UNIGRAM_DIM,
    RegressorParams,
    TrainConfig,
    featurize,
    load_params,
    mse_gradient,
    mse_loss,
    pearson_r,
    predict,
    predict_features,
    rank_by_scores,
    rank_evidence,
    save_params,
    train,
)
from supervision import TrainingPair

DIM = 2 ** 16
QUERY_POOL = [f"topic{i}" for i in range(40)]
OTHER_POOL = [f"filler{i}" for i in range(40)]


def _planted_pairs(n, seed, noise=0.0):
    """Target is a known linear function of the shared-unigram ratio."""
    rng = random.Random(seed)
    pairs = []
    for i in range(n):
        q_words = rng.sample(QUERY_POOL, 10)
        k = rng.randint(0, 10)
        s_words = q_words[:k] + rng.sample(OTHER_POOL, 10 - k)
        rng.shuffle(s_words)
        target = 0.8 * (k / 10) + 0.1 + rng.gauss(0.0, noise)
        pairs.append(TrainingPair(f"p{i}", "[MASK] " + " ".join(q_words), " ".join(s_words), target))
    return pairs


def _predict_all(params, pairs):
    return [predict(params, p.query_umr, p.sentence) for p in pairs]


# --- featurize ---

def test_featurize_is_deterministic():
    assert featurize("[MASK] the bridge", "The bridge closed.", DIM) == featurize("[MASK] the bridge", "The bridge closed.", DIM)


def test_featurize_identical_text_has_full_overlap():
    x = featurize("boats raced home", "boats raced home", DIM)
    assert x.entries[OVERLAP_UNIGRAM_DIM] == pytest.approx(1.0)
    assert x.entries[OVERLAP_BIGRAM_DIM] == pytest.approx(1.0)


def test_featurize_empty_sentence_has_no_overlap():
    x = featurize("[MASK] boats", "", DIM)
    assert OVERLAP_UNIGRAM_DIM not in x.entries
    assert OVERLAP_BIGRAM_DIM not in x.entries
    assert x.entries[MASK_COUNT_DIM] == pytest.approx(math.log1p(1))


def test_featurize_mask_changes_features():
    assert featurize("[MASK] boats", "boats", DIM) != featurize("boats", "boats", DIM)


def test_featurize_values_are_finite_and_in_range():
    x = featurize("[MASK] a b [MASK] c", "a b c d e f", DIM)
    assert x.dim == DIM
    assert all(math.isfinite(v) for v in x.entries.values())


# --- mse_loss / mse_gradient ---

def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    pairs = _planted_pairs(50, seed=3)
    batch = [featurize(p.query_umr, p.sentence, DIM) for p in pairs]
    targets = [p.target for p in pairs]
    params = RegressorParams(weights=rng.normal(0, 0.1, DIM), bias=0.2)

    grad_w, grad_b = mse_gradient(params, batch, targets)
    touched = sorted({k for x in batch for k in x.entries})
    step = 1e-5
    for k in rng.choice(touched, size=10, replace=False):
        w0 = params.weights[k]
        params.weights[k] = w0 + step
        up = mse_loss(params, batch, targets)
        params.weights[k] = w0 - step
        down = mse_loss(params, batch, targets)
        params.weights[k] = w0
        numeric = (up - down) / (2 * step)
        assert abs(grad_w[k] - numeric) / max(abs(grad_w[k]), abs(numeric), 1e-3) < 1e-4

    params.bias += step
    up = mse_loss(params, batch, targets)
    params.bias -= 2 * step
    down = mse_loss(params, batch, targets)
    assert grad_b == pytest.approx((up - down) / (2 * step), rel=1e-4)


# --- train ---

def test_train_constant_zero_target():
    pairs = [TrainingPair(f"p{i}", "[MASK] a", f"word{i} b", 0.0) for i in range(20)]
    params = train(pairs, TrainConfig(learning_rate=0.05, batch_size=4, epochs=2), dim=DIM)
    assert params.metadata["epoch_mse"][-1] < 1e-4
    assert abs(predict(params, "[MASK] a", "word3 b")) < 1e-2


def test_train_recovers_planted_linear_target():
    start = time.perf_counter()
    train_pairs = _planted_pairs(4000, seed=1, noise=0.02)
    held_out = _planted_pairs(1000, seed=2, noise=0.02)
    params = train(train_pairs, TrainConfig(learning_rate=0.05, batch_size=16, epochs=8, seed=0), dim=DIM)

    preds = _predict_all(params, held_out)
    ys = [p.target for p in held_out]
    mse = float(np.mean((np.asarray(preds) - np.asarray(ys)) ** 2))
    constant_mse = float(np.var(ys))
    assert pearson_r(preds, ys) > 0.9
    assert mse * 5 <= constant_mse
    assert time.perf_counter() - start < 30.0
    epoch_mse = params.metadata["epoch_mse"]
    assert epoch_mse[0] >= epoch_mse[-1]


def test_train_is_bit_identical_for_equal_inputs():
    pairs = _planted_pairs(200, seed=4)
    cfg = TrainConfig(learning_rate=0.05, batch_size=8, epochs=2, seed=9)
    a, b = train(pairs, cfg, dim=DIM), train(pairs, cfg, dim=DIM)
    assert np.array_equal(a.weights, b.weights)
    assert a.bias == b.bias


def test_single_batch_epoch_is_one_gradient_step():
    pairs = _planted_pairs(30, seed=6)
    cfg = TrainConfig(learning_rate=0.05, batch_size=30, epochs=1, seed=0)
    params = train(pairs, cfg, dim=DIM)

    batch = [featurize(p.query_umr, p.sentence, DIM) for p in pairs]
    grad_w, grad_b = mse_gradient(RegressorParams.zeros(DIM), batch, [p.target for p in pairs])
    np.testing.assert_allclose(params.weights, -cfg.learning_rate * grad_w, atol=1e-12)
    assert params.bias == pytest.approx(-cfg.learning_rate * grad_b, abs=1e-12)


def test_train_skips_non_finite_targets():
    pairs = [TrainingPair("bad", "a", "a", float("nan")), TrainingPair("ok", "a", "a", 0.5)]
    params = train(pairs, TrainConfig(batch_size=1, epochs=1), dim=DIM)
    assert params.metadata["skipped"] == 1
    assert params.metadata["pairs"] == 1


def test_train_all_skipped_raises():
    with pytest.raises(ValueError):
        train([TrainingPair("bad", "a", "a", float("inf"))], dim=DIM)


def test_train_config_rejects_zero_epochs():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)


# --- predict ---

def test_predict_zero_params():
    assert predict(RegressorParams.zeros(DIM), "[MASK] x", "any sentence") == 0.0


def test_predict_is_linear_in_weights():
    rng = np.random.default_rng(0)
    params = RegressorParams(weights=rng.normal(size=DIM))
    doubled = RegressorParams(weights=params.weights * 2)
    x = featurize("[MASK] boats", "boats sailed", DIM)
    assert predict_features(doubled, x) == pytest.approx(2 * predict_features(params, x))


# --- rank_evidence / rank_by_scores ---

def test_rank_single_sentence():
    [top] = rank_evidence(RegressorParams.zeros(DIM), "q", ["only one."])
    assert (top.index, top.score) == (0, 0.0)


def test_rank_ties_keep_original_order():
    assert [r.index for r in rank_by_scores(["a", "b", "c"], [1.0, 1.0, 1.0])] == [0, 1, 2]


def test_rank_is_invariant_under_positive_affine_transform():
    scores = [0.3, -1.0, 2.5, 0.3, 0.0]
    sents = list("abcde")
    base = [r.index for r in rank_by_scores(sents, scores)]
    assert base == [2, 0, 3, 4, 1]
    assert [r.index for r in rank_by_scores(sents, [3 * s + 7 for s in scores])] == base


def test_rank_evidence_empty_raises():
    with pytest.raises(ValueError):
        rank_evidence(RegressorParams.zeros(DIM), "q", [])


def test_pearson_r_constant_side_is_zero():
    assert pearson_r([1, 1, 1], [1, 2, 3]) == 0.0
    assert pearson_r([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)


# --- save_params / load_params ---

def test_params_file_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    params = RegressorParams(weights=rng.normal(size=64), bias=0.25, metadata={"gamma": 0.5, "lambda": 0.15})
    path = tmp_path / "params.bin"
    save_params(params, path)
    loaded = load_params(path)
    assert np.array_equal(loaded.weights, params.weights)
    assert loaded.bias == 0.25
    assert loaded.metadata == {"gamma": 0.5, "lambda": 0.15}
    assert path.read_bytes()[:4] == b"MRGE"


def test_load_params_rejects_bad_magic(tmp_path):
    path = tmp_path / "params.bin"
    path.write_bytes(b"XXXX" + bytes(20))
    with pytest.raises(ValueError):
        load_params(path)


def test_load_params_rejects_truncated_file(tmp_path):
    path = tmp_path / "params.bin"
    save_params(RegressorParams.zeros(64), path)
    path.write_bytes(path.read_bytes()[:100])
    with pytest.raises(ValueError):
        load_params(path)


# --- exchange ---

def _requests():
    return [ScoreRequest("1", "[MASK] q", "first."), ScoreRequest("2", "[MASK] q", "second.")]


def _write_scores(path, rows):
    path.write_text("".join(f'{{"id": "{i}", "score": {s}}}\n' for i, s in rows))


def test_external_scores_order(tmp_path):
    path = tmp_path / "scores.jsonl"
    _write_scores(path, [("1", 0.9), ("2", 0.1)])
    assert [r.index for r in exchange_external_scores(_requests(), path)] == [0, 1]
    _write_scores(path, [("1", 0.1), ("2", 0.9)])
    assert [r.sentence for r in exchange_external_scores(_requests(), path)] == ["second.", "first."]


def test_external_scores_missing_id(tmp_path):
    path = tmp_path / "scores.jsonl"
    _write_scores(path, [("1", 0.9)])
    with pytest.raises(ValueError, match="missing score for id 2"):
        exchange_external_scores(_requests(), path)


def test_external_scores_duplicate_and_non_finite(tmp_path):
    path = tmp_path / "scores.jsonl"
    _write_scores(path, [("1", 0.9), ("1", 0.2)])
    with pytest.raises(ValueError, match="duplicate"):
        read_scores(path)
    _write_scores(path, [("1", "NaN")])
    with pytest.raises(ValueError, match="non-finite"):
        read_scores(path)


def test_external_scores_equal_to_predictions_give_same_ranking(tmp_path):
    rng = np.random.default_rng(1)
    params = RegressorParams(weights=rng.normal(size=DIM))
    sentences = ["Boats sailed.", "The harbor was busy.", "Crowds cheered boats.", "Rain fell."]
    query = "[MASK] boats harbor"
    requests = [ScoreRequest(str(i), query, s) for i, s in enumerate(sentences)]
    write_score_requests(requests, tmp_path / "requests.jsonl")
    scores = {r.id: predict(params, r.query, r.sentence) for r in requests}
    assert rank_with_scores(requests, scores) == rank_evidence(params, query, sentences)
