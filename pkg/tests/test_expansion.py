import random

import numpy as np
import pytest
import expansion
from expansion import CentralityConfig, expand_query, lexrank_scores, similarity_graph
from text import tokenize

VOCAB = ["storm", "coast", "power", "trees", "rain", "flood", "road", "school", "bridge", "crew"]


def _random_sentences(rng, n):
    return [tokenize(" ".join(rng.choice(VOCAB) for _ in range(rng.randint(2, 8)))) for _ in range(n)]


def _dense_transition(sentences, threshold):
    """Row-normalized TF-IDF cosine graph built from dense term counts."""
    n = len(sentences)
    vocab = sorted({w for s in sentences for w in s.words})
    tf = np.array([[s.words.count(w) for w in vocab] for s in sentences], dtype=np.float64)
    df = (tf > 0).sum(axis=0)
    x = tf * (1.0 + np.log((1 + n) / (1 + df)))
    norms = np.linalg.norm(x, axis=1)
    sim = (x @ x.T) / np.outer(norms, norms)
    adj = np.where(sim >= threshold, sim, 0.0)
    np.fill_diagonal(adj, 0.0)
    rows = adj.sum(axis=1)
    return np.array([adj[i] / rows[i] if rows[i] > 0 else np.full(n, 1.0 / n) for i in range(n)])


def _stationary_oracle(m, damping):
    """Stationary distribution of the damped chain by repeated squaring."""
    n = m.shape[0]
    p = damping * m + (1.0 - damping) / n
    for _ in range(60):
        p = p @ p
        p = p / p.sum(axis=1, keepdims=True)
    return p[0]


# --- lexrank_scores ---

def test_lexrank_single_sentence():
    assert lexrank_scores([tokenize("only one sentence")]) == [1.0]


def test_lexrank_identical_sentences_are_uniform():
    scores = lexrank_scores([tokenize("the storm hit the coast")] * 4)
    assert scores == pytest.approx([0.25] * 4)


def test_lexrank_empty_raises():
    with pytest.raises(ValueError):
        lexrank_scores([])


def test_lexrank_matches_dense_oracle_on_random_graphs():
    rng = random.Random(50)
    for threshold, damping in [(0.1, 0.85), (0.4, 0.6)]:
        cfg = CentralityConfig(similarity_threshold=threshold, damping=damping, epsilon=1e-12, max_iterations=2000)
        for _ in range(50):
            sents = _random_sentences(rng, rng.randint(2, 8))
            scores = np.asarray(lexrank_scores(sents, cfg))
            oracle = _stationary_oracle(_dense_transition(sents, threshold), damping)
            assert np.max(np.abs(scores - oracle)) < 1e-6
            assert scores.sum() == pytest.approx(1.0, abs=1e-9)
            assert np.all(scores >= 0)


def test_similarity_graph_matches_dense_transition():
    rng = random.Random(21)
    for _ in range(30):
        sents = _random_sentences(rng, rng.randint(1, 8))
        np.testing.assert_allclose(similarity_graph(sents), _dense_transition(sents, 0.1), atol=1e-12)


def test_similarity_graph_is_row_stochastic_without_self_loops():
    rng = random.Random(7)
    m = similarity_graph(_random_sentences(rng, 6))
    assert m.sum(axis=1) == pytest.approx(np.ones(6))
    linked = [i for i in range(6) if not np.allclose(m[i], 1 / 6)]
    assert all(m[i, i] == 0.0 for i in linked)


def test_centrality_config_validation():
    with pytest.raises(ValueError):
        CentralityConfig(similarity_threshold=1.0)
    with pytest.raises(ValueError):
        CentralityConfig(damping=1.0)
    with pytest.raises(ValueError):
        CentralityConfig(epsilon=0.0)


# --- expand_query ---

def _words(n, tag):
    return " ".join(f"{tag}{i}" for i in range(n)) + "."


def test_expand_query_greedy_skips_sentences_that_do_not_fit(monkeypatch):
    sents = [_words(10, "a"), _words(8, "b"), _words(4, "c")]
    monkeypatch.setattr(expansion, "lexrank_scores", lambda toks, cfg: [0.5, 0.3, 0.2])
    assert expand_query("storms", sents, word_budget=15) == f"storms {sents[0]} {sents[2]}"


def test_expand_query_nothing_fits():
    assert expand_query("storms", [_words(10, "a")], word_budget=5) == "storms"


def test_expand_query_large_budget_takes_all_in_centrality_order(monkeypatch):
    sents = [_words(3, "a"), _words(3, "b"), _words(3, "c")]
    monkeypatch.setattr(expansion, "lexrank_scores", lambda toks, cfg: [0.2, 0.5, 0.3])
    assert expand_query("q", sents, word_budget=100) == f"q {sents[1]} {sents[2]} {sents[0]}"


def test_expand_query_starts_with_original_query():
    rng = random.Random(3)
    sents = [" ".join(rng.choice(VOCAB) for _ in range(6)) + "." for _ in range(10)]
    out = expand_query("Hurricane damage", sents, word_budget=20)
    assert out.startswith("Hurricane damage")
    assert len(tokenize(out).words) <= 2 + 20


def test_expand_query_rejects_zero_budget():
    with pytest.raises(ValueError):
        expand_query("q", ["a b."], word_budget=0)
