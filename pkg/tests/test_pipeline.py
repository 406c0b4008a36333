import copy
import json
import math

import evaluation
import pandas as pd
import pytest
from data.corpus import read_corpus, read_jsonl
from evaluation import baseline_rank, recall_at_k
from expansion import CentralityConfig
from pipeline.report import generate_report, write_table
from pipeline.stages import (
    _method_rankings,
    _tokens,
    query_umr,
    run_eval,
    run_expand,
    run_extract,
    run_genprep,
    run_mask,
    run_pairs,
    run_rank,
    run_synth,
    run_train,
)
from pipeline.sweep import run_gamma_sweep, run_sweep_stage


def _with_output(cfg, path):
    other = copy.deepcopy(cfg)
    other.output_dir = str(path)
    return other


def _trained(cfg):
    run_pairs(cfg)
    run_train(cfg)
    return cfg


# --- mask / pairs / train ---

def test_mask_stage(tiny_config):
    meta = run_mask(tiny_config)
    rows = list(read_jsonl(tiny_config.out / "masks.jsonl"))
    assert len(rows) == 6
    assert sum("query_umr" in r for r in rows) == 2
    assert meta["mean_masks"] > 0
    assert (tiny_config.out / "mask.meta.json").exists()


def test_pairs_stage_splits_by_cluster(tiny_config):
    meta = run_pairs(tiny_config)
    train_ids = {r["pair_id"].split(":")[0] for r in read_jsonl(tiny_config.pairs_path)}
    dev_ids = {r["pair_id"].split(":")[0] for r in read_jsonl(tiny_config.dev_pairs_path)}
    assert train_ids and dev_ids
    assert train_ids.isdisjoint(dev_ids)
    assert meta["train_clusters"] + meta["dev_clusters"] == 6


def test_train_stage_writes_params_and_dev_metrics(tiny_config):
    _trained(tiny_config)
    meta = json.loads((tiny_config.out / "train.meta.json").read_text())
    assert tiny_config.params_path.exists()
    assert len(meta["epoch_mse"]) == tiny_config.epochs
    assert meta["dev"]["pairs"] > 0
    assert all(math.isfinite(x) for x in meta["epoch_mse"])


def test_train_without_pairs_raises(tiny_config):
    with pytest.raises(FileNotFoundError):
        run_train(tiny_config)


def test_stage_outputs_are_byte_identical_across_runs(tiny_config, tmp_path):
    a = _with_output(tiny_config, tmp_path / "a")
    b = _with_output(tiny_config, tmp_path / "b")
    for cfg in (a, b):
        _trained(cfg)
        run_rank(cfg)
        run_synth(cfg)
    for name in ("pairs.jsonl", "pairs.dev.jsonl", "params.bin", "ranked.jsonl", "synth_corpus.jsonl"):
        assert (a.out / name).read_bytes() == (b.out / name).read_bytes(), name


def test_pairs_do_not_depend_on_worker_count(tiny_config, tmp_path):
    serial = _with_output(tiny_config, tmp_path / "serial")
    parallel = _with_output(tiny_config, tmp_path / "parallel")
    parallel.workers = 4
    run_pairs(serial)
    run_pairs(parallel)
    assert serial.pairs_path.read_bytes() == parallel.pairs_path.read_bytes()


# --- rank / extract / expand ---

def test_rank_stage(tiny_config):
    _trained(tiny_config)
    meta = run_rank(tiny_config)
    rows = list(read_jsonl(tiny_config.out / "ranked.jsonl"))
    assert len(rows) == 6
    assert all(sorted(x["index"] for x in r["ranking"]) == list(range(32)) for r in rows)
    assert meta["outputs"] == 6 * 32
    assert meta["scorer"] == "regressor"


def test_rank_with_external_scores(tiny_config, tmp_path):
    records = read_corpus(tiny_config.corpus)
    scores = tmp_path / "scores.jsonl"
    # external scorer prefers later sentences
    scores.write_text("".join(
        json.dumps({"id": f"{r.cluster_id}:{i}", "score": float(i)}) + "\n"
        for r in records for i in range(len(r.sentences))
    ))
    tiny_config.external_scores = str(scores)
    run_rank(tiny_config)
    rows = list(read_jsonl(tiny_config.out / "ranked.jsonl"))
    assert [x["index"] for x in rows[0]["ranking"]][:3] == [31, 30, 29]


def test_rank_without_params_raises(tiny_config):
    with pytest.raises(FileNotFoundError):
        run_rank(tiny_config)


def test_extract_stage_respects_budget(tiny_config):
    _trained(tiny_config)
    run_extract(tiny_config)
    for row in read_jsonl(tiny_config.out / "extracts.jsonl"):
        assert 0 < sum(_tokens([s]).word_count for s in row["sentences"]) <= tiny_config.word_budget


def test_expand_stage_keeps_original_query(tiny_config):
    run_expand(tiny_config)
    rows = list(read_jsonl(tiny_config.out / "expanded_queries.jsonl"))
    assert len(rows) == 2
    for row in rows:
        assert row["expanded"].startswith(row["query"])
        assert len(row["expanded"]) > len(row["query"])


def test_query_umr_sources(tiny_config, tiny_records):
    by_id = {r.cluster_id: r for r in tiny_records}
    flu = query_umr(by_id["flu-vaccine"], tiny_config)
    assert flu.startswith("[MASK] flu vaccine clinics .")
    harbor = query_umr(by_id["harbor-festival"], tiny_config)
    assert "[MASK]" not in harbor
    tiny_config.ablation = "no_query"
    assert query_umr(by_id["flu-vaccine"], tiny_config) == ""


# --- eval ---

def test_eval_stage_report(tiny_config, tmp_path):
    _trained(tiny_config)
    generated = tmp_path / "generated.jsonl"
    generated.write_text(json.dumps({"id": "harbor-festival", "summary": "The harbor festival opened on Friday."}) + "\n")
    tiny_config.generated = str(generated)
    meta = run_eval(tiny_config)

    macro = meta["macro"]
    assert list(macro) == ["ranker", "termfreq", "lead", "lexrank", "random", "generated", "gold"]
    assert macro["ranker"]["queries"] == 6
    assert macro["gold"]["queries"] == 2
    assert "R@10" not in macro["gold"]
    report = json.loads((tiny_config.out / "eval_report.json").read_text())
    assert report["macro"] == macro
    table = pd.read_csv(tiny_config.out / "eval_table.csv")
    assert list(table["method"]) == list(macro)


def test_eval_without_params_runs_baselines(tiny_config):
    meta = run_eval(tiny_config)
    assert "ranker" not in meta["macro"]
    assert "termfreq" in meta["macro"]


def test_trained_ranker_beats_random_and_termfreq(tiny_config):
    tiny_config.gamma = 1.0
    tiny_config.baselines = ["termfreq"]
    _trained(tiny_config)
    macro = run_eval(tiny_config)["macro"]

    records = read_corpus(tiny_config.corpus)
    random_means = []
    for seed in range(20):
        recalls = []
        for r in records:
            ranked = baseline_rank("random", "", [d.sentences for d in r.documents], seed=seed)
            recalls.append(recall_at_k(ranked, [_tokens(ref) for ref in r.all_references], 10))
        random_means.append(sum(recalls) / len(recalls))
    random_r10 = sum(random_means) / len(random_means)

    assert macro["ranker"]["R@10"] >= 2 * random_r10
    assert macro["ranker"]["R@10"] >= macro["termfreq"]["R@10"]


def test_lexrank_baseline_receives_configured_centrality(tiny_config, tiny_records, monkeypatch):
    seen = []
    original = evaluation.lexrank_scores

    def recording(sentences, cfg):
        seen.append(cfg)
        return original(sentences, cfg)

    monkeypatch.setattr(evaluation, "lexrank_scores", recording)
    tiny_config.baselines = ["lexrank"]
    tiny_config.lexrank_threshold = 0.3
    tiny_config.lexrank_damping = 0.7
    tiny_config.lexrank_epsilon = 1e-4
    tiny_config.lexrank_max_iterations = 7
    rankings = _method_rankings(tiny_records[0], tiny_config, None)
    assert set(rankings) == {"lexrank"}
    assert seen == [CentralityConfig(similarity_threshold=0.3, damping=0.7, epsilon=1e-4, max_iterations=7)]


# --- synth / genprep ---

def test_synth_stage_output_feeds_back_as_corpus(tiny_config):
    meta = run_synth(tiny_config)
    records = read_corpus(tiny_config.out / "synth_corpus.jsonl")
    assert len(records) == 6
    assert sum(meta["cluster_sizes"].values()) == 6


def test_genprep_train_mode(tiny_config):
    tiny_config.genprep_mode = "train"
    run_genprep(tiny_config)
    rows = list(read_jsonl(tiny_config.out / "generator_inputs.jsonl"))
    bins = json.loads((tiny_config.out / "length_bins.json").read_text())["bins"]
    tokens = {b["token"] for b in bins}
    assert len(bins) == 4
    assert len(rows) == 6
    assert all(r["length_token"] in tokens and r["text"].startswith(r["length_token"]) for r in rows)
    assert all("[MASK]" in r["text"] for r in rows)


def test_genprep_infer_mode_uses_ranked_evidence(tiny_config):
    _trained(tiny_config)
    run_genprep(tiny_config)
    rows = list(read_jsonl(tiny_config.out / "generator_inputs.jsonl"))
    assert len(rows) == 6
    assert all(r["requested_length"] == tiny_config.summary_length for r in rows)
    assert all(len(r["text"].split()) < 2 * tiny_config.max_input_tokens for r in rows)


def test_genprep_document_order_follows_source_positions(tiny_config, tmp_path):
    _trained(tiny_config)
    run_genprep(tiny_config)
    ranked_rows = {r["id"]: r for r in read_jsonl(tiny_config.out / "generator_inputs.jsonl")}
    doc_cfg = _with_output(tiny_config, tmp_path / "doc")
    doc_cfg.params = str(tiny_config.params_path)
    doc_cfg.evidence_order = "document"
    meta = run_genprep(doc_cfg)
    assert meta["evidence_order"] == "document"
    records = {r.cluster_id: r for r in read_corpus(tiny_config.corpus)}
    for row in read_jsonl(doc_cfg.out / "generator_inputs.jsonl"):
        segments = row["text"].split(" [SEP] ")[1:]
        sentences = records[row["id"]].sentences
        positions = [next(i for i, s in enumerate(sentences) if s.startswith(seg)) for seg in segments]
        assert positions == sorted(positions)
        assert sorted(segments) == sorted(ranked_rows[row["id"]]["text"].split(" [SEP] ")[1:])


# --- gamma sweep ---

def test_gamma_sweep_revealing_the_summary_helps(tiny_config):
    tiny_config.sweep_gammas = [0.0, 1.0]
    rows = run_gamma_sweep(tiny_config)
    assert [r["gamma"] for r in rows] == [0.0, 1.0]
    assert rows[1]["pearson_r"] > rows[0]["pearson_r"]
    assert rows[0]["dev_pairs"] == rows[1]["dev_pairs"] > 0


def test_gamma_sweep_stage_writes_csv(tiny_config, capsys):
    tiny_config.sweep_gammas = [0.0, 0.5]
    run_sweep_stage(tiny_config)
    table = pd.read_csv(tiny_config.out / "gamma_sweep.csv")
    assert list(table.columns) == ["gamma", "pearson_r", "mse", "train_pairs", "dev_pairs"]
    assert len(table) == 2
    assert "GAMMA SWEEP" in capsys.readouterr().out


# --- report ---

def test_generate_report_skips_missing_metrics(tmp_path, capsys):
    rows = [
        {"cluster_id": "a", "method": "ranker", "R1": 0.5, "R2": 0.2, "SU4": 0.3, "R@10": 0.4, "R@50": 0.6},
        {"cluster_id": "b", "method": "ranker", "R1": 0.3, "R2": 0.0, "SU4": 0.1, "R@10": 0.2, "R@50": 0.4},
        {"cluster_id": "a", "method": "gold", "R1": 0.7, "R2": 0.4, "SU4": 0.5},
    ]
    macro = generate_report(rows)
    assert macro["ranker"] == {"queries": 2, "R1": 0.4, "R2": 0.1, "SU4": 0.2, "R@10": 0.3, "R@50": 0.5}
    assert macro["gold"] == {"queries": 1, "R1": 0.7, "R2": 0.4, "SU4": 0.5}
    assert "EVALUATION" in capsys.readouterr().out
    table = pd.read_csv(write_table(macro, tmp_path / "table.csv"))
    assert math.isnan(table.loc[1, "R@10"])


def test_generate_report_empty():
    assert generate_report([], print_output=False) == {}
