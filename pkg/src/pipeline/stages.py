"""
Pipeline stages. One function per CLI command; each reads its inputs from the
paths in PipelineConfig, writes its outputs atomically under cfg.output_dir and
finishes with a `<stage>.meta.json` record plus one structured log line:

    stage=<name> inputs=<n> outputs=<m> path=<output>

    run_mask(cfg)      -> masks.jsonl            proxy-query / query UMR per cluster
    run_pairs(cfg)     -> pairs.jsonl, pairs.dev.jsonl
    run_train(cfg)     -> params.bin
    run_rank(cfg)      -> ranked.jsonl, score_requests.jsonl
    run_expand(cfg)    -> expanded_queries.jsonl
    run_extract(cfg)   -> extracts.jsonl
    run_eval(cfg)      -> eval_report.json, eval_table.csv
    run_synth(cfg)     -> synth_corpus.jsonl
    run_genprep(cfg)   -> generator_inputs.jsonl, length_bins.json

Stages carry no timestamps, so equal config and seed give byte-identical files.

Queries: a record with a `query` is rendered through mask_query (after LexRank
expansion when cfg.expand_queries is set). A record without one is evaluated
with its own reference summary as the query (reveal ratio 1).
"""
import logging
from dataclasses import dataclass
from pathlib import Path

from config import RECALL_K, PipelineConfig
from data.corpus import CorpusRecord, read_corpus, split_records, write_corpus, write_json, write_jsonl
from evaluation import ExtractBudget, assemble_extract, baseline_rank, evaluate_extract, gold_upper_bound, recall_at_k
from exchange import ScoreRequest, rank_with_scores, read_scores, write_score_requests
from expansion import CentralityConfig, expand_query
from genprep import (
    build_length_bins,
    load_length_bins,
    oracle_order,
    prepare_generator_input,
    read_generated,
    save_length_bins,
)
from pipeline.report import generate_report, write_table
from ranker import (
    RankedEvidence,
    RegressorParams,
    TrainConfig,
    featurize,
    load_params,
    mse_loss,
    pearson_r,
    predict_features,
    rank_evidence,
    save_params,
    train,
)
from rouge import TargetConfig
from supervision import SamplingPolicy, TrainingPair, build_corpus_pairs, proxy_query, read_pairs, record_seed
from synth import build_synthetic_corpus
from text import TokenSeq, split_sentences, tokenize
from umr import MaskPolicy, load_propositions, mask_query, render_umr

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def finish_stage(cfg: PipelineConfig, stage: str, inputs: int, outputs: int, path: Path, **extra) -> dict:
    meta = {"stage": stage, "inputs": inputs, "outputs": outputs, "path": str(path), **extra, "config": cfg.to_dict()}
    write_json(cfg.out / f"{stage}.meta.json", meta)
    logger.info(f"stage={stage} inputs={inputs} outputs={outputs} path={path}")
    return meta


def load_records(cfg: PipelineConfig, path: str | None = None) -> list[CorpusRecord]:
    path = path or cfg.corpus
    if not Path(path).exists():
        raise FileNotFoundError(f"Corpus not found: {path}")
    return read_corpus(path)


def _tokens(sentences: list[str]) -> TokenSeq:
    return TokenSeq(tuple(t for s in sentences for t in tokenize(s).tokens))


def _centrality(cfg: PipelineConfig) -> CentralityConfig:
    return CentralityConfig(
        similarity_threshold=cfg.lexrank_threshold,
        damping=cfg.lexrank_damping,
        epsilon=cfg.lexrank_epsilon,
        max_iterations=cfg.lexrank_max_iterations,
    )


def _sampling(cfg: PipelineConfig) -> SamplingPolicy:
    return SamplingPolicy(granularity=cfg.granularity, head=cfg.head, tail=cfg.tail)


def query_narrative(record: CorpusRecord, cfg: PipelineConfig) -> str | None:
    if record.query is None:
        return None
    if not cfg.expand_queries:
        return record.query.narrative
    return expand_query(record.query.narrative, record.sentences, cfg.expansion_word_budget, _centrality(cfg))


def query_umr(record: CorpusRecord, cfg: PipelineConfig) -> str:
    """Query text for ranking: the masked (optionally expanded) query, or the reference summary as query."""
    if cfg.ablation == "no_query":
        return ""
    narrative = query_narrative(record, cfg)
    if narrative is None:
        return proxy_query(record, MaskPolicy(gamma=1.0, seed=record_seed(cfg.seed, record.cluster_id)))
    title = tokenize(record.query.title) if record.query.title else None
    return render_umr(mask_query(title, tokenize(narrative)))


@dataclass
class _Scorer:
    """Internal regressor params or an external score table, whichever is configured."""
    params: RegressorParams | None = None
    external: dict[str, float] | None = None

    def rank(self, record: CorpusRecord, query: str) -> RankedEvidence:
        sentences = record.sentences
        if not sentences:
            logger.warning(f"Record {record.cluster_id} has no sentences to rank")
            return []
        if self.external is not None:
            return rank_with_scores(_score_requests(record, query), self.external)
        return rank_evidence(self.params, query, sentences)


def _score_requests(record: CorpusRecord, query: str) -> list[ScoreRequest]:
    return [ScoreRequest(f"{record.cluster_id}:{i}", query, s) for i, s in enumerate(record.sentences)]


def _load_scorer(cfg: PipelineConfig, required: bool = True) -> _Scorer | None:
    if cfg.external_scores:
        return _Scorer(external=read_scores(cfg.external_scores))
    if cfg.params_path.exists():
        return _Scorer(params=load_params(cfg.params_path))
    if required:
        raise FileNotFoundError(f"No params at {cfg.params_path}; run `train` first or set external_scores")
    return None


def _ranking_rows(ranked: RankedEvidence) -> list[dict]:
    return [{"index": r.index, "sentence": r.sentence, "score": r.score} for r in ranked]


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def run_mask(cfg: PipelineConfig) -> dict:
    records = load_records(cfg)
    rows = []
    for r in records:
        mask_policy = MaskPolicy(gamma=cfg.gamma, seed=record_seed(cfg.seed, r.cluster_id))
        row = {"cluster_id": r.cluster_id, "summary_umr": proxy_query(r, mask_policy, cfg.ablation)}
        if r.query is not None:
            row["query_umr"] = query_umr(r, cfg)
        rows.append(row)
    path = cfg.out / "masks.jsonl"
    n = write_jsonl(path, rows)
    masks = sum(row["summary_umr"].count("[MASK]") for row in rows)
    return finish_stage(cfg, "mask", len(records), n, path, mean_masks=round(masks / n, 4) if n else 0.0)


def pairs_for(records: list[CorpusRecord], cfg: PipelineConfig, gamma: float) -> list[TrainingPair]:
    return build_corpus_pairs(
        records,
        _sampling(cfg),
        gamma=gamma,
        seed=cfg.seed,
        cfg=TargetConfig(lambda_=cfg.lambda_),
        ablation=cfg.ablation,
        propositions=_propositions(cfg),
        workers=cfg.workers,
    )


def _propositions(cfg: PipelineConfig) -> dict | None:
    if not cfg.propositions:
        return None
    return load_propositions(cfg.propositions)


def run_pairs(cfg: PipelineConfig) -> dict:
    records = load_records(cfg)
    train_records, dev_records = split_records(records, cfg.dev_fraction)
    train_pairs = pairs_for(train_records, cfg, cfg.gamma)
    dev_pairs = pairs_for(dev_records, cfg, cfg.gamma)
    n = write_jsonl(cfg.pairs_path, (p.to_dict() for p in train_pairs))
    n_dev = write_jsonl(cfg.dev_pairs_path, (p.to_dict() for p in dev_pairs))
    return finish_stage(
        cfg, "pairs", len(records), n, cfg.pairs_path,
        dev_pairs=n_dev,
        dev_path=str(cfg.dev_pairs_path),
        train_clusters=len(train_records),
        dev_clusters=len(dev_records),
    )


def dev_metrics(params: RegressorParams, pairs: list[TrainingPair]) -> dict:
    """Held-out Pearson r and MSE of the regressor on `pairs`."""
    if not pairs:
        return {"pearson_r": 0.0, "mse": 0.0, "pairs": 0}
    feats = [featurize(p.query_umr, p.sentence, params.dim) for p in pairs]
    targets = [p.target for p in pairs]
    preds = [predict_features(params, f) for f in feats]
    return {"pearson_r": pearson_r(preds, targets), "mse": mse_loss(params, feats, targets), "pairs": len(pairs)}


def train_config(cfg: PipelineConfig) -> TrainConfig:
    return TrainConfig(learning_rate=cfg.learning_rate, batch_size=cfg.batch_size, epochs=cfg.epochs, seed=cfg.seed)


def run_train(cfg: PipelineConfig) -> dict:
    if not cfg.pairs_path.exists():
        raise FileNotFoundError(f"Pairs not found: {cfg.pairs_path}; run `pairs` first")
    pairs = list(read_pairs(cfg.pairs_path))
    params = train(pairs, train_config(cfg))
    params.metadata.update({"lambda": cfg.lambda_, "gamma": cfg.gamma, "ablation": cfg.ablation})
    dev = dev_metrics(params, list(read_pairs(cfg.dev_pairs_path))) if cfg.dev_pairs_path.exists() else {}
    if dev:
        logger.info(f"dev pearson_r={dev['pearson_r']:.4f} mse={dev['mse']:.6f} pairs={dev['pairs']}")
    save_params(params, cfg.params_path)
    return finish_stage(
        cfg, "train", len(pairs), params.metadata["pairs"], cfg.params_path,
        epoch_mse=params.metadata["epoch_mse"],
        dev=dev,
    )


def run_rank(cfg: PipelineConfig) -> dict:
    records = load_records(cfg)
    queries = {r.cluster_id: query_umr(r, cfg) for r in records}
    requests = [req for r in records for req in _score_requests(r, queries[r.cluster_id])]
    write_score_requests(requests, cfg.out / "score_requests.jsonl")

    scorer = _load_scorer(cfg)
    if scorer.external is not None:
        extra = set(scorer.external) - {req.id for req in requests}
        if extra:
            logger.warning(f"Ignoring {len(extra)} external scores with no matching request")
    rows = []
    for r in records:
        ranked = scorer.rank(r, queries[r.cluster_id])
        rows.append({"cluster_id": r.cluster_id, "query": queries[r.cluster_id], "ranking": _ranking_rows(ranked)})
    path = cfg.out / "ranked.jsonl"
    write_jsonl(path, rows)
    scorer_name = "external" if scorer.external is not None else "regressor"
    return finish_stage(cfg, "rank", len(records), len(requests), path, scorer=scorer_name)


def run_expand(cfg: PipelineConfig) -> dict:
    records = load_records(cfg)
    rows = []
    for r in records:
        if r.query is None:
            continue
        expanded = expand_query(r.query.narrative, r.sentences, cfg.expansion_word_budget, _centrality(cfg))
        rows.append({"cluster_id": r.cluster_id, "query": r.query.narrative, "expanded": expanded})
    if not rows:
        logger.warning("No records carry a query; nothing to expand")
    path = cfg.out / "expanded_queries.jsonl"
    n = write_jsonl(path, rows)
    return finish_stage(cfg, "expand", len(records), n, path)


def run_extract(cfg: PipelineConfig) -> dict:
    records = load_records(cfg)
    scorer = _load_scorer(cfg)
    budget = ExtractBudget(cfg.word_budget, cfg.redundancy_threshold)
    rows = []
    for r in records:
        extract = assemble_extract(scorer.rank(r, query_umr(r, cfg)), budget)
        rows.append({"cluster_id": r.cluster_id, "sentences": extract})
    path = cfg.out / "extracts.jsonl"
    n = write_jsonl(path, rows)
    return finish_stage(cfg, "extract", len(records), n, path)


def _method_rankings(record: CorpusRecord, cfg: PipelineConfig, scorer: _Scorer | None) -> dict[str, RankedEvidence]:
    out: dict[str, RankedEvidence] = {}
    if scorer is not None:
        out["ranker"] = scorer.rank(record, query_umr(record, cfg))
    docs = [d.sentences for d in record.documents]
    narrative = query_narrative(record, cfg)
    query = narrative if narrative is not None else " ".join(record.summary)
    seed = record_seed(cfg.seed, record.cluster_id)
    for method in cfg.baselines:
        if record.sentences:
            out[method] = baseline_rank(method, query, docs, seed=seed, centrality=_centrality(cfg))
    return out


def run_eval(cfg: PipelineConfig) -> dict:
    records = load_records(cfg)
    scorer = _load_scorer(cfg, required=False)
    if scorer is None:
        logger.warning(f"No params at {cfg.params_path}; evaluating baselines only")
    generated = read_generated(cfg.generated) if cfg.generated else {}
    budget = ExtractBudget(cfg.word_budget, cfg.redundancy_threshold)

    per_query = []
    for r in records:
        references = [_tokens(ref) for ref in r.all_references]
        for method, ranked in _method_rankings(r, cfg, scorer).items():
            row = {"cluster_id": r.cluster_id, "method": method}
            for k in RECALL_K:
                row[f"R@{k}"] = recall_at_k(ranked, references, k) if ranked else 0.0
            scores = evaluate_extract(assemble_extract(ranked, budget), references, cfg.stem)
            row.update({v: s.f1 for v, s in scores.items()})
            per_query.append(row)
        if len(references) >= 2:
            scores = gold_upper_bound(references, cfg.stem)
            per_query.append({"cluster_id": r.cluster_id, "method": "gold", **{v: s.f1 for v, s in scores.items()}})
        if r.cluster_id in generated:
            summary = split_sentences(generated[r.cluster_id])
            scores = evaluate_extract(summary, references, cfg.stem)
            per_query.append({"cluster_id": r.cluster_id, "method": "generated", **{v: s.f1 for v, s in scores.items()}})

    macro = generate_report(per_query, print_output=False)
    path = cfg.out / "eval_report.json"
    write_json(path, {"per_query": per_query, "macro": macro})
    write_table(macro, cfg.out / "eval_table.csv")
    return finish_stage(cfg, "eval", len(records), len(per_query), path, macro=macro)


def run_synth(cfg: PipelineConfig) -> dict:
    records = load_records(cfg, cfg.synth_corpus)
    clusters = build_synthetic_corpus(
        records,
        pool=cfg.retrieval_pool,
        target=cfg.synth_target_words,
        threshold=cfg.redundancy_threshold,
        workers=cfg.workers,
    )
    path = cfg.out / "synth_corpus.jsonl"
    n = write_corpus(path, (c.to_record() for c in clusters))
    sizes: dict[str, int] = {}
    for c in clusters:
        sizes[str(c.size)] = sizes.get(str(c.size), 0) + 1
    sizes = dict(sorted(sizes.items(), key=lambda kv: int(kv[0])))
    return finish_stage(cfg, "synth", len(records), n, path, cluster_sizes=sizes)


def run_genprep(cfg: PipelineConfig) -> dict:
    records = load_records(cfg)
    bins_path = cfg.out / "length_bins.json"
    if cfg.genprep_mode == "infer" and bins_path.exists():
        bins = load_length_bins(bins_path)
    else:
        lengths = [_tokens(ref).word_count for r in records for ref in r.all_references]
        bins = build_length_bins(lengths, cfg.n_length_bins)
        save_length_bins(bins, bins_path)

    scorer = _load_scorer(cfg) if cfg.genprep_mode == "infer" else None
    rows = []
    for r in records:
        if not any(s.strip() for s in r.sentences):
            logger.warning(f"Record {r.cluster_id} has no sentences; no generator input")
            continue
        if cfg.genprep_mode == "train":
            summary = _tokens(r.summary)
            evidence = oracle_order(r.sentences, summary)
            first_seen = {s: i for i, s in reversed(list(enumerate(r.sentences)))}
            positions = [first_seen[s] for s in evidence]
            mask_policy = MaskPolicy(gamma=cfg.gamma, seed=record_seed(cfg.seed, r.cluster_id))
            query = proxy_query(r, mask_policy, cfg.ablation)
            length = summary.word_count
        else:
            query = query_umr(r, cfg)
            ranked = scorer.rank(r, query)
            evidence = [x.sentence for x in ranked]
            positions = [x.index for x in ranked]
            length = cfg.summary_length
        item = prepare_generator_input(
            r.cluster_id, evidence, query or None, length, bins, cfg.max_input_tokens,
            evidence_order=cfg.evidence_order, positions=positions,
        )
        rows.append(item.to_dict())
    path = cfg.out / "generator_inputs.jsonl"
    n = write_jsonl(path, rows)
    return finish_stage(
        cfg, "genprep", len(records), n, path,
        mode=cfg.genprep_mode, bins=str(bins_path), evidence_order=cfg.evidence_order,
    )


STAGES = {
    "mask": run_mask,
    "pairs": run_pairs,
    "train": run_train,
    "rank": run_rank,
    "expand": run_expand,
    "extract": run_extract,
    "eval": run_eval,
    "synth": run_synth,
    "genprep": run_genprep,
}
