import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from types import NoneType, UnionType
from typing import get_args, get_origin

from dotenv import load_dotenv

load_dotenv()

# --- Logging ---
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()

# --- Proxy queries ---
GAMMA = 0.0                   # reveal ratio: share of slot tokens left unmasked
LAMBDA = 0.15                 # ROUGE-1 weight in the regression target
RANDOM_MASK_RATE = 0.15       # word mask rate for the no_openie ablation
SEED = 42

# --- Candidate sampling ---
SAMPLING_GRANULARITY = "cluster"  # 'cluster' (multi-doc) | 'document' (single-doc)
SAMPLING_HEAD = 20            # first N sentences
SAMPLING_TAIL = 20            # last N sentences
DEV_FRACTION = 0.10           # clusters routed to the dev split by id hash

# --- Regressor ---
FEATURE_DIM = 2 ** 20
LEARNING_RATE = 0.01
BATCH_SIZE = 128
EPOCHS = 3

# --- Hashed retrieval ---
HASH_DIM = 2 ** 24

# --- Query expansion ---
EXPANSION_WORD_BUDGET = 100
LEXRANK_THRESHOLD = 0.1
LEXRANK_DAMPING = 0.85
LEXRANK_EPSILON = 1e-6
LEXRANK_MAX_ITERATIONS = 100

# --- Extracts / evaluation ---
EXTRACT_WORD_BUDGET = 250
REDUNDANCY_THRESHOLD = 0.6    # cosine at or above which a sentence is redundant
RECALL_K = (10, 50)

# --- Synthetic multi-document clusters ---
RETRIEVAL_POOL = 10
SYNTH_TARGET_WORDS = 250

# --- Generator inputs ---
N_LENGTH_BINS = 10
MAX_INPUT_TOKENS = 768
SUMMARY_LENGTH = 250          # requested length at inference

# --- Bundled resources ---
RESOURCE_DIR = Path(__file__).parent.parent / "data"
QUERY_LEXICON_FILE = RESOURCE_DIR / "lexicons" / "query_words.txt"
FUNCTION_WORDS_FILE = RESOURCE_DIR / "lexicons" / "function_words.txt"
VERBS_FILE = RESOURCE_DIR / "lexicons" / "verbs.txt"

ABLATIONS = ("none", "no_verb", "no_mask", "no_query", "no_openie")
EVIDENCE_ORDERS = ("ranked", "document")
COMMANDS = ("mask", "pairs", "train", "rank", "expand", "extract", "eval", "synth", "genprep", "gamma-sweep")


def _type_ok(value, hint) -> bool:
    """isinstance against a field annotation; bools are not numbers, ints are floats."""
    if get_origin(hint) is UnionType:
        return any(_type_ok(value, h) for h in get_args(hint))
    if get_origin(hint) is list:
        (item,) = get_args(hint)
        return isinstance(value, list) and all(_type_ok(v, item) for v in value)
    if hint is NoneType:
        return value is None
    if isinstance(value, bool):
        return hint is bool
    if hint is float:
        return isinstance(value, (int, float))
    return isinstance(value, hint)


@dataclass
class PipelineConfig:
    # paths
    corpus: str = "data/tiny_corpus.jsonl"
    output_dir: str = "output"
    pairs: str | None = None            # defaults to <output_dir>/pairs.jsonl
    params: str | None = None           # defaults to <output_dir>/params.bin
    propositions: str | None = None     # externally produced slot spans (JSONL)
    synth_corpus: str | None = None     # single-document corpus for `synth`
    external_scores: str | None = None  # {id, score} JSONL from a neural scorer
    generated: str | None = None        # {id, summary} JSONL from the generator

    # masking / targets
    gamma: float = GAMMA
    lambda_: float = LAMBDA
    seed: int = SEED
    ablation: str = "none"
    stem: bool = False

    # sampling
    granularity: str = SAMPLING_GRANULARITY
    head: int = SAMPLING_HEAD
    tail: int = SAMPLING_TAIL
    dev_fraction: float = DEV_FRACTION

    # training
    learning_rate: float = LEARNING_RATE
    batch_size: int = BATCH_SIZE
    epochs: int = EPOCHS

    # expansion
    expand_queries: bool = False        # LexRank narrative expansion for short (keyword) queries
    expansion_word_budget: int = EXPANSION_WORD_BUDGET
    lexrank_threshold: float = LEXRANK_THRESHOLD
    lexrank_damping: float = LEXRANK_DAMPING
    lexrank_epsilon: float = LEXRANK_EPSILON
    lexrank_max_iterations: int = LEXRANK_MAX_ITERATIONS

    # extracts / eval
    word_budget: int = EXTRACT_WORD_BUDGET
    redundancy_threshold: float = REDUNDANCY_THRESHOLD
    baselines: list[str] = field(default_factory=lambda: ["termfreq", "lead", "lexrank"])

    # synthetic clusters
    retrieval_pool: int = RETRIEVAL_POOL
    synth_target_words: int = SYNTH_TARGET_WORDS

    # generator inputs
    n_length_bins: int = N_LENGTH_BINS
    max_input_tokens: int = MAX_INPUT_TOKENS
    summary_length: int = SUMMARY_LENGTH
    genprep_mode: str = "infer"         # 'train' (oracle order + masked summary) | 'infer' (ranked + masked query)
    evidence_order: str = "ranked"      # 'ranked' | 'document' (selected evidence back in source order)

    # gamma sweep
    sweep_gammas: list[float] = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])

    workers: int = 1

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        """Raise ValueError if any field has the wrong type or is outside its documented range."""
        mistyped = [f.name for f in fields(self) if not _type_ok(getattr(self, f.name), f.type)]
        if mistyped:
            raise ValueError(f"Config values of the wrong type: {', '.join(mistyped)}")
        checks = {
            "gamma": 0.0 <= self.gamma <= 1.0,
            "lambda": self.lambda_ >= 0.0,
            "ablation": self.ablation in ABLATIONS,
            "granularity": self.granularity in ("cluster", "document"),
            "head/tail": self.head >= 0 and self.tail >= 0 and self.head + self.tail >= 1,
            "dev_fraction": 0.0 <= self.dev_fraction < 1.0,
            "learning_rate": self.learning_rate > 0,
            "batch_size": self.batch_size >= 1,
            "epochs": self.epochs >= 1,
            "expansion_word_budget": self.expansion_word_budget >= 1,
            "lexrank_threshold": 0.0 <= self.lexrank_threshold < 1.0,
            "lexrank_damping": 0.0 < self.lexrank_damping < 1.0,
            "lexrank_epsilon": self.lexrank_epsilon > 0.0,
            "lexrank_max_iterations": self.lexrank_max_iterations >= 1,
            "word_budget": self.word_budget >= 1,
            "redundancy_threshold": 0.0 < self.redundancy_threshold <= 1.0,
            "retrieval_pool": self.retrieval_pool >= 1,
            "synth_target_words": self.synth_target_words >= 1,
            "n_length_bins": self.n_length_bins >= 1,
            "max_input_tokens": self.max_input_tokens >= 1,
            "summary_length": self.summary_length >= 1,
            "genprep_mode": self.genprep_mode in ("train", "infer"),
            "evidence_order": self.evidence_order in EVIDENCE_ORDERS,
            "sweep_gammas": all(0.0 <= g <= 1.0 for g in self.sweep_gammas),
            "workers": self.workers >= 1,
        }
        bad = [name for name, ok in checks.items() if not ok]
        if bad:
            raise ValueError(f"Config values out of range: {', '.join(bad)}")

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    @property
    def pairs_path(self) -> Path:
        return Path(self.pairs) if self.pairs else self.out / "pairs.jsonl"

    @property
    def dev_pairs_path(self) -> Path:
        return self.pairs_path.with_name(self.pairs_path.stem + ".dev.jsonl")

    @property
    def params_path(self) -> Path:
        return Path(self.params) if self.params else self.out / "params.bin"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return d


def load_pipeline_config(path: str | Path | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Build a PipelineConfig from a flat JSON file plus CLI overrides.

    Keys missing from the file take the defaults above. "lambda" is accepted
    for the lambda_ field. Unknown keys raise ValueError.
    """
    raw: dict = {}
    if path is not None:
        with Path(path).open("r", encoding="utf-8") as f:
            raw = json.load(f)
        if not isinstance(raw, dict):
            raise ValueError(f"Config {path} must be a JSON object")
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if "lambda" in raw:
        raw["lambda_"] = raw.pop("lambda")

    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"Unknown config keys: {', '.join(unknown)}")
    return PipelineConfig(**raw)
