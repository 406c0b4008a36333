import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).parent.parent

# Allow imports from src/ without PYTHONPATH
sys.path.insert(0, str(REPO_ROOT / "src"))

TINY_CORPUS = REPO_ROOT / "data" / "tiny_corpus.jsonl"
TINY_CONFIG = REPO_ROOT / "data" / "tiny_config.json"


@pytest.fixture
def tiny_config(tmp_path):
    """PipelineConfig for the bundled tiny corpus, writing under tmp_path."""
    from config import load_pipeline_config
    return load_pipeline_config(TINY_CONFIG, {"corpus": str(TINY_CORPUS), "output_dir": str(tmp_path / "out")})


@pytest.fixture
def tiny_records():
    from data.corpus import read_corpus
    return read_corpus(TINY_CORPUS)
