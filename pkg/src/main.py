"""
Command-line entry point for the query-modeling pipeline.

Usage:
    PYTHONPATH=src python src/main.py pairs --config data/tiny_config.json
    PYTHONPATH=src python src/main.py train --config data/tiny_config.json --seed 7
    PYTHONPATH=src python src/main.py gamma-sweep --config data/tiny_config.json

Commands: mask, pairs, train, rank, expand, extract, eval, synth, genprep, gamma-sweep.
Flags override values from the JSON config file. Exit status:
    0 ok, 1 usage, 2 I/O error, 3 invalid data or config, 4 numeric failure.
"""
import argparse
import json
import logging
import sys
from typing import Sequence

from config import ABLATIONS, COMMANDS, EVIDENCE_ORDERS, LOG_LEVEL, load_pipeline_config
from pipeline.stages import STAGES
from pipeline.sweep import run_sweep_stage

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; 2 is reserved for I/O errors here."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="query-modeling", description="Query modeling for query-focused summarization")
    parser.add_argument("command", choices=COMMANDS, help="Pipeline stage to run")
    parser.add_argument("--config", help="Flat JSON pipeline config")
    parser.add_argument("--corpus", help="CorpusRecord JSONL input")
    parser.add_argument("--output-dir", dest="output_dir", help="Directory for stage outputs")
    parser.add_argument("--params", help="Regressor params file")
    parser.add_argument("--external-scores", dest="external_scores", help="{id, score} JSONL from an external scorer")
    parser.add_argument("--generated", help="{id, summary} JSONL from an external generator (eval)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--gamma", type=float, help="Reveal ratio in [0, 1]")
    parser.add_argument("--ablation", choices=ABLATIONS)
    parser.add_argument("--workers", type=int, help="Parallel workers within a stage")
    parser.add_argument("--word-budget", dest="word_budget", type=int, help="Extract word budget")
    parser.add_argument("--expansion-budget", dest="expansion_word_budget", type=int, help="Query expansion word budget")
    parser.add_argument("--expand-queries", dest="expand_queries", action="store_true", default=None)
    parser.add_argument("--mode", dest="genprep_mode", choices=("train", "infer"), help="genprep mode")
    parser.add_argument(
        "--evidence-order", dest="evidence_order", choices=EVIDENCE_ORDERS,
        help="genprep evidence order: ranked, or document (selected sentences back in source order)",
    )
    return parser


def run(command: str, overrides: dict, config_path: str | None = None) -> dict:
    cfg = load_pipeline_config(config_path, overrides)
    if command == "gamma-sweep":
        return run_sweep_stage(cfg)
    return STAGES[command](cfg)


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=LOG_LEVEL, format="%(asctime)s %(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}

    try:
        run(args.command, overrides, args.config)
    except OSError as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_IO
    except (ValueError, KeyError, json.JSONDecodeError) as e:
        logger.error(f"{args.command}: invalid data: {e}")
        return EXIT_DATA
    except ArithmeticError as e:
        logger.error(f"{args.command}: numeric failure: {e}")
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
