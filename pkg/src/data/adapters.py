"""
Format adapters for public summarization corpora. Conversion only; the data
itself is not downloaded or redistributed.

    multinews_to_records(src_lines, tgt_lines, prefix='mn')   -> list[CorpusRecord]
    cnndm_story_to_record(story_id, story_text)               -> CorpusRecord
    convert(fmt, inputs, output)                              -> int   records written

Usage:
    PYTHONPATH=src python src/data/adapters.py multinews --src train.src --tgt train.tgt --out data/multinews.jsonl
    PYTHONPATH=src python src/data/adapters.py cnndm --stories cnn/stories --out data/cnndm.jsonl

Multi-News: one cluster per line; source documents separated by "|||||" and
line breaks encoded as "NEWLINE_CHAR"; summaries start with an en dash.
CNN/DailyMail: one .story file per article; highlights follow "@highlight"
markers and become the summary sentences.
"""
import argparse
import logging
from pathlib import Path
from typing import Iterable

from data.corpus import CorpusRecord, Document, write_corpus
from text import split_sentences

logger = logging.getLogger(__name__)

MULTINEWS_DOC_SEP = "|||||"
MULTINEWS_NEWLINE = "NEWLINE_CHAR"


def _clean_multinews(text: str) -> str:
    return " ".join(text.replace(MULTINEWS_NEWLINE, " ").split())


def multinews_to_records(src_lines: Iterable[str], tgt_lines: Iterable[str], prefix: str = "mn") -> list[CorpusRecord]:
    records = []
    for i, (src, tgt) in enumerate(zip(src_lines, tgt_lines)):
        docs = []
        for j, raw in enumerate(src.split(MULTINEWS_DOC_SEP)):
            sentences = split_sentences(_clean_multinews(raw))
            if sentences:
                docs.append(Document(doc_id=f"{prefix}-{i}-{j}", sentences=sentences))
        summary = split_sentences(_clean_multinews(tgt).lstrip("–- "))
        if not docs or not summary:
            logger.warning(f"Skipping Multi-News line {i}: empty documents or summary")
            continue
        records.append(CorpusRecord(cluster_id=f"{prefix}-{i}", documents=docs, summary=summary))
    return records


def cnndm_story_to_record(story_id: str, story_text: str) -> CorpusRecord:
    body, highlights = [], []
    next_is_highlight = False
    for line in story_text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line == "@highlight":
            next_is_highlight = True
            continue
        if next_is_highlight:
            highlights.append(line if line[-1] in ".?!" else line + ".")
            next_is_highlight = False
        else:
            body.append(line)
    return CorpusRecord(
        cluster_id=story_id,
        documents=[Document(doc_id=story_id, sentences=split_sentences(" ".join(body)))],
        summary=highlights,
    )


def convert(fmt: str, inputs: dict[str, str], output: str) -> int:
    if fmt == "multinews":
        with open(inputs["src"], encoding="utf-8") as s, open(inputs["tgt"], encoding="utf-8") as t:
            records = multinews_to_records(s, t)
    elif fmt == "cnndm":
        records = []
        for path in sorted(Path(inputs["stories"]).glob("*.story")):
            try:
                records.append(cnndm_story_to_record(path.stem, path.read_text(encoding="utf-8")))
            except ValueError as e:
                logger.warning(f"Skipping {path.name}: {e}")
    else:
        raise ValueError(f"Unknown corpus format '{fmt}'")
    n = write_corpus(output, records)
    logger.info(f"Converted {n} {fmt} records -> {output}")
    return n


def main():
    parser = argparse.ArgumentParser(description="Convert summarization corpora to CorpusRecord JSONL")
    parser.add_argument("format", choices=["multinews", "cnndm"])
    parser.add_argument("--src", help="Multi-News source file")
    parser.add_argument("--tgt", help="Multi-News target file")
    parser.add_argument("--stories", help="Directory of CNN/DailyMail .story files")
    parser.add_argument("--out", required=True, help="Output JSONL path")
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")
    convert(args.format, {"src": args.src, "tgt": args.tgt, "stories": args.stories}, args.out)


if __name__ == "__main__":
    main()
