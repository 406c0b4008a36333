"""
Corpus records and JSONL I/O.

    Document                                  dataclass: doc_id, sentences
    QuerySpec                                 dataclass: title, narrative
    CorpusRecord                              dataclass: cluster_id, documents, summary, query, references

    read_jsonl(path)                          -> Iterator[dict]
    write_jsonl(path, rows)                   -> int     atomic (tmp file + rename), returns row count
    write_json(path, obj)                     -> None    atomic
    read_corpus(path)                         -> list[CorpusRecord]
    write_corpus(path, records)               -> int
    stable_hash(*parts)                       -> int     64-bit, platform independent
    split_records(records, dev_fraction=0.1)  -> (train, dev)

Input line schema:
    {"cluster_id": str,
     "documents": [{"doc_id": str, "sentences": [str, ...]} | {"doc_id": str, "text": str}, ...],
     "summary": [str, ...] | str,
     "query": {"title": str | null, "narrative": str} | null,        optional
     "references": [[str, ...] | str, ...]}                           optional, extra gold summaries
"""
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from types import NoneType
from typing import Iterable, Iterator

from config import DEV_FRACTION
from text import split_sentences

logger = logging.getLogger(__name__)


@dataclass
class Document:
    doc_id: str
    sentences: list[str]


@dataclass
class QuerySpec:
    narrative: str
    title: str | None = None


@dataclass
class CorpusRecord:
    cluster_id: str
    documents: list[Document]
    summary: list[str]
    query: QuerySpec | None = None
    references: list[list[str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.documents:
            raise ValueError(f"Record {self.cluster_id} has no documents")
        if not any(s.strip() for s in self.summary):
            raise ValueError(f"Record {self.cluster_id} has an empty summary")

    @property
    def all_references(self) -> list[list[str]]:
        """The primary summary followed by any extra references."""
        return [self.summary] + self.references

    @property
    def sentences(self) -> list[str]:
        """All document sentences, documents in input order."""
        return [s for doc in self.documents for s in doc.sentences]

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusRecord":
        """Parse one input line. Wrongly typed fields raise ValueError; a missing key raises KeyError."""
        if not isinstance(d, dict):
            raise ValueError(f"Corpus record must be a JSON object, got {type(d).__name__}")
        cid = d["cluster_id"]
        raw_docs = d.get("documents") or []
        if not isinstance(raw_docs, list):
            raise ValueError(f"Record {cid}: 'documents' must be a list")
        docs = []
        for i, raw in enumerate(raw_docs):
            if not isinstance(raw, dict):
                raise ValueError(f"Record {cid}: document {i} must be a JSON object")
            sentences = raw.get("sentences")
            if sentences is None:
                text = raw.get("text", "")
                if not isinstance(text, str):
                    raise ValueError(f"Record {cid}: document {i} 'text' must be a string")
                sentences = split_sentences(text)
            elif not _is_str_list(sentences):
                raise ValueError(f"Record {cid}: document {i} 'sentences' must be a list of strings")
            docs.append(Document(doc_id=str(raw.get("doc_id", i)), sentences=list(sentences)))

        query = d.get("query")
        if query is not None and not (
            isinstance(query, dict)
            and isinstance(query.get("narrative"), str)
            and isinstance(query.get("title"), (str, NoneType))
        ):
            raise ValueError(f"Record {cid}: 'query' must be {{title: str | null, narrative: str}}")
        references = d.get("references") or []
        if not isinstance(references, list):
            raise ValueError(f"Record {cid}: 'references' must be a list")
        return cls(
            cluster_id=str(cid),
            documents=docs,
            summary=_as_sentences(d["summary"], f"Record {cid}: 'summary'"),
            query=QuerySpec(narrative=query["narrative"], title=query.get("title")) if query else None,
            references=[_as_sentences(r, f"Record {cid}: reference {j}") for j, r in enumerate(references)],
        )

    def to_dict(self) -> dict:
        d = {
            "cluster_id": self.cluster_id,
            "documents": [{"doc_id": doc.doc_id, "sentences": doc.sentences} for doc in self.documents],
            "summary": self.summary,
        }
        if self.query is not None:
            d["query"] = {"title": self.query.title, "narrative": self.query.narrative}
        if self.references:
            d["references"] = self.references
        return d


def _is_str_list(value) -> bool:
    return isinstance(value, list) and all(isinstance(s, str) for s in value)


def _as_sentences(value: str | list[str], where: str = "value") -> list[str]:
    if isinstance(value, str):
        return split_sentences(value)
    if not _is_str_list(value):
        raise ValueError(f"{where} must be a string or a list of strings")
    return list(value)


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                yield json.loads(line)


def _atomic_write(path: Path, payload: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_suffix(path.suffix + ".tmp")
    with tmp_path.open("w", encoding="utf-8") as f:
        f.write(payload)
    os.replace(tmp_path, path)


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> int:
    lines = [json.dumps(row, ensure_ascii=False) + "\n" for row in rows]
    _atomic_write(Path(path), "".join(lines))
    return len(lines)


def write_json(path: str | Path, obj) -> None:
    _atomic_write(Path(path), json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


def read_corpus(path: str | Path) -> list[CorpusRecord]:
    records = [CorpusRecord.from_dict(d) for d in read_jsonl(path)]
    logger.debug(f"Read {len(records)} records from {path}")
    return records


def write_corpus(path: str | Path, records: Iterable[CorpusRecord]) -> int:
    return write_jsonl(path, (r.to_dict() for r in records))


def stable_hash(*parts) -> int:
    payload = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def split_records(
    records: list[CorpusRecord],
    dev_fraction: float = DEV_FRACTION,
) -> tuple[list[CorpusRecord], list[CorpusRecord]]:
    """Route whole clusters to train/dev by cluster_id hash.

    With two or more clusters the dev split is never empty: if no cluster hashes
    into the dev bucket, the cluster with the highest bucket value is moved there.
    """
    buckets = {r.cluster_id: stable_hash("split", r.cluster_id) % 1000 for r in records}
    cutoff = int(round(dev_fraction * 1000))
    dev_ids = {cid for cid, b in buckets.items() if b < cutoff}
    if not dev_ids and len(records) >= 2 and dev_fraction > 0:
        dev_ids = {max(buckets, key=lambda cid: (buckets[cid], cid))}
    if len(dev_ids) == len(records) and len(records) >= 2:
        dev_ids.discard(min(dev_ids, key=lambda cid: (buckets[cid], cid)))
    train = [r for r in records if r.cluster_id not in dev_ids]
    dev = [r for r in records if r.cluster_id in dev_ids]
    return train, dev
