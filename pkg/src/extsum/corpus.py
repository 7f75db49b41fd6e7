"""Corpus ingestion, dataset defaults and reproducible sampling."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import regex

from .textcore import Document

SAMPLER_VERSION = "splitmix64-selection-v1"
DEFAULT_SEED = 101
DEV_SIZE = 50

_MASK64 = (1 << 64) - 1
_ALNUM = regex.compile(r"[\p{L}\p{Nd}]+")


class CorpusError(Exception):
    pass


class CorpusIOError(CorpusError, OSError):
    pass


class SchemaError(CorpusError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class DuplicateIdError(SchemaError):
    pass


class SampleSizeError(CorpusError, ValueError):
    pass


@dataclass(frozen=True)
class DatasetConfig:
    name: str
    num_extract: int
    notes: str = ""


DATASETS: dict[str, DatasetConfig] = {
    "cnn_dm": DatasetConfig("cnn_dm", 3, "non-anonymized; splits 287,084/13,367/11,489"),
    "xsum": DatasetConfig("xsum", 2, "one-sentence summaries; splits 204,045/11,332/11,334"),
    "reddit": DatasetConfig("reddit", 2, "splits 41,675/645/645"),
    "pubmed": DatasetConfig("pubmed", 6, "introduction as article, abstract as summary; splits 83,233/4,946/5,025"),
}

_ALIASES = {"cnndm": "cnn_dm", "cnn/dm": "cnn_dm", "cnn-dm": "cnn_dm"}


def dataset_config(name: str) -> DatasetConfig:
    key = name.lower()
    key = _ALIASES.get(key, key)
    try:
        return DATASETS[key]
    except KeyError:
        raise KeyError(f"unknown dataset {name!r}; known: {', '.join(DATASETS)}") from None


@dataclass(frozen=True)
class CorpusEntry:
    id: str
    document: str
    summary: str
    sentences: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.document.strip():
            raise SchemaError(f"entry {self.id!r}: empty document")
        if not self.summary.strip():
            raise SchemaError(f"entry {self.id!r}: empty summary")
        if self.sentences is not None:
            joined = "".join(_ALNUM.findall(" ".join(self.sentences))).casefold()
            if joined != "".join(_ALNUM.findall(self.document)).casefold():
                raise SchemaError(f"entry {self.id!r}: sentences do not match document content")

    def to_document(self) -> Document:
        if self.sentences is not None:
            return Document.from_sentences(self.id, self.document, list(self.sentences))
        return Document.from_text(self.id, self.document)

    def to_dict(self) -> dict:
        d = {"id": self.id, "document": self.document, "summary": self.summary}
        if self.sentences is not None:
            d["sentences"] = list(self.sentences)
        return d


Corpus = list[CorpusEntry]


def _entry_from_obj(obj, lineno: int) -> CorpusEntry:
    if not isinstance(obj, dict):
        raise SchemaError("expected a JSON object", lineno)
    for key in ("id", "document", "summary"):
        if key not in obj:
            raise SchemaError(f"missing field {key!r}", lineno)
        if not isinstance(obj[key], (str, int)) or (key != "id" and not isinstance(obj[key], str)):
            raise SchemaError(f"field {key!r} must be a string", lineno)
    sentences = obj.get("sentences")
    if sentences is not None:
        if not isinstance(sentences, list) or not all(isinstance(s, str) for s in sentences):
            raise SchemaError("field 'sentences' must be a list of strings", lineno)
        sentences = tuple(sentences)
    try:
        return CorpusEntry(str(obj["id"]), obj["document"], obj["summary"], sentences)
    except SchemaError as exc:
        raise SchemaError(str(exc), lineno) from None


def parse_jsonl(lines: Iterable[str]) -> Corpus:
    corpus: Corpus = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON ({exc.msg})", lineno) from None
        entry = _entry_from_obj(obj, lineno)
        if entry.id in seen:
            raise DuplicateIdError(f"duplicate id {entry.id!r}", lineno)
        seen.add(entry.id)
        corpus.append(entry)
    return corpus


def load_jsonl(path: str | Path) -> Corpus:
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as fh:
            return parse_jsonl(fh)
    except OSError as exc:
        raise CorpusIOError(f"cannot read corpus {path}: {exc.strerror or exc}") from exc


def dumps_jsonl(corpus: Iterable[CorpusEntry]) -> str:
    return "".join(json.dumps(e.to_dict(), ensure_ascii=False) + "\n" for e in corpus)


def dump_jsonl(corpus: Iterable[CorpusEntry], path: str | Path) -> None:
    Path(path).write_text(dumps_jsonl(corpus), encoding="utf-8")


def corpus_digest(corpus: Iterable[CorpusEntry]) -> str:
    return hashlib.sha256(dumps_jsonl(corpus).encode("utf-8")).hexdigest()


class SplitMix64:
    """64-bit SplitMix generator; the bit stream is fixed by the algorithm."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def randbelow(self, k: int) -> int:
        if k <= 0:
            raise ValueError("k must be positive")
        limit = (1 << 64) - ((1 << 64) % k)  # rejection removes modulo bias
        while True:
            x = self.next_u64()
            if x < limit:
                return x % k


def sample_indices(size: int, n: int, seed: int) -> list[int]:
    """Selection sampling (Knuth's Algorithm S): n of size indices, ascending."""
    if n < 0 or n > size:
        raise SampleSizeError(f"cannot sample {n} from {size} entries")
    rng = SplitMix64(seed)
    chosen = []
    for t in range(size):
        if len(chosen) == n:
            break
        if rng.randbelow(size - t) < n - len(chosen):
            chosen.append(t)
    return chosen


def sample(corpus: Sequence[CorpusEntry], n: int, seed: int = DEFAULT_SEED) -> Corpus:
    return [corpus[i] for i in sample_indices(len(corpus), n, seed)]


def dev_split(corpus: Sequence[CorpusEntry], seed: int = DEFAULT_SEED, size: int = DEV_SIZE) -> tuple[Corpus, Corpus]:
    if len(corpus) <= size:
        raise SampleSizeError(f"corpus of {len(corpus)} entries is too small for a dev split of {size}")
    picked = set(sample_indices(len(corpus), size, seed))
    dev = [e for i, e in enumerate(corpus) if i in picked]
    rest = [e for i, e in enumerate(corpus) if i not in picked]
    return dev, rest
