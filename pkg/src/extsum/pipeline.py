"""Experiment orchestration: extractive, abstractive, extract-then-generate and G-EVAL runs."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import __version__
from .alignment import DEFAULT_THRESHOLD, AlignmentResult, ParsedOutput, Unparseable, align_to_document, parse_output, validate_scores
from .corpus import SAMPLER_VERSION, CorpusEntry, corpus_digest
from .llmclient import ChatClient, ChatResponse, ClientError, cache_key
from .oracle import ExtractiveSummary, greedy_oracle
from .prompting import (
    CRITERIA,
    PROMPT_VERSION,
    FewShotExample,
    PromptBundle,
    PromptError,
    build_abstractive,
    build_evaluator,
    build_explanation,
    build_extract_abstract,
    build_extractive,
    build_in_context,
)
from .rouge import RougeTriple, score_pair
from .textcore import Document, TokenConfig

log = logging.getLogger(__name__)

ORACLE_MODEL = "oracle"
EXTRACTORS = ("model", "oracle")

# RunRecord fields that differ between otherwise identical runs.
VOLATILE_FIELDS = ("timing_ms", "cached")


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class EvalScore:
    coherence: int
    consistency: int
    fluency: int
    efficiency: int

    @property
    def overall(self) -> float:
        return (self.coherence + self.consistency + self.fluency + self.efficiency) / 4

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in CRITERIA} | {"overall": self.overall}

    @classmethod
    def from_dict(cls, d: dict) -> EvalScore:
        return cls(**{name: d[name] for name in CRITERIA})


@dataclass(frozen=True)
class RunRecord:
    doc_id: str
    schema: str
    prompt_digest: str | None = None
    raw_response: str | None = None
    parsed: ParsedOutput | None = None
    alignment: AlignmentResult | None = None
    summary_text: str = ""
    rouge: RougeTriple | None = None
    geval: EvalScore | None = None
    parse_mode: str | None = None
    sentence_count: int = 0
    doc_words: int = 0
    extractor: str | None = None
    stage1_digest: str | None = None
    stage1_indices: tuple[int, ...] | None = None
    error: str | None = None
    flags: tuple[str, ...] = ()
    timing_ms: float = field(default=0.0, compare=False)
    cached: bool = field(default=False, compare=False)

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def indices(self) -> list[int]:
        return self.alignment.indices if self.alignment is not None else []

    def to_dict(self, volatile: bool = False) -> dict:
        d = {
            "doc_id": self.doc_id,
            "schema": self.schema,
            "prompt_digest": self.prompt_digest,
            "raw_response": self.raw_response,
            "parsed": self.parsed.to_dict() if self.parsed else None,
            "alignment": self.alignment.to_dict() if self.alignment else None,
            "summary_text": self.summary_text,
            "rouge": self.rouge.to_dict() if self.rouge else None,
            "geval": self.geval.to_dict() if self.geval else None,
            "parse_mode": self.parse_mode,
            "sentence_count": self.sentence_count,
            "doc_words": self.doc_words,
            "extractor": self.extractor,
            "stage1_digest": self.stage1_digest,
            "stage1_indices": list(self.stage1_indices) if self.stage1_indices is not None else None,
            "error": self.error,
            "flags": list(self.flags),
        }
        if volatile:
            d["timing_ms"] = self.timing_ms
            d["cached"] = self.cached
        return d

    @classmethod
    def from_dict(cls, d: dict) -> RunRecord:
        return cls(
            doc_id=d["doc_id"],
            schema=d["schema"],
            prompt_digest=d.get("prompt_digest"),
            raw_response=d.get("raw_response"),
            parsed=ParsedOutput.from_dict(d["parsed"]) if d.get("parsed") else None,
            alignment=AlignmentResult.from_dict(d["alignment"]) if d.get("alignment") else None,
            summary_text=d.get("summary_text", ""),
            rouge=RougeTriple.from_dict(d["rouge"]) if d.get("rouge") else None,
            geval=EvalScore.from_dict(d["geval"]) if d.get("geval") else None,
            parse_mode=d.get("parse_mode"),
            sentence_count=d.get("sentence_count", 0),
            doc_words=d.get("doc_words", 0),
            extractor=d.get("extractor"),
            stage1_digest=d.get("stage1_digest"),
            stage1_indices=tuple(d["stage1_indices"]) if d.get("stage1_indices") is not None else None,
            error=d.get("error"),
            flags=tuple(d.get("flags", ())),
            timing_ms=d.get("timing_ms", 0.0),
            cached=d.get("cached", False),
        )


def word_count(text: str) -> int:
    return len(text.split())


@dataclass
class _Settings:
    token_config: TokenConfig
    threshold: float
    corrected: bool


def _map_docs(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _sorted(records: Iterable[RunRecord]) -> list[RunRecord]:
    return sorted(records, key=lambda r: r.doc_id)


def _base(entry: CorpusEntry, doc: Document, schema: str) -> RunRecord:
    return RunRecord(
        doc_id=entry.id,
        schema=schema,
        sentence_count=len(doc.sentences),
        doc_words=word_count(entry.document),
    )


def _complete(client: ChatClient, bundle: PromptBundle, record: RunRecord) -> tuple[RunRecord, ChatResponse | None]:
    request = client.request(bundle.system, bundle.user)
    record = replace(record, prompt_digest=cache_key(request))
    start = time.perf_counter()
    try:
        response = client.complete(request)
    except ClientError as exc:
        elapsed = (time.perf_counter() - start) * 1000
        return replace(record, error=f"{type(exc).__name__}: {exc}", timing_ms=elapsed), None
    elapsed = (time.perf_counter() - start) * 1000
    return replace(record, raw_response=response.content, timing_ms=elapsed, cached=response.cached), response


def _finish_extractive(record: RunRecord, entry: CorpusEntry, doc: Document, settings: _Settings) -> RunRecord:
    parsed = parse_output(record.raw_response or "", record.schema)
    flags = list(record.flags)
    if parsed.parse_mode != "strict_json":
        flags.append("salvaged_output")
    claimed = list(parsed.summary_sentences or ())
    alignment = align_to_document(claimed, doc, settings.threshold)
    if alignment.unmatched:
        flags.append("unmatched_claims")
    # the canonical summary is verbatim source text in document order
    summary = " ".join(doc.sentences[i].text for i in sorted(alignment.indices))
    error = None
    if not claimed:
        error = "empty_summary"
    elif not alignment.matched:
        error = "no_aligned_sentences"
    return replace(
        record,
        parsed=parsed,
        parse_mode=parsed.parse_mode,
        alignment=alignment,
        summary_text=summary,
        rouge=score_pair(summary, entry.summary, settings.token_config),
        error=error,
        flags=tuple(flags),
    )


def _finish_abstractive(record: RunRecord, entry: CorpusEntry, doc: Document, settings: _Settings, align: bool) -> RunRecord:
    parsed = parse_output(record.raw_response or "", record.schema)
    flags = list(record.flags)
    if parsed.parse_mode != "strict_json":
        flags.append("salvaged_output")
    summary = parsed.summary_text or ""
    alignment = None
    if align and summary:
        claims = [s.text for s in Document.from_text(entry.id, summary).sentences]
        alignment = align_to_document(claims, doc, settings.threshold)
    return replace(
        record,
        parsed=parsed,
        parse_mode=parsed.parse_mode,
        alignment=alignment,
        summary_text=summary,
        rouge=score_pair(summary, entry.summary, settings.token_config),
        error=None if summary else "empty_summary",
        flags=tuple(flags),
    )


def _extractive_bundle(doc: Document, m: int, fewshot: Sequence[FewShotExample], with_reason: bool) -> PromptBundle:
    if with_reason:
        return build_explanation(doc, m, fewshot)
    return build_in_context(doc, m, fewshot)


def check_fewshot(fewshot: Sequence[FewShotExample] | None, with_reason: bool) -> list[FewShotExample]:
    shots = list(fewshot or ())
    if with_reason:
        if not shots:
            raise PipelineError("with_reason requires few-shot examples")
        missing = [i for i, ex in enumerate(shots) if not ex.reason]
        if missing:
            raise PipelineError(f"with_reason requires a reason on every example; missing at {missing}")
        return shots
    return [replace(ex, reason=None) for ex in shots]


def run_extractive(
    corpus: Sequence[CorpusEntry],
    m: int,
    client: ChatClient,
    fewshot: Sequence[FewShotExample] | None = None,
    with_reason: bool = False,
    *,
    token_config: TokenConfig | None = None,
    threshold: float = DEFAULT_THRESHOLD,
) -> list[RunRecord]:
    """Extractive runs, zero-shot or few-shot with optional reasons."""
    if m < 1:
        raise PipelineError(f"m must be >= 1, got {m}")
    shots = check_fewshot(fewshot, with_reason)
    settings = _Settings(token_config or TokenConfig(), threshold, False)

    def one(entry: CorpusEntry) -> RunRecord:
        doc = entry.to_document()
        bundle = _extractive_bundle(doc, m, shots, with_reason)
        record = _base(entry, doc, bundle.schema)
        record, response = _complete(client, bundle, record)
        if response is None:
            return replace(record, rouge=RougeTriple.zero())
        return _finish_extractive(record, entry, doc, settings)

    return _sorted(_map_docs(one, list(corpus), client.max_in_flight))


def run_abstractive(
    corpus: Sequence[CorpusEntry],
    client: ChatClient,
    *,
    align: bool = False,
    corrected: bool = False,
    token_config: TokenConfig | None = None,
    threshold: float = DEFAULT_THRESHOLD,
) -> list[RunRecord]:
    settings = _Settings(token_config or TokenConfig(), threshold, corrected)

    def one(entry: CorpusEntry) -> RunRecord:
        doc = entry.to_document()
        bundle = build_abstractive(doc, corrected=corrected)
        record = _base(entry, doc, "abstractive")
        record, response = _complete(client, bundle, record)
        if response is None:
            return replace(record, rouge=RougeTriple.zero())
        return _finish_abstractive(record, entry, doc, settings, align)

    return _sorted(_map_docs(one, list(corpus), client.max_in_flight))


def oracle_stage_request(client: ChatClient, doc: Document, m: int):
    """Stage-1 request used to file an ORACLE extraction in the response cache."""
    bundle = build_extractive(doc, m)
    return replace(client.request(bundle.system, bundle.user), model=ORACLE_MODEL)


def run_extract_then_generate(
    corpus: Sequence[CorpusEntry],
    client: ChatClient,
    extractor: str = "oracle",
    m: int | None = None,
    *,
    stage1: Sequence[RunRecord] | None = None,
    fewshot: Sequence[FewShotExample] | None = None,
    with_reason: bool = False,
    token_config: TokenConfig | None = None,
    threshold: float = DEFAULT_THRESHOLD,
) -> list[RunRecord]:
    """Two-stage runs: an extractive summary per document, then a guided revision.

    ``extractor="oracle"`` gives the Oracle-Abs configuration and
    ``extractor="model"`` the Ext-Abs one (reusing ``stage1`` records when given).
    """
    if extractor not in EXTRACTORS:
        raise PipelineError(f"extractor must be one of {EXTRACTORS}, got {extractor!r}")
    if m is None or m < 1:
        raise PipelineError("the extraction budget m is required")
    token_config = token_config or TokenConfig()
    settings = _Settings(token_config, threshold, False)

    stage1_by_id: dict[str, RunRecord] = {}
    if extractor == "model":
        if stage1 is None:
            stage1 = run_extractive(corpus, m, client, fewshot, with_reason, token_config=token_config, threshold=threshold)
        stage1_by_id = {r.doc_id: r for r in stage1}

    def stage_one(entry: CorpusEntry, doc: Document) -> tuple[ExtractiveSummary | None, str | None]:
        if extractor == "oracle":
            ext = greedy_oracle(doc, entry.summary, m, token_config)
            request = oracle_stage_request(client, doc, m)
            if client.cache is not None:
                content = json.dumps({"summary": ext.doc_order_texts()}, ensure_ascii=False)
                client.cache.store(request, ChatResponse(content, finish_reason="oracle"))
            return ext, cache_key(request)
        rec = stage1_by_id.get(entry.id)
        if rec is None:
            return None, None
        idx = tuple(rec.indices)
        ext = ExtractiveSummary(
            doc_id=entry.id,
            indices=idx,
            texts=tuple(doc.sentences[i].text for i in idx),
            score=rec.rouge or RougeTriple.zero(),
            sentence_count=len(doc.sentences),
        )
        return ext, rec.prompt_digest

    def one(entry: CorpusEntry) -> RunRecord:
        doc = entry.to_document()
        record = replace(_base(entry, doc, "extract_abstract"), extractor=extractor)
        ext, digest = stage_one(entry, doc)
        record = replace(record, stage1_digest=digest, stage1_indices=ext.indices if ext else None)
        if ext is None or not ext.indices:
            return replace(record, rouge=RougeTriple.zero(), error="empty_extractive_stage")
        try:
            bundle = build_extract_abstract(doc, ext)
        except PromptError as exc:
            return replace(record, rouge=RougeTriple.zero(), error=f"PromptError: {exc}")
        record, response = _complete(client, bundle, record)
        if response is None:
            return replace(record, rouge=RougeTriple.zero())
        return _finish_abstractive(record, entry, doc, settings, align=False)

    return _sorted(_map_docs(one, list(corpus), client.max_in_flight))


def run_geval(
    records: Sequence[RunRecord],
    corpus: Sequence[CorpusEntry],
    client: ChatClient,
    *,
    corrected: bool = False,
) -> list[RunRecord]:
    """Attach LLM-judge scores; judge failures are flagged, never clamped."""
    gold = {e.id: e.summary for e in corpus}

    def one(record: RunRecord) -> RunRecord:
        reference = gold.get(record.doc_id)
        if reference is None or not record.summary_text.strip():
            return replace(record, geval=None, flags=record.flags + ("geval_skipped",))
        bundle = build_evaluator(reference, record.summary_text, corrected=corrected)
        try:
            response = client.complete(client.request(bundle.system, bundle.user))
        except ClientError as exc:
            log.warning("judge call failed for %s: %s", record.doc_id, exc)
            return replace(record, geval=None, flags=record.flags + ("geval_failed",))
        try:
            parsed = parse_output(response.content, "evaluator")
        except Unparseable:
            return replace(record, geval=None, flags=record.flags + ("geval_unparseable",))
        try:
            scores = validate_scores(parsed.scores or {})
        except ValueError:
            return replace(record, geval=None, flags=record.flags + ("geval_out_of_range",))
        return replace(record, geval=EvalScore(**scores))

    return _sorted(_map_docs(one, list(records), client.max_in_flight))


def records_jsonl(records: Iterable[RunRecord]) -> str:
    return "".join(json.dumps(r.to_dict(), ensure_ascii=False, sort_keys=True) + "\n" for r in records)


def records_digest(records: Iterable[RunRecord]) -> str:
    return hashlib.sha256(records_jsonl(records).encode("utf-8")).hexdigest()


def load_records(path: str | Path) -> list[RunRecord]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(RunRecord.from_dict(json.loads(line)))
    return out


def build_manifest(records: Sequence[RunRecord], corpus: Sequence[CorpusEntry], config: dict) -> dict:
    failed = sum(r.failed for r in records)
    return {
        "config": config,
        "corpus_digest": corpus_digest(corpus),
        "prompt_goldens_version": PROMPT_VERSION,
        "sampler_version": SAMPLER_VERSION,
        "package_version": __version__,
        "n_records": len(records),
        "failure_rate": failed / len(records) if records else 0.0,
        "record_file_digest": records_digest(records),
    }


def write_run(
    out_dir: str | Path,
    records: Sequence[RunRecord],
    corpus: Sequence[CorpusEntry],
    config: dict,
    name: str = "records",
    stats: bool = False,
) -> dict:
    """Write ``{name}.jsonl`` and ``{name}.manifest.json``.

    With ``stats`` the volatile per-document timing and cache flags go to
    ``{name}.stats.jsonl``; the other two files are byte-stable across reruns.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = _sorted(records)
    (out / f"{name}.jsonl").write_text(records_jsonl(records), encoding="utf-8")
    manifest = build_manifest(records, corpus, config)
    (out / f"{name}.manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if stats:
        lines = (json.dumps({"doc_id": r.doc_id, "timing_ms": round(r.timing_ms, 3), "cached": r.cached}) for r in records)
        (out / f"{name}.stats.jsonl").write_text("".join(ln + "\n" for ln in lines), encoding="utf-8")
    return manifest
