"""Greedy ORACLE extractive labels built against gold summaries."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .corpus import CorpusEntry, DatasetConfig
from .rouge import RougeScore, RougeTriple, ngrams, score_tokens
from .textcore import Document, TokenConfig, tokenize

log = logging.getLogger(__name__)


class EmptyDocumentError(ValueError):
    pass


@dataclass(frozen=True)
class ExtractiveSummary:
    doc_id: str
    indices: tuple[int, ...]
    texts: tuple[str, ...]
    score: RougeTriple
    sentence_count: int = 0
    # objective value after each selection step
    trace: tuple[float, ...] = field(default=(), compare=False)

    @property
    def doc_order(self) -> list[int]:
        return sorted(self.indices)

    def doc_order_texts(self) -> list[str]:
        by_index = dict(zip(self.indices, self.texts))
        return [by_index[i] for i in self.doc_order]

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "indices": list(self.indices),
            "texts": list(self.texts),
            "sentence_count": self.sentence_count,
            "r1_f1": self.score.r1.f1,
            "r2_f1": self.score.r2.f1,
            "rl_f1": self.score.rl.f1,
        }


class _Objective:
    """Mean of ROUGE-1 and ROUGE-2 F of a sentence set joined in document order."""

    def __init__(self, sentence_tokens: Sequence[list[str]], reference: list[str]):
        self.sent_tokens = sentence_tokens
        self.ref1 = ngrams(reference, 1)
        self.ref2 = ngrams(reference, 2)
        self.ref1_total = sum(self.ref1.values())
        self.ref2_total = sum(self.ref2.values())

    def tokens(self, selected) -> list[str]:
        out: list[str] = []
        for i in sorted(selected):
            out.extend(self.sent_tokens[i])
        return out

    def __call__(self, selected) -> float:
        toks = self.tokens(selected)
        return self.from_tokens(toks)

    def from_tokens(self, toks: list[str]) -> float:
        c1 = ngrams(toks, 1)
        c2 = ngrams(toks, 2)
        r1 = RougeScore.from_counts(_overlap(c1, self.ref1), sum(c1.values()), self.ref1_total)
        r2 = RougeScore.from_counts(_overlap(c2, self.ref2), sum(c2.values()), self.ref2_total)
        return (r1.f1 + r2.f1) / 2


def _overlap(a: Counter, b: Counter) -> int:
    return sum((a & b).values())


def oracle_objective(document: Document, reference: str, selected, config: TokenConfig | None = None) -> float:
    """Objective value of an arbitrary sentence set (used to check the greedy search)."""
    config = config or TokenConfig()
    obj = _Objective([tokenize(s.text, config) for s in document.sentences], tokenize(reference, config))
    return obj(selected)


def greedy_oracle(document: Document, reference: str, m: int, config: TokenConfig | None = None) -> ExtractiveSummary:
    if not document.sentences:
        raise EmptyDocumentError(f"document {document.id!r} has no sentences")
    if m < 1:
        raise ValueError(f"extraction budget must be >= 1, got {m}")
    config = config or TokenConfig()
    ref_tokens = tokenize(reference, config)
    objective = _Objective([tokenize(s.text, config) for s in document.sentences], ref_tokens)

    selected: list[int] = []
    best = 0.0
    trace: list[float] = []
    while len(selected) < m:
        step_best, step_idx = best, None
        for i in range(len(document.sentences)):
            if i in selected:
                continue
            value = objective(selected + [i])
            if value > step_best:  # strict: lowest index wins ties
                step_best, step_idx = value, i
        if step_idx is None:
            break
        selected.append(step_idx)
        best = step_best
        trace.append(best)

    score = score_tokens(objective.tokens(selected), ref_tokens) if selected else RougeTriple.zero()
    return ExtractiveSummary(
        doc_id=document.id,
        indices=tuple(selected),
        texts=tuple(document.sentences[i].text for i in selected),
        score=score,
        sentence_count=len(document.sentences),
        trace=tuple(trace),
    )


def oracle_corpus(
    corpus: Sequence[CorpusEntry],
    m: int | DatasetConfig,
    config: TokenConfig | None = None,
    errors: list[tuple[str, str]] | None = None,
) -> list[ExtractiveSummary]:
    """ORACLE labels for every entry; failing entries are logged and skipped."""
    budget = m.num_extract if isinstance(m, DatasetConfig) else m
    out = []
    for entry in corpus:
        try:
            out.append(greedy_oracle(entry.to_document(), entry.summary, budget, config))
        except (EmptyDocumentError, ValueError) as exc:
            log.warning("oracle failed for %s: %s", entry.id, exc)
            if errors is not None:
                errors.append((entry.id, str(exc)))
    return out
