"""Parse model outputs and map claimed sentences back to source sentences."""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .prompting import CRITERIA, EXTRACTIVE_SCHEMAS
from .textcore import Document

DEFAULT_THRESHOLD = 0.8

STRICT = "strict_json"
SALVAGE = "salvage"


class Unparseable(ValueError):
    pass


@dataclass(frozen=True)
class ParsedOutput:
    parse_mode: str
    summary_sentences: tuple[str, ...] | None = None
    summary_text: str | None = None
    reason: str | None = None
    scores: dict | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["summary_sentences"] is not None:
            d["summary_sentences"] = list(d["summary_sentences"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ParsedOutput:
        sents = d.get("summary_sentences")
        return cls(
            parse_mode=d["parse_mode"],
            summary_sentences=tuple(sents) if sents is not None else None,
            summary_text=d.get("summary_text"),
            reason=d.get("reason"),
            scores=d.get("scores"),
        )


@dataclass(frozen=True)
class Match:
    claimed: str
    index: int
    similarity: float


@dataclass(frozen=True)
class AlignmentResult:
    matched: tuple[Match, ...] = ()
    unmatched: tuple[str, ...] = ()
    threshold: float = DEFAULT_THRESHOLD

    @property
    def indices(self) -> list[int]:
        return [m.index for m in self.matched]

    @property
    def copy_rate(self) -> float:
        total = len(self.matched) + len(self.unmatched)
        if total == 0:
            return 0.0
        return sum(1 for m in self.matched if m.similarity == 1.0) / total

    def to_dict(self) -> dict:
        return {
            "matched": [[m.claimed, m.index, m.similarity] for m in self.matched],
            "unmatched": list(self.unmatched),
            "threshold": self.threshold,
            "copy_rate": self.copy_rate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> AlignmentResult:
        return cls(
            tuple(Match(c, i, s) for c, i, s in d["matched"]),
            tuple(d["unmatched"]),
            d.get("threshold", DEFAULT_THRESHOLD),
        )


def first_json_object(text: str) -> str | None:
    """First balanced ``{...}`` substring that decodes as JSON, honouring string literals."""
    start = text.find("{")
    while start != -1:
        depth = 0
        in_str = False
        escape = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_str:
                if escape:
                    escape = False
                elif ch == "\\":
                    escape = True
                elif ch == '"':
                    in_str = False
            elif ch == '"':
                in_str = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    candidate = text[start : i + 1]
                    try:
                        json.loads(candidate)
                    except json.JSONDecodeError:
                        break
                    return candidate
        start = text.find("{", start + 1)
    return None


def _from_object(obj, schema: str, mode: str) -> ParsedOutput | None:
    if not isinstance(obj, dict):
        return None
    if schema == "evaluator":
        scores = obj.get("scores")
        if not isinstance(scores, dict):
            return None
        return ParsedOutput(mode, scores=scores)
    summary = obj.get("summary")
    reason = obj.get("reason")
    reason = reason if isinstance(reason, str) else None
    if schema in EXTRACTIVE_SCHEMAS:
        if isinstance(summary, str):
            summary = [summary]
        if not isinstance(summary, list) or not all(isinstance(s, str) for s in summary):
            return None
        return ParsedOutput(mode, summary_sentences=tuple(s.strip() for s in summary if s.strip()), reason=reason)
    if isinstance(summary, list) and all(isinstance(s, str) for s in summary):
        summary = " ".join(s.strip() for s in summary)
    if not isinstance(summary, str):
        return None
    return ParsedOutput(mode, summary_text=summary.strip(), reason=reason)


def parse_output(raw: str, schema: str) -> ParsedOutput:
    """Strict JSON first; otherwise salvage the first JSON object or fall back to plain text.

    The evaluator schema has no plain-text fallback and raises :class:`Unparseable`.
    """
    try:
        parsed = _from_object(json.loads(raw), schema, STRICT)
    except json.JSONDecodeError:
        parsed = None
    if parsed is not None:
        return parsed
    blob = first_json_object(raw)
    if blob is not None:
        parsed = _from_object(json.loads(blob), schema, SALVAGE)
        if parsed is not None:
            return parsed
    if schema == "evaluator":
        raise Unparseable("no scores object found in evaluator output")
    if schema in EXTRACTIVE_SCHEMAS:
        lines = tuple(ln.strip() for ln in raw.splitlines() if ln.strip())
        return ParsedOutput(SALVAGE, summary_sentences=lines)
    return ParsedOutput(SALVAGE, summary_text=raw.strip())


def validate_scores(scores: dict) -> dict[str, int]:
    """Criteria scores as ints in 1..5; raises ValueError otherwise (no clamping)."""
    out = {}
    for name in CRITERIA:
        value = scores.get(name)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise ValueError(f"criterion {name!r} has non-integer score {value!r}")
        if not 1 <= value <= 5:
            raise ValueError(f"criterion {name!r} score {value} outside 1..5")
        out[name] = int(value)
    return out


_WS = re.compile(r"\s+")


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def normalize(text: str) -> str:
    text = _WS.sub(" ", text.lower()).strip()
    lo, hi = 0, len(text)
    while lo < hi and (_is_punct(text[lo]) or text[lo].isspace()):
        lo += 1
    while hi > lo and (_is_punct(text[hi - 1]) or text[hi - 1].isspace()):
        hi -= 1
    return text[lo:hi]


def edit_distance(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def _similarity_normed(a: str, b: str) -> float:
    if a == b:
        return 1.0
    longest = max(len(a), len(b))
    return 1.0 - edit_distance(a, b) / longest


def normalized_similarity(a: str, b: str) -> float:
    return _similarity_normed(normalize(a), normalize(b))


def align_to_document(claimed: Sequence[str], doc: Document, threshold: float = DEFAULT_THRESHOLD) -> AlignmentResult:
    """Greedy per-claim matching: each claim takes the best unused sentence at or above threshold."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    sources = [normalize(s.text) for s in doc.sentences]
    used: set[int] = set()
    matched: list[Match] = []
    unmatched: list[str] = []
    for claim in claimed:
        target = normalize(claim)
        best_sim, best_idx = -1.0, None
        for i, src in enumerate(sources):
            if i in used:
                continue
            longest = max(len(src), len(target))
            # similarity can never exceed the length ratio
            if longest and min(len(src), len(target)) / longest < max(threshold, best_sim):
                continue
            sim = _similarity_normed(target, src)
            if sim > best_sim:
                best_sim, best_idx = sim, i
        if best_idx is not None and best_sim >= threshold:
            used.add(best_idx)
            matched.append(Match(claim, best_idx, best_sim))
        else:
            unmatched.append(claim)
    return AlignmentResult(tuple(matched), tuple(unmatched), threshold)
