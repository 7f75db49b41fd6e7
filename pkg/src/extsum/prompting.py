"""Prompt builders for the six summarization/evaluation schemas.

Default wording reproduces the published templates verbatim, typos included
("abstractive summarize", "summary.Reference:"). ``corrected=True`` switches
to proofread text.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .oracle import ExtractiveSummary
from .textcore import Document

PROMPT_VERSION = "v1"

SCHEMAS = ("extractive", "abstractive", "in_context", "explanation", "extract_abstract", "evaluator")
EXTRACTIVE_SCHEMAS = ("extractive", "in_context", "explanation")

MAX_SHOTS = 5

EXTRACTIVE_SYSTEM = "You are an extractive summarizer that follows the output pattern."
ABSTRACTIVE_SYSTEM = "You are an abstractive summarize that follows the output pattern."
ABSTRACTIVE_SYSTEM_CORRECTED = "You are an abstractive summarizer that follows the output pattern."
EXTRACT_ABSTRACT_SYSTEM = "You are an abstractive summarizer that follows the output pattern."

CRITERIA = ("coherence", "consistency", "fluency", "efficiency")

EVALUATOR_SYSTEM = (
    "You are a summary evaluator that follows the output pattern. You give scores for the "
    "summaries based on the comprehensive consideration following criteria:\n"
    "(1) Coherence: “the collective quality of all sentences”;\n"
    "(2) Consistency: “the factual alignment between the summary and the reference”;\n"
    "(3) Fluency: “ the quality of individual sentences”;\n"
    "(4) Efficiency: “If the summary is concise”"
)
EVALUATOR_SYSTEM_CORRECTED = EVALUATOR_SYSTEM.replace("“ the quality", "“the quality")

# Slots in the published templates; none may survive rendering.
PLACEHOLDERS = (
    "[Test Document]",
    "[Test Docuemnt]",
    "[Format Instruction]",
    "[n Document-Summary Pairs]",
    "[n Document-Summary-Reason Triads]",
    "[Extractive Summary]",
    "[Reference Summary]",
    "[Predicted Summary]",
)
_PLACEHOLDER_RE = re.compile("|".join(re.escape(p) for p in PLACEHOLDERS))


class PromptError(ValueError):
    pass


@dataclass(frozen=True)
class FormatInstruction:
    text: str


# Templates append their own closing period after the instruction, so these
# end without one.
FORMAT_INSTRUCTIONS: dict[str, FormatInstruction] = {
    "extractive": FormatInstruction(
        'Answer with a single JSON object of the form {"summary": ["<sentence>", ...]}, '
        "where each list item is one sentence copied verbatim from the document, "
        "and write nothing outside the JSON object"
    ),
    "extractive_reason": FormatInstruction(
        'Answer with a single JSON object of the form {"summary": ["<sentence>", ...], '
        '"reason": "<why these sentences were selected>"}, where each list item is one '
        "sentence copied verbatim from the document, and write nothing outside the JSON object"
    ),
    "abstractive": FormatInstruction(
        'Answer with a single JSON object of the form {"summary": "<summary text>"} '
        "and write nothing outside the JSON object"
    ),
    "evaluator": FormatInstruction(
        'Answer with a single JSON object of the form {"scores": {"coherence": <1-5>, '
        '"consistency": <1-5>, "fluency": <1-5>, "efficiency": <1-5>}} using integer scores '
        "from 1 (worst) to 5 (best), and write nothing outside the JSON object"
    ),
}


def default_instruction(schema: str) -> FormatInstruction:
    if schema in ("extractive", "in_context"):
        return FORMAT_INSTRUCTIONS["extractive"]
    if schema == "explanation":
        return FORMAT_INSTRUCTIONS["extractive_reason"]
    if schema in ("abstractive", "extract_abstract"):
        return FORMAT_INSTRUCTIONS["abstractive"]
    if schema == "evaluator":
        return FORMAT_INSTRUCTIONS["evaluator"]
    raise PromptError(f"unknown schema {schema!r}")


@dataclass(frozen=True)
class PromptBundle:
    system: str
    user: str
    schema: str

    def messages(self) -> list[dict[str, str]]:
        return [{"role": "system", "content": self.system}, {"role": "user", "content": self.user}]


@dataclass(frozen=True)
class FewShotExample:
    document: str
    summary: str
    reason: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> FewShotExample:
        return cls(d["document"], d["summary"], d.get("reason"))


def load_fewshot(path: str | Path) -> list[FewShotExample]:
    examples = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                examples.append(FewShotExample.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise PromptError(f"{path}: line {lineno}: bad few-shot example ({exc})") from None
    return examples


def find_placeholders(text: str) -> list[str]:
    return _PLACEHOLDER_RE.findall(text)


def _check_doc(doc: Document) -> None:
    if not doc.text.strip():
        raise PromptError(f"document {doc.id!r} is empty")


def _check_m(m: int) -> None:
    if m < 1:
        raise PromptError(f"m must be >= 1, got {m}")


def build_extractive(doc: Document, m: int, fi: FormatInstruction | None = None) -> PromptBundle:
    _check_doc(doc)
    _check_m(m)
    fi = fi or default_instruction("extractive")
    user = (
        f"Please extract sentences as the summary. The summary should contain {m} sentences. "
        f"Document: {doc.text} {fi.text}."
    )
    return PromptBundle(EXTRACTIVE_SYSTEM, user, "extractive")


def build_abstractive(doc: Document, fi: FormatInstruction | None = None, corrected: bool = False) -> PromptBundle:
    _check_doc(doc)
    fi = fi or default_instruction("abstractive")
    system = ABSTRACTIVE_SYSTEM_CORRECTED if corrected else ABSTRACTIVE_SYSTEM
    user = f"Please write a summary for the document. Document: {doc.text} {fi.text}"
    return PromptBundle(system, user, "abstractive")


def _serialize_examples(examples: Sequence[FewShotExample], with_reason: bool) -> str:
    blocks = []
    for ex in examples:
        block = f"Document: {ex.document}\nSummary: {ex.summary}"
        if with_reason:
            block += f"\nReason: {ex.reason}"
        blocks.append(block)
    return "\n\n".join(blocks)


def _check_shots(examples: Sequence[FewShotExample]) -> None:
    if len(examples) > MAX_SHOTS:
        raise PromptError(f"at most {MAX_SHOTS} examples are supported, got {len(examples)}")


def build_in_context(
    doc: Document, m: int, examples: Sequence[FewShotExample], fi: FormatInstruction | None = None
) -> PromptBundle:
    """Few-shot extractive prompt; with no examples this is exactly the zero-shot prompt."""
    _check_shots(examples)
    if any(ex.reason is not None for ex in examples):
        raise PromptError("in-context examples must not carry reasons; use build_explanation")
    if not examples:
        return build_extractive(doc, m, fi)
    _check_doc(doc)
    _check_m(m)
    fi = fi or default_instruction("in_context")
    user = (
        "The following examples are successful extractive summarization instances: "
        f"{_serialize_examples(examples, False)}. Please summarize the following document. "
        f"Document: {doc.text}. The summary should contain {m} sentences. {fi.text}."
    )
    return PromptBundle(EXTRACTIVE_SYSTEM, user, "in_context")


def build_explanation(
    doc: Document, m: int, examples: Sequence[FewShotExample], fi: FormatInstruction | None = None
) -> PromptBundle:
    _check_shots(examples)
    if not examples:
        raise PromptError("the explanation schema needs at least one example")
    missing = [i for i, ex in enumerate(examples) if not ex.reason]
    if missing:
        raise PromptError(f"examples {missing} lack a reason")
    _check_doc(doc)
    _check_m(m)
    fi = fi or default_instruction("explanation")
    user = (
        "The following examples are successful extractive summarization instances: "
        f"{_serialize_examples(examples, True)}. Please summarize the following document and "
        f"give the reason. Document: {doc.text}. The summary should contain {m} sentences. {fi.text}."
    )
    return PromptBundle(EXTRACTIVE_SYSTEM, user, "explanation")


def build_extract_abstract(doc: Document, ext: ExtractiveSummary, fi: FormatInstruction | None = None) -> PromptBundle:
    _check_doc(doc)
    if ext.doc_id != doc.id:
        raise PromptError(f"extractive summary belongs to {ext.doc_id!r}, not {doc.id!r}")
    if not ext.indices:
        raise PromptError(f"extractive summary for {doc.id!r} is empty")
    fi = fi or default_instruction("extract_abstract")
    extracted = " ".join(ext.doc_order_texts())
    user = (
        "Please revise the extracted summary based on the document. The revised summary should "
        "include the information in the extracted summary. "
        f"Document: {doc.text} Extractive Summary: {extracted} {fi.text}."
    )
    return PromptBundle(EXTRACT_ABSTRACT_SYSTEM, user, "extract_abstract")


def build_evaluator(
    reference: str, prediction: str, fi: FormatInstruction | None = None, corrected: bool = False
) -> PromptBundle:
    if not reference.strip() or not prediction.strip():
        raise PromptError("evaluator needs a non-empty reference and prediction")
    fi = fi or default_instruction("evaluator")
    if corrected:
        user = (
            "Please evaluate the summary based on the reference summary. "
            f"Reference: {reference} Summary: {prediction} {fi.text}."
        )
        return PromptBundle(EVALUATOR_SYSTEM_CORRECTED, user, "evaluator")
    user = f"Please evaluate the summary based on the reference summary.Reference:{reference} Summary:{prediction}{fi.text}."
    return PromptBundle(EVALUATOR_SYSTEM, user, "evaluator")
