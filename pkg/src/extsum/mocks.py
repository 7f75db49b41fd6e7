"""Deterministic response rules for the mock backend.

``oracle-echo`` answers every schema without a network: extractive prompts get
the ORACLE sentences of the embedded document, abstractive prompts the gold
summary, extract-abstract prompts their extracted summary verbatim, and the
evaluator returns all 5s when prediction equals reference.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Sequence

from .corpus import CorpusEntry
from .llmclient import ChatRequest, MockBackend
from .oracle import greedy_oracle
from .prompting import (
    ABSTRACTIVE_SYSTEM,
    ABSTRACTIVE_SYSTEM_CORRECTED,
    CRITERIA,
    EVALUATOR_SYSTEM,
    EVALUATOR_SYSTEM_CORRECTED,
    EXTRACTIVE_SYSTEM,
    FORMAT_INSTRUCTIONS,
)
from .rouge import score_pair
from .textcore import TokenConfig

MOCK_RULES = ("oracle-echo", "lead", "empty")

_M_RE = re.compile(r"The summary should contain (\d+) sentences\.")
_EXT_MARK = " Extractive Summary: "


def _strip_instruction(text: str) -> str:
    for fi in FORMAT_INSTRUCTIONS.values():
        for suffix in (f" {fi.text}.", f"{fi.text}.", f" {fi.text}", fi.text):
            if text.endswith(suffix):
                return text[: -len(suffix)]
    return text


class _DocumentIndex:
    def __init__(self, corpus: Sequence[CorpusEntry]):
        self.entries = list(corpus)

    def find(self, user: str) -> CorpusEntry | None:
        """The corpus entry embedded last in the prompt (few-shot documents come first)."""
        best, best_pos = None, -1
        for entry in self.entries:
            pos = user.rfind("Document: " + entry.document)
            if pos > best_pos or (pos == best_pos and best is not None and len(entry.document) > len(best.document)):
                best, best_pos = entry, pos
        return best


def _requested_m(user: str) -> int | None:
    found = _M_RE.findall(user)
    return int(found[-1]) if found else None


class EchoRule:
    """Rule behind ``mock:oracle-echo`` (and ``mock:lead`` with ``lead=True``)."""

    def __init__(self, corpus: Sequence[CorpusEntry], token_config: TokenConfig | None = None, lead: bool = False):
        self.index = _DocumentIndex(corpus)
        self.token_config = token_config or TokenConfig()
        self.lead = lead

    def __call__(self, request: ChatRequest) -> str | None:
        system, user = request.system, request.user
        if system == EXTRACTIVE_SYSTEM:
            return self._extractive(user)
        if system in (ABSTRACTIVE_SYSTEM, ABSTRACTIVE_SYSTEM_CORRECTED):
            if user.startswith("Please revise the extracted summary"):
                return self._revise(user)
            entry = self.index.find(user)
            return None if entry is None else json.dumps({"summary": entry.summary}, ensure_ascii=False)
        if system in (EVALUATOR_SYSTEM, EVALUATOR_SYSTEM_CORRECTED):
            return self._judge(user)
        return None

    def _extractive(self, user: str) -> str | None:
        entry = self.index.find(user)
        m = _requested_m(user)
        if entry is None or m is None:
            return None
        doc = entry.to_document()
        if self.lead:
            texts = doc.sentence_texts[:m]
        else:
            texts = greedy_oracle(doc, entry.summary, m, self.token_config).doc_order_texts()
        payload: dict = {"summary": texts}
        if "give the reason" in user:
            payload["reason"] = "These sentences carry the main facts of the document."
        return json.dumps(payload, ensure_ascii=False)

    def _revise(self, user: str) -> str | None:
        if _EXT_MARK not in user:
            return None
        extracted = _strip_instruction(user.rsplit(_EXT_MARK, 1)[1])
        return json.dumps({"summary": extracted}, ensure_ascii=False)

    def _judge(self, user: str) -> str | None:
        pair = _split_evaluator(user)
        if pair is None:
            return None
        reference, prediction = pair
        if reference.strip() == prediction.strip():
            scores = dict.fromkeys(CRITERIA, 5)
        else:
            f1 = score_pair(prediction, reference, self.token_config).r1.f1
            scores = dict.fromkeys(CRITERIA, 1 + round(4 * f1))
        return json.dumps({"scores": scores})


def _split_evaluator(user: str) -> tuple[str, str] | None:
    body = _strip_instruction(user)
    for head, mid in ((".Reference:", " Summary:"), (". Reference: ", " Summary: ")):
        start = body.find(head)
        if start < 0:
            continue
        rest = body[start + len(head) :]
        cut = rest.rfind(mid)
        if cut < 0:
            continue
        return rest[:cut], rest[cut + len(mid) :]
    return None


def empty_rule(request: ChatRequest) -> str:
    if request.system in (EVALUATOR_SYSTEM, EVALUATOR_SYSTEM_CORRECTED):
        return "no scores"
    if request.system == EXTRACTIVE_SYSTEM:
        return json.dumps({"summary": []})
    return json.dumps({"summary": ""})


def named_mock(name: str, corpus: Sequence[CorpusEntry], token_config: TokenConfig | None = None) -> MockBackend:
    """Backend for ``mock:<name>``; ``mock:script=<path>`` loads a digest -> content JSON map."""
    if name.startswith("script="):
        script = json.loads(Path(name[len("script=") :]).read_text(encoding="utf-8"))
        return MockBackend(script=script)
    if name == "oracle-echo":
        return MockBackend(rule=EchoRule(corpus, token_config))
    if name == "lead":
        return MockBackend(rule=EchoRule(corpus, token_config, lead=True))
    if name == "empty":
        return MockBackend(rule=empty_rule)
    raise ValueError(f"unknown mock {name!r}; choose from {', '.join(MOCK_RULES)} or script=<path>")
