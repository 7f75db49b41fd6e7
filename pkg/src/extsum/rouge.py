"""ROUGE-1/2/L precision, recall and F-measure computed from scratch."""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass
from typing import Sequence

from .textcore import TokenConfig, tokenize


@dataclass(frozen=True)
class RougeScore:
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0

    @classmethod
    def from_counts(cls, match: int, cand_total: int, ref_total: int) -> RougeScore:
        p = match / cand_total if cand_total else 0.0
        r = match / ref_total if ref_total else 0.0
        return cls(p, r, f_measure(p, r))


@dataclass(frozen=True)
class RougeTriple:
    r1: RougeScore
    r2: RougeScore
    rl: RougeScore

    def f1s(self) -> tuple[float, float, float]:
        return self.r1.f1, self.r2.f1, self.rl.f1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> RougeTriple:
        return cls(RougeScore(**d["r1"]), RougeScore(**d["r2"]), RougeScore(**d["rl"]))

    @classmethod
    def zero(cls) -> RougeTriple:
        return cls(RougeScore(), RougeScore(), RougeScore())


def f_measure(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> RougeScore:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cand = ngrams(candidate, n)
    ref = ngrams(reference, n)
    match = sum((cand & ref).values())
    return RougeScore.from_counts(match, sum(cand.values()), sum(ref.values()))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    """Single-sequence ROUGE-L over the full token lists."""
    if not candidate or not reference:
        return RougeScore()
    return RougeScore.from_counts(lcs_length(candidate, reference), len(candidate), len(reference))


def score_tokens(candidate: Sequence[str], reference: Sequence[str]) -> RougeTriple:
    return RougeTriple(
        rouge_n(candidate, reference, 1),
        rouge_n(candidate, reference, 2),
        rouge_l(candidate, reference),
    )


def score_pair(candidate: str, reference: str, config: TokenConfig | None = None) -> RougeTriple:
    config = config or TokenConfig()
    return score_tokens(tokenize(candidate, config), tokenize(reference, config))
