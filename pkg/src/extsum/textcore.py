"""Sentence segmentation and tokenization shared by the metric and oracle code."""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass, field
from functools import lru_cache

import regex

# Tokens ending in a single period that never close a sentence. Compared
# lowercased, without the trailing period.
ABBREVIATIONS = frozenset(
    {
        # titles
        "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "rev", "gen",
        "col", "lt", "capt", "sgt", "gov", "sen", "rep", "pres", "hon",
        # business / places
        "inc", "ltd", "co", "corp", "bros", "dept", "univ", "assn", "ave",
        "blvd", "rd", "mt", "ft",
        # months
        "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept",
        "oct", "nov", "dec",
        # latin and reference abbreviations
        "e.g", "i.e", "etc", "vs", "cf", "al", "approx", "fig", "figs",
        "eq", "eqs", "vol", "pp", "ed", "eds", "est", "ca",
        # time and units
        "a.m", "p.m", "min", "max", "hr", "hrs", "sec", "oz", "lb", "lbs",
        # countries / organisations written with periods
        "u.s", "u.k", "u.n", "u.s.a", "e.u",
    }
)

_OPENERS = "\"'“‘(["
_CLOSERS = "\"'”’)]"
_BOUNDARY = re.compile(r"([.!?]+)([" + re.escape(_CLOSERS) + r"]*)(\s+)(?=\S)")
_INITIALISM = re.compile(r"^(?:[^\W\d_]\.)+[^\W\d_]$")
_TOKEN = regex.compile(r"[\p{L}\p{Nd}]+")

TOKEN_PATTERN = "maximal runs of alphanumeric characters (Unicode L* and Nd)"


@dataclass(frozen=True)
class Sentence:
    index: int
    text: str
    char_span: tuple[int, int]


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    sentences: tuple[Sentence, ...] = field(default=())

    @classmethod
    def from_text(cls, doc_id: str, text: str) -> Document:
        return cls(doc_id, text, tuple(segment_sentences(text)))

    @classmethod
    def from_sentences(cls, doc_id: str, text: str, sentences: list[str]) -> Document:
        """Build a document from externally supplied sentence boundaries.

        Each sentence is located verbatim in ``text`` when possible; otherwise
        its span is recovered by matching alphanumeric content.
        """
        return cls(doc_id, text, tuple(_locate_sentences(text, sentences)))

    def __len__(self) -> int:
        return len(self.sentences)

    @property
    def sentence_texts(self) -> list[str]:
        return [s.text for s in self.sentences]


@dataclass(frozen=True)
class TokenConfig:
    lowercase: bool = True
    stemming: bool = False

    @property
    def token_pattern(self) -> str:
        return TOKEN_PATTERN


def _is_opener(ch: str) -> bool:
    return ch.isupper() or ch in _OPENERS or regex.match(r"\p{Nd}", ch) is not None


def _is_abbreviation(text: str, period_pos: int) -> bool:
    start = period_pos
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    token = text[start:period_pos].lstrip(_OPENERS)
    if not token:
        return False
    if len(token) == 1 and token.isalpha():
        return True  # initials such as "J. Smith"
    low = token.lower()
    return low in ABBREVIATIONS or _INITIALISM.match(token) is not None


def _boundaries(text: str) -> list[int]:
    cuts = []
    for m in _BOUNDARY.finditer(text):
        if not _is_opener(text[m.end()]):
            continue
        if m.group(1) == "." and _is_abbreviation(text, m.start(1)):
            continue
        cuts.append(m.end(2))
    return cuts


def segment_sentences(text: str) -> list[Sentence]:
    """Split ``text`` into sentences with stable character spans.

    A boundary falls after ``.``, ``!`` or ``?`` (plus any closing quotes or
    brackets) when whitespace follows and the next character is uppercase, a
    digit, or an opening quote/bracket. Entries of :data:`ABBREVIATIONS`,
    single-letter initials and dotted initialisms never end a sentence.
    """
    out: list[Sentence] = []
    start = 0
    for end in [*_boundaries(text), len(text)]:
        piece = text[start:end]
        stripped = piece.strip()
        if stripped:
            lo = start + (len(piece) - len(piece.lstrip()))
            hi = lo + len(stripped)
            out.append(Sentence(len(out), stripped, (lo, hi)))
        start = end
    return out


def _alnum_positions(text: str) -> list[int]:
    return [i for m in _TOKEN.finditer(text) for i in range(m.start(), m.end())]


def _locate_sentences(text: str, sentences: list[str]) -> list[Sentence]:
    positions = _alnum_positions(text)
    out: list[Sentence] = []
    cursor = 0  # into text
    consumed = 0  # into positions
    for raw in sentences:
        sent = raw.strip()
        if not sent:
            continue
        n_alnum = sum(len(t) for t in _TOKEN.findall(sent))
        at = text.find(sent, cursor)
        if at >= 0:
            span = (at, at + len(sent))
        elif n_alnum and consumed + n_alnum <= len(positions):
            span = (positions[consumed], positions[consumed + n_alnum - 1] + 1)
        else:
            span = (cursor, cursor)
        out.append(Sentence(len(out), sent, span))
        cursor = max(cursor, span[1])
        consumed = bisect.bisect_left(positions, cursor) if at >= 0 else consumed + n_alnum
    return out


@lru_cache(maxsize=65536)
def _stem(token: str) -> str:
    return _stemmer().stem(token)


@lru_cache(maxsize=1)
def _stemmer():
    try:
        from nltk.stem.porter import PorterStemmer
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise RuntimeError("stemming requires nltk (pip install 'extsum[stem]')") from exc
    return PorterStemmer()


def tokenize(text: str, config: TokenConfig | None = None) -> list[str]:
    config = config or TokenConfig()
    tokens = _TOKEN.findall(text)
    if config.lowercase:
        tokens = [t.lower() for t in tokens]
    if config.stemming:
        tokens = [_stem(t) for t in tokens]
    return tokens
