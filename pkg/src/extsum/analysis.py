"""Result tables, positional-bias histograms and length-bucket statistics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .oracle import ExtractiveSummary
from .pipeline import RunRecord

# Row order of the main results table.
REPORT_ORDER = ("Ext", "+context", "+reason", "Abs", "Ext-Abs", "Oracle-Abs")

RESULTS_COLUMNS = (
    "label", "n", "r1_mean", "r1_std", "r2_mean", "r2_std", "rl_mean", "rl_std",
    "geval_mean", "geval_std", "failure_rate",
)
HIST_COLUMNS = ("source", "bin", "bin_start", "bin_end", "mass", "count")
BUCKET_COLUMNS = ("config", "bucket_start", "bucket_end") + RESULTS_COLUMNS[1:]

DEFAULT_BUCKET_EDGES = (0, 250, 500, 750, 1000, 1500, math.inf)


@dataclass(frozen=True)
class Stat:
    mean: float
    std: float


@dataclass(frozen=True)
class AggregateRow:
    label: str
    n: int
    r1: Stat
    r2: Stat
    rl: Stat
    geval: Stat | None
    failure_rate: float

    def as_csv_row(self, digits: int = 4) -> dict:
        def r(x):
            return "" if x is None or self.n == 0 else round(x, digits)

        return {
            "label": self.label,
            "n": self.n,
            "r1_mean": r(self.r1.mean), "r1_std": r(self.r1.std),
            "r2_mean": r(self.r2.mean), "r2_std": r(self.r2.std),
            "rl_mean": r(self.rl.mean), "rl_std": r(self.rl.std),
            "geval_mean": r(self.geval.mean if self.geval else None),
            "geval_std": r(self.geval.std if self.geval else None),
            "failure_rate": r(self.failure_rate),
        }


@dataclass(frozen=True)
class PositionBin:
    start: float
    end: float
    mass: float
    count: int


@dataclass(frozen=True)
class PositionDistribution:
    bins: tuple[PositionBin, ...]
    mean_position: float
    source: str
    total: int

    @property
    def masses(self) -> list[float]:
        return [b.mass for b in self.bins]


def mean_std(values: Sequence[float], ddof: int = 0) -> Stat:
    """Mean and standard deviation; population (``ddof=0``) by default."""
    n = len(values)
    if n == 0:
        return Stat(0.0, 0.0)
    mean = math.fsum(values) / n
    if n - ddof <= 0:
        return Stat(mean, 0.0)
    var = math.fsum((v - mean) ** 2 for v in values) / (n - ddof)
    return Stat(mean, math.sqrt(var))


def aggregate_records(label: str, records: Sequence[RunRecord], ddof: int = 0) -> AggregateRow:
    scored = [r.rouge for r in records if r.rouge is not None]
    gevals = [r.geval.overall for r in records if r.geval is not None]
    return AggregateRow(
        label=label,
        n=len(records),
        r1=mean_std([s.r1.f1 for s in scored], ddof),
        r2=mean_std([s.r2.f1 for s in scored], ddof),
        rl=mean_std([s.rl.f1 for s in scored], ddof),
        geval=mean_std(gevals, ddof) if gevals else None,
        failure_rate=sum(r.failed for r in records) / len(records) if records else 0.0,
    )


def _label_order(labels: Iterable[str]) -> list[str]:
    labels = list(labels)
    known = [c for c in REPORT_ORDER if c in labels]
    return known + [lab for lab in labels if lab not in REPORT_ORDER]


def aggregate(labeled: Mapping[str, Sequence[RunRecord]], ddof: int = 0) -> list[AggregateRow]:
    """One row per label with per-document mean/std; standard configurations first."""
    return [aggregate_records(label, labeled[label], ddof) for label in _label_order(labeled)]


def aggregate_runs(label: str, runs: Sequence[Sequence[RunRecord]], ddof: int = 0) -> AggregateRow:
    """Mean/std across repeated runs of one configuration (each run reduced to its mean)."""
    rows = [aggregate_records(label, run) for run in runs]
    gevals = [row.geval.mean for row in rows if row.geval is not None]
    return AggregateRow(
        label=label,
        n=len(rows),
        r1=mean_std([row.r1.mean for row in rows], ddof),
        r2=mean_std([row.r2.mean for row in rows], ddof),
        rl=mean_std([row.rl.mean for row in rows], ddof),
        geval=mean_std(gevals, ddof) if gevals else None,
        failure_rate=mean_std([row.failure_rate for row in rows]).mean,
    )


def _positions(item) -> tuple[list[int], int]:
    if isinstance(item, ExtractiveSummary):
        return list(item.indices), item.sentence_count
    return item.indices, item.sentence_count


def position_histogram(
    records: Iterable[RunRecord | ExtractiveSummary], num_bins: int = 10, source: str = "model"
) -> PositionDistribution:
    """Histogram of normalized positions index/(n-1) over equal-width bins on [0, 1].

    Bins are half-open except the last, which includes 1.0. Single-sentence
    documents contribute at position 0.
    """
    if num_bins < 1:
        raise ValueError("num_bins must be >= 1")
    counts = [0] * num_bins
    positions: list[float] = []
    for item in records:
        indices, n = _positions(item)
        for idx in indices:
            if n <= 1:
                b, pos = 0, 0.0
            else:
                # integer arithmetic keeps bin edges exact
                b = min(idx * num_bins // (n - 1), num_bins - 1)
                pos = idx / (n - 1)
            counts[b] += 1
            positions.append(pos)
    total = sum(counts)
    bins = tuple(
        PositionBin(i / num_bins, (i + 1) / num_bins, counts[i] / total if total else 0.0, counts[i])
        for i in range(num_bins)
    )
    mean = math.fsum(positions) / len(positions) if positions else 0.0
    return PositionDistribution(bins, mean, source, total)


def _check_edges(edges: Sequence[float]) -> None:
    if len(edges) < 2:
        raise ValueError("need at least two bucket edges")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError(f"bucket edges must be strictly increasing: {list(edges)}")


def bucket_of(length: int, edges: Sequence[float]) -> int | None:
    for i, (lo, hi) in enumerate(zip(edges, edges[1:])):
        last = i == len(edges) - 2
        if lo <= length < hi or (last and length == hi):
            return i
    return None


def length_buckets(
    records: Sequence[RunRecord],
    edges: Sequence[float] = DEFAULT_BUCKET_EDGES,
    doc_words: Mapping[str, int] | None = None,
    ddof: int = 0,
) -> list[tuple[float, float, AggregateRow]]:
    """Per-bucket ROUGE statistics with documents bucketed by word count.

    Buckets are ``[edge_i, edge_i+1)``, the last one closed. Word counts come
    from ``doc_words`` when given, else from each record.
    """
    _check_edges(edges)
    groups: list[list[RunRecord]] = [[] for _ in range(len(edges) - 1)]
    for r in records:
        length = doc_words[r.doc_id] if doc_words is not None else r.doc_words
        b = bucket_of(length, edges)
        if b is not None:
            groups[b].append(r)
    out = []
    for i, group in enumerate(groups):
        lo, hi = edges[i], edges[i + 1]
        out.append((lo, hi, aggregate_records(f"[{_fmt_edge(lo)},{_fmt_edge(hi)})", group, ddof)))
    return out


def _fmt_edge(x: float) -> str:
    return "inf" if math.isinf(x) else str(int(x)) if float(x).is_integer() else str(x)


def _csv(columns: Sequence[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def results_csv(rows: Sequence[AggregateRow]) -> str:
    return _csv(RESULTS_COLUMNS, (r.as_csv_row() for r in rows))


def histogram_csv(dists: Sequence[PositionDistribution]) -> str:
    rows = (
        {"source": d.source, "bin": i, "bin_start": round(b.start, 4), "bin_end": round(b.end, 4),
         "mass": round(b.mass, 6), "count": b.count}
        for d in dists
        for i, b in enumerate(d.bins)
    )
    return _csv(HIST_COLUMNS, rows)


def buckets_csv(by_config: Mapping[str, Sequence[tuple[float, float, AggregateRow]]]) -> str:
    def rows():
        for config, buckets in by_config.items():
            for lo, hi, row in buckets:
                cells = row.as_csv_row()
                del cells["label"]
                yield {"config": config, "bucket_start": _fmt_edge(lo), "bucket_end": _fmt_edge(hi)} | cells

    return _csv(BUCKET_COLUMNS, rows())


def _pct(stat: Stat | None) -> str:
    return "-" if stat is None else f"{100 * stat.mean:6.2f}±{100 * stat.std:5.2f}"


def render_report(
    rows: Sequence[AggregateRow],
    dists: Sequence[PositionDistribution] = (),
    buckets: Sequence[tuple[float, float, AggregateRow]] = (),
    bar_width: int = 40,
) -> str:
    """Fixed-width text report; ROUGE shown as percentages."""
    lines = [f"{'config':<16}{'n':>6}  {'R1':>12}  {'R2':>12}  {'RL':>12}  {'G-EVAL':>10}  {'fail':>6}"]
    for r in rows:
        g = "-" if r.geval is None else f"{r.geval.mean:.2f}"
        lines.append(
            f"{r.label:<16}{r.n:>6}  {_pct(r.r1):>12}  {_pct(r.r2):>12}  {_pct(r.rl):>12}  {g:>10}  {r.failure_rate:>6.2%}"
        )
    for d in dists:
        lines += ["", f"position distribution ({d.source}, {d.total} sentences, mean {d.mean_position:.3f})"]
        for b in d.bins:
            bar = "#" * round(b.mass * bar_width)
            lines.append(f"  [{b.start:.1f},{b.end:.1f}{']' if b.end == 1.0 else ')'} {b.mass:6.2%} {bar}")
    if buckets:
        lines += ["", "ROUGE-1 by document length (words)"]
        for lo, hi, row in buckets:
            r1 = _pct(row.r1) if row.n else "-"
            lines.append(f"  {_fmt_edge(lo):>6}-{_fmt_edge(hi):<6} n={row.n:<5} R1 {r1}")
    return "\n".join(lines) + "\n"
