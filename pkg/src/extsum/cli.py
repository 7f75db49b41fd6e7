"""Command-line entry point: ``extsum {oracle,summarize,evaluate,analyze}``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Sequence

import yaml

from . import analysis
from .corpus import DEFAULT_SEED, CorpusError, CorpusIOError, dataset_config, load_jsonl, sample
from .llmclient import AuthError, BackendConfig, ChatClient, ClientError, HTTPBackend, ResponseCache
from .mocks import named_mock
from .oracle import oracle_corpus
from .pipeline import (
    PipelineError,
    RunRecord,
    load_records,
    run_abstractive,
    run_extract_then_generate,
    run_extractive,
    run_geval,
    write_run,
)
from .prompting import MAX_SHOTS, PromptError, load_fewshot
from .rouge import score_pair
from .textcore import TokenConfig

log = logging.getLogger("extsum")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO, EXIT_BACKEND = 0, 1, 2, 3, 4

SCHEMAS = ("extractive", "abstractive", "ext-abs")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dataset: str | None = None
    corpus: str | None = None
    schema: str = "extractive"
    m: int | None = None
    k: int = 0
    with_reason: bool = False
    fewshot: str | None = None
    extractor: str = "oracle"
    backend: str = "mock:oracle-echo"
    model: str = "gpt-3.5-turbo"
    base_url: str | None = None
    temperature: float = 0.0
    max_tokens: int | None = None
    sample: int | None = None
    seed: int = DEFAULT_SEED
    cache_dir: str | None = ".extsum-cache"
    no_cache: bool = False
    output_dir: str = "out"
    concurrency: int = 4
    max_retries: int = 5
    timeout: float = 60.0
    rpm: int | None = None
    threshold: float = 0.8
    corrected_prompts: bool = False
    stemming: bool = False
    geval: bool = False
    profiles: dict | None = None

    @property
    def token_config(self) -> TokenConfig:
        return TokenConfig(stemming=self.stemming)

    def experiment(self) -> dict:
        """Fields that define the experiment; locations and pool sizes excluded."""
        skip = {"cache_dir", "output_dir", "concurrency", "no_cache", "profiles", "corpus", "rpm", "timeout"}
        return {k: v for k, v in asdict(self).items() if k not in skip}


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("extsum") / "data" / "fixtures" / f"{name}.jsonl"))


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except OSError as exc:
        raise CorpusIOError(f"cannot read config file {path}: {exc.strerror or exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML/JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "api_key" in data:
        raise ConfigError("API keys are read from the environment only")
    return data


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Precedence: command-line flag > config file > built-in default."""
    values = _load_config_file(getattr(args, "config", None))
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None and flag is not False:
            values[f.name] = flag
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.schema not in SCHEMAS:
        raise ConfigError(f"--schema must be one of {', '.join(SCHEMAS)}")
    if not 0 <= cfg.k <= MAX_SHOTS:
        raise ConfigError(f"--k must be between 0 and {MAX_SHOTS}")
    if (cfg.k > 0 or cfg.with_reason) and not cfg.fewshot:
        raise ConfigError("--k > 0 and --with-reason need a --fewshot file")
    if cfg.with_reason and cfg.k == 0:
        raise ConfigError("--with-reason needs --k >= 1")
    if cfg.extractor not in ("model", "oracle"):
        raise ConfigError("--extractor must be 'model' or 'oracle'")
    if cfg.m is not None and cfg.m < 1:
        raise ConfigError("--m must be >= 1")
    if cfg.concurrency < 1:
        raise ConfigError("--concurrency must be >= 1")
    if not 0 < cfg.threshold <= 1:
        raise ConfigError("--threshold must be in (0, 1]")
    if not cfg.dataset and not cfg.corpus:
        raise ConfigError("give --dataset and/or --corpus")


def _budget(cfg: RunConfig) -> int:
    if cfg.m is not None:
        return cfg.m
    if not cfg.dataset:
        raise ConfigError("--m is required when no --dataset default applies")
    return dataset_config(cfg.dataset).num_extract


def _corpus(cfg: RunConfig):
    if cfg.dataset:
        try:
            dataset_config(cfg.dataset)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
    path = cfg.corpus or fixture_path(dataset_config(cfg.dataset).name)
    corpus = load_jsonl(path)
    if cfg.sample is not None:
        corpus = sample(corpus, cfg.sample, cfg.seed)
    return corpus


def _fewshot(cfg: RunConfig):
    if not cfg.fewshot or cfg.k == 0:
        return []
    try:
        shots = load_fewshot(cfg.fewshot)
    except OSError as exc:
        raise CorpusIOError(f"cannot read few-shot file {cfg.fewshot}: {exc.strerror or exc}") from exc
    if len(shots) < cfg.k:
        raise ConfigError(f"--k {cfg.k} but {cfg.fewshot} holds only {len(shots)} examples")
    shots = shots[: cfg.k]
    if cfg.with_reason and any(not s.reason for s in shots):
        raise ConfigError(f"--with-reason but {cfg.fewshot} has examples without a reason")
    return shots


def _client(cfg: RunConfig, corpus) -> ChatClient:
    cache = None if cfg.no_cache or not cfg.cache_dir else ResponseCache(cfg.cache_dir)
    if cfg.backend.startswith("mock:"):
        try:
            backend = named_mock(cfg.backend[len("mock:") :], corpus, cfg.token_config)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        except OSError as exc:
            raise CorpusIOError(f"cannot read mock script: {exc}") from exc
    else:
        profile = dict((cfg.profiles or {}).get(cfg.backend, {}))
        backend_cfg = BackendConfig(
            base_url=cfg.base_url or profile.get("base_url", "https://api.openai.com/v1"),
            api_key_env=profile.get("api_key_env", f"{cfg.backend.upper().replace('-', '_')}_API_KEY"),
            timeout=cfg.timeout,
            max_retries=cfg.max_retries,
            max_in_flight=cfg.concurrency,
            requests_per_minute=cfg.rpm,
        )
        try:
            backend = HTTPBackend(backend_cfg)
        except AuthError as exc:
            raise ConfigError(str(exc)) from None
    return ChatClient(
        backend,
        model=cfg.model,
        temperature=cfg.temperature,
        max_tokens=cfg.max_tokens,
        cache=cache,
        max_retries=cfg.max_retries,
        max_in_flight=cfg.concurrency,
        requests_per_minute=cfg.rpm,
    )


def _label(cfg: RunConfig) -> str:
    if cfg.schema == "abstractive":
        return "Abs"
    if cfg.schema == "ext-abs":
        return "Oracle-Abs" if cfg.extractor == "oracle" else "Ext-Abs"
    if cfg.with_reason:
        return "+reason"
    return "+context" if cfg.k else "Ext"


def _print_summary(label: str, records: Sequence[RunRecord]) -> None:
    row = analysis.aggregate_records(label, records)
    copy = [r.alignment.copy_rate for r in records if r.alignment is not None]
    extra = f" copy_rate={sum(copy) / len(copy):.4f}" if copy else ""
    print(
        f"{label}: n={row.n} R1={row.r1.mean:.4f} R2={row.r2.mean:.4f} RL={row.rl.mean:.4f} "
        f"failure_rate={row.failure_rate:.4f}{extra}"
    )


def cmd_oracle(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    corpus = _corpus(cfg)
    m = _budget(cfg)
    errors: list[tuple[str, str]] = []
    labels = oracle_corpus(corpus, m, cfg.token_config, errors)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "oracle.jsonl").write_text(
        "".join(json.dumps(s.to_dict(), ensure_ascii=False) + "\n" for s in labels), encoding="utf-8"
    )
    n = len(labels)
    stats = {
        "n": n,
        "m": m,
        "failures": [{"doc_id": d, "error": e} for d, e in errors],
        "mean_sentences": sum(len(s.indices) for s in labels) / n if n else 0.0,
        "r1_f1": sum(s.score.r1.f1 for s in labels) / n if n else 0.0,
        "r2_f1": sum(s.score.r2.f1 for s in labels) / n if n else 0.0,
        "rl_f1": sum(s.score.rl.f1 for s in labels) / n if n else 0.0,
    }
    (out / "oracle_summary.json").write_text(json.dumps(stats, indent=2) + "\n", encoding="utf-8")
    print(f"ORACLE: n={n} m={m} R1={stats['r1_f1']:.4f} R2={stats['r2_f1']:.4f} RL={stats['rl_f1']:.4f}")
    return EXIT_OK


def cmd_summarize(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    corpus = _corpus(cfg)
    shots = _fewshot(cfg)
    m = _budget(cfg) if cfg.schema != "abstractive" else None
    client = _client(cfg, corpus)
    kw = {"token_config": cfg.token_config, "threshold": cfg.threshold}
    if cfg.schema == "extractive":
        records = run_extractive(corpus, m, client, shots, cfg.with_reason, **kw)
    elif cfg.schema == "abstractive":
        records = run_abstractive(corpus, client, corrected=cfg.corrected_prompts, **kw)
    else:
        records = run_extract_then_generate(corpus, client, cfg.extractor, m, fewshot=shots, with_reason=cfg.with_reason, **kw)
    if cfg.geval:
        records = run_geval(records, corpus, client, corrected=cfg.corrected_prompts)
    label = _label(cfg)
    config = cfg.experiment() | {"label": label, "m": m}
    manifest = write_run(cfg.output_dir, records, corpus, config)
    _print_summary(label, records)
    if records and manifest["failure_rate"] == 1.0:
        print("error: every document failed", file=sys.stderr)
        return EXIT_BACKEND
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    corpus = _corpus(cfg)
    try:
        records = load_records(args.records)
    except OSError as exc:
        raise CorpusIOError(f"cannot read records {args.records}: {exc.strerror or exc}") from exc
    gold = {e.id: e.summary for e in corpus}
    checked, mismatches = [], 0
    for r in records:
        if r.doc_id not in gold:
            checked.append(r)
            continue
        fresh = score_pair(r.summary_text, gold[r.doc_id], cfg.token_config)
        flags = r.flags
        if r.rouge is not None and any(abs(a - b) > 1e-12 for a, b in zip(r.rouge.f1s(), fresh.f1s())):
            mismatches += 1
            flags = flags + ("rouge_recomputed",)
        checked.append(RunRecord.from_dict(r.to_dict() | {"rouge": fresh.to_dict(), "flags": list(flags)}))
    if cfg.geval:
        checked = run_geval(checked, corpus, _client(cfg, corpus), corrected=cfg.corrected_prompts)
    write_run(cfg.output_dir, checked, corpus, cfg.experiment() | {"evaluated": str(Path(args.records).name)}, name="evaluated")
    label = Path(args.records).stem
    _print_summary(label, checked)
    if mismatches:
        print(f"warning: {mismatches} stored ROUGE scores differed and were recomputed", file=sys.stderr)
    gevals = [r.geval.overall for r in checked if r.geval is not None]
    if cfg.geval:
        mean = sum(gevals) / len(gevals) if gevals else float("nan")
        print(f"G-EVAL: scored={len(gevals)}/{len(checked)} overall={mean:.4f}")
    return EXIT_OK


@dataclass(frozen=True)
class _Positions:
    indices: tuple[int, ...]
    sentence_count: int


def _load_oracle_positions(path: str) -> list[_Positions]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                out.append(_Positions(tuple(d["indices"]), d["sentence_count"]))
    return out


def _parse_record_arg(arg: str) -> tuple[str, str]:
    if "=" in arg:
        label, path = arg.split("=", 1)
        return label, path
    path = Path(arg)
    manifest = path.with_name(path.stem + ".manifest.json")
    if manifest.exists():
        label = json.loads(manifest.read_text(encoding="utf-8")).get("config", {}).get("label")
        if label:
            return label, arg
    return path.stem, arg


def _parse_edges(text: str) -> list[float]:
    try:
        return [math.inf if x.strip() in ("inf", "") else float(x) for x in text.split(",")]
    except ValueError:
        raise ConfigError(f"bad --bucket-edges {text!r}") from None


def cmd_analyze(args: argparse.Namespace) -> int:
    if not args.records:
        raise ConfigError("give at least one record file")
    labeled: dict[str, list[RunRecord]] = {}
    for arg in args.records:
        label, path = _parse_record_arg(arg)
        try:
            labeled.setdefault(label, []).extend(load_records(path))
        except OSError as exc:
            raise CorpusIOError(f"cannot read records {path}: {exc.strerror or exc}") from exc
    edges = _parse_edges(args.bucket_edges) if args.bucket_edges else list(analysis.DEFAULT_BUCKET_EDGES)
    try:
        rows = analysis.aggregate(labeled, ddof=args.ddof)
        dists = [
            analysis.position_histogram(recs, args.bins, source=label)
            for label, recs in labeled.items()
            if any(r.alignment is not None for r in recs)
        ]
        if args.oracle:
            try:
                positions = _load_oracle_positions(args.oracle)
            except OSError as exc:
                raise CorpusIOError(f"cannot read oracle file {args.oracle}: {exc.strerror or exc}") from exc
            dists.append(analysis.position_histogram(positions, args.bins, source="oracle"))
        buckets = {label: analysis.length_buckets(recs, edges, ddof=args.ddof) for label, recs in labeled.items()}
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results_table.csv").write_text(analysis.results_csv(rows), encoding="utf-8")
    (out / "position_hist.csv").write_text(analysis.histogram_csv(dists), encoding="utf-8")
    (out / "length_buckets.csv").write_text(analysis.buckets_csv(buckets), encoding="utf-8")
    first = next(iter(buckets.values()))
    report = analysis.render_report(rows, dists, first)
    (out / "report.txt").write_text(report, encoding="utf-8")
    print(report, end="")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML/JSON file mirroring the run configuration fields")
    p.add_argument("--dataset", help="dataset shape: cnn_dm, xsum, reddit, pubmed (sets the default m)")
    p.add_argument("--corpus", help="corpus JSONL (defaults to the bundled fixture for --dataset)")
    p.add_argument("--m", type=int, help="sentences to extract (overrides the dataset default)")
    p.add_argument("--sample", type=int, help="evaluate a seeded random sample of this many documents")
    p.add_argument("--seed", type=int, help=f"sampling seed (default {DEFAULT_SEED})")
    p.add_argument("--output-dir", dest="output_dir", help="directory for outputs (default ./out)")
    p.add_argument("--stemming", action="store_true", default=None, help="Porter-stem tokens before ROUGE")


def _add_backend(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", help="mock:oracle-echo|mock:lead|mock:empty|mock:script=PATH or a profile name such as openai")
    p.add_argument("--model", help="model identifier sent to the backend")
    p.add_argument("--base-url", dest="base_url", help="chat-completions base URL for HTTP profiles")
    p.add_argument("--temperature", type=float, help="sampling temperature (default 0)")
    p.add_argument("--max-tokens", dest="max_tokens", type=int, help="completion token limit (default unset)")
    p.add_argument("--cache-dir", dest="cache_dir", help="response cache directory (default ./.extsum-cache)")
    p.add_argument("--no-cache", dest="no_cache", action="store_true", default=None, help="disable the response cache")
    p.add_argument("--concurrency", type=int, help="worker pool size and max requests in flight (default 4)")
    p.add_argument("--max-retries", dest="max_retries", type=int, help="retries on timeouts, 429 and 5xx (default 5)")
    p.add_argument("--timeout", type=float, help="HTTP timeout in seconds (default 60)")
    p.add_argument("--rpm", type=int, help="requests-per-minute ceiling")
    p.add_argument("--corrected-prompts", dest="corrected_prompts", action="store_true", default=None, help="fix typos in the published prompt templates")
    p.add_argument("--geval", action="store_true", default=None, help="score summaries with the LLM judge")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="extsum", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("oracle", help="build greedy ORACLE labels")
    _add_common(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("summarize", help="run an extractive, abstractive or extract-then-generate experiment")
    _add_common(p)
    _add_backend(p)
    p.add_argument("--schema", choices=SCHEMAS, help="experiment family (default extractive)")
    p.add_argument("--k", type=int, help=f"few-shot examples, 0-{MAX_SHOTS} (default 0)")
    p.add_argument("--with-reason", dest="with_reason", action="store_true", default=None, help="use examples with reasons (explanation prompt)")
    p.add_argument("--fewshot", help="few-shot JSONL with document, summary and optional reason")
    p.add_argument("--extractor", choices=("model", "oracle"), help="stage-1 source for ext-abs (default oracle)")
    p.add_argument("--threshold", type=float, help="alignment similarity threshold (default 0.8)")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("evaluate", help="recompute ROUGE and optionally G-EVAL for a record file")
    _add_common(p)
    _add_backend(p)
    p.add_argument("--records", required=True, help="records JSONL written by summarize")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="results table, position histogram and length buckets")
    p.add_argument("records", nargs="+", help="record files, optionally as LABEL=PATH")
    p.add_argument("--oracle", help="oracle.jsonl to overlay in the position histogram")
    p.add_argument("--bins", type=int, default=10, help="position histogram bins (default 10)")
    p.add_argument("--bucket-edges", dest="bucket_edges", help="comma-separated word-count edges, e.g. 0,250,500,inf")
    p.add_argument("--ddof", type=int, default=0, choices=(0, 1), help="0 = population std (default), 1 = sample std")
    p.add_argument("--output-dir", dest="output_dir", default="out", help="directory for outputs (default ./out)")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, PipelineError, PromptError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CorpusError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ClientError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
