"""Command-line entry point and the reproducibility signature facility.

Every output file begins with a "# <signature>" header line; the
signature string pins all score-affecting configuration (mode, model
ids, similarity, question budget, filter) so equal signatures plus equal
inputs reproduce outputs byte for byte. Outputs are written to a
temporary file and renamed into place, so interrupted runs never leave
truncated files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Callable, Sequence

import dqe
from dqe.backends.base import Backend, BackendSignature
from dqe.backends.oracle import oracle_backend
from dqe.backends.remote import remote_backend
from dqe.cache import CacheStore, CachingBackend
from dqe.corpus_builder import (
    FilterConfig,
    build_synthetic_corpus,
    make_training_views,
    write_view,
)
from dqe.data_model import linearize
from dqe.dataset_io import (
    DtgExample,
    load_dtg_dataset,
    load_hypotheses,
    load_ratings,
    write_synthetic_corpus,
)
from dqe.errors import ConfigError, DqeError, JoinError, ParseError
from dqe.explain import explain_example, render
from dqe.meta_eval import correlate
from dqe.scoring import (
    ANSWER_NORM_VERSION,
    Score,
    SimilarityStrategy,
    score_example,
)

CACHE_DIR_ENV = "DQE_CACHE_DIR"

_MODES = ("data", "text")
_SIMILARITIES = ("token_f1", "embedding")


@dataclass(frozen=True)
class RunConfig:
    """All run options, with explicit defaults; fully serializable."""

    mode: str = "data"
    similarity: str = "token_f1"
    backend: str = "oracle"
    max_questions: int | None = None
    roundtrip_enabled: bool = True
    roundtrip_threshold: float = 0.9
    cache_dir: str | None = None
    workers: int = 1
    timeout: float = 10.0
    retries: int = 2
    method: str = "t_test"
    report_format: str = "structured"
    dataset: str | None = None
    hypotheses: str | None = None
    ratings: str | None = None
    scores: str | None = None
    ids: tuple[str, ...] = ()
    output: str | None = None

    def __post_init__(self) -> None:
        if self.mode not in _MODES:
            raise ConfigError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.similarity not in _SIMILARITIES:
            raise ConfigError(f"similarity must be one of {_SIMILARITIES}")
        if self.max_questions is not None and self.max_questions < 1:
            raise ConfigError("max_questions must be positive")
        if not 0.0 <= self.roundtrip_threshold <= 1.0:
            raise ConfigError("roundtrip_threshold must lie in [0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def load_config_file(path: str | os.PathLike) -> dict:
    """Read a flat key-value JSON config; unknown keys are rejected."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "ids" in raw:
        raw["ids"] = tuple(raw["ids"])
    return raw


def build_run_config(file_values: dict | None, flag_values: dict) -> RunConfig:
    """Defaults, overlaid with config-file values, overlaid with flags."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    try:
        cfg = RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.cache_dir is None and os.environ.get(CACHE_DIR_ENV):
        cfg = replace(cfg, cache_dir=os.environ[CACHE_DIR_ENV])
    return cfg


def _merge_ids(primary: str, secondary: str) -> str:
    return primary if primary == secondary else f"{primary}+{secondary}"


def signature(cfg: RunConfig, backend_sig: BackendSignature) -> str:
    """Render the short version string identifying a configuration.

    Informational fields (paths, cache location, worker count) are
    excluded; everything that can change a score is included.
    """
    if cfg.mode == "data":
        qg_id = _merge_ids(backend_sig.data_qg_id, backend_sig.text_qg_id)
        qa_id = _merge_ids(backend_sig.data_qa_id, backend_sig.text_qa_id)
    else:
        qg_id = backend_sig.text_qg_id
        qa_id = backend_sig.text_qa_id
    sim = "f1" if cfg.similarity == "token_f1" else f"emb:{backend_sig.embed_id}"
    nq = "2x" if cfg.max_questions is None else str(cfg.max_questions)
    filt = (
        f"rt{cfg.roundtrip_threshold:g}" if cfg.roundtrip_enabled else "off"
    )
    return (
        f"dqe|mode:{cfg.mode}|qg:{qg_id}|qa:{qa_id}|sim:{sim}"
        f"|norm:{ANSWER_NORM_VERSION}|nq:{nq}|filt:{filt}|v:{dqe.__version__}"
    )


def _atomic_write(path: str | os.PathLike, write: Callable[[str], None]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    os.close(fd)
    try:
        write(tmp_name)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def _atomic_write_text(path: str | os.PathLike, text: str) -> None:
    def write(tmp: str) -> None:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)

    _atomic_write(path, write)


def _build_backend(cfg: RunConfig, dataset: Sequence[DtgExample]) -> Backend:
    if cfg.backend == "oracle":
        backend: Backend = oracle_backend(dataset)
    else:
        backend = remote_backend(cfg.backend, timeout=cfg.timeout, retries=cfg.retries)
    if cfg.cache_dir:
        backend = CachingBackend(backend, CacheStore(cfg.cache_dir))
    return backend


def _strategy(cfg: RunConfig, backend: Backend) -> SimilarityStrategy:
    if cfg.similarity == "token_f1":
        return SimilarityStrategy.exact()
    return SimilarityStrategy.embedding(backend)


def _require(cfg: RunConfig, *names: str) -> None:
    for name in names:
        if getattr(cfg, name) in (None, ""):
            raise ConfigError(f"missing required option --{name.replace('_', '-')}")


def _score_all(
    cfg: RunConfig, examples: dict[str, DtgExample], backend: Backend, sig: str
) -> list[tuple[str, str, str, Score]]:
    """Score every hypothesis row, in input order, with cfg.workers threads."""
    rows = load_hypotheses(cfg.hypotheses)
    missing = sorted({(s, e) for s, e, _ in rows if e not in examples})
    if missing:
        raise JoinError(
            f"{len(missing)} hypothesis rows reference unknown example ids", missing=missing
        )
    strategy = _strategy(cfg, backend)

    def one(row: tuple[str, str, str]) -> tuple[str, str, str, Score]:
        system_id, example_id, hypothesis = row
        example = examples[example_id]
        reference = example.references[0] if example.references else None
        score = score_example(
            example.input,
            hypothesis,
            backend,
            mode=cfg.mode,
            reference=reference,
            strategy=strategy,
            max_questions=cfg.max_questions,
            signature=sig,
        )
        return system_id, example_id, hypothesis, score

    if cfg.workers == 1:
        return [one(row) for row in rows]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(one, rows))


def cmd_score(cfg: RunConfig) -> str:
    _require(cfg, "dataset", "hypotheses", "output")
    dataset = load_dtg_dataset(cfg.dataset)
    backend = _build_backend(cfg, dataset)
    sig = signature(cfg, backend.signature)
    examples = {ex.id: ex for ex in dataset}
    out = io.StringIO()
    out.write(f"# {sig}\n")
    out.write("system_id,example_id,final,source_to_hyp,hyp_to_source\n")
    for system_id, example_id, _, score in _score_all(cfg, examples, backend, sig):
        out.write(
            f"{system_id},{example_id},{score.final},"
            f"{score.source_to_hyp.mean},{score.hyp_to_source.mean}\n"
        )
    _atomic_write_text(cfg.output, out.getvalue())
    return cfg.output


def cmd_explain(cfg: RunConfig) -> str:
    _require(cfg, "dataset", "hypotheses", "output")
    dataset = load_dtg_dataset(cfg.dataset)
    backend = _build_backend(cfg, dataset)
    sig = signature(cfg, backend.signature)
    examples = {ex.id: ex for ex in dataset}
    wanted = set(cfg.ids)
    blocks = []
    for system_id, example_id, hypothesis, score in _score_all(cfg, examples, backend, sig):
        if wanted and example_id not in wanted:
            continue
        example = examples[example_id]
        if cfg.mode == "data":
            context = linearize(example.input).text
        else:
            context = example.references[0]
        report = explain_example(
            score,
            example_id=f"{system_id}/{example_id}",
            hypothesis=hypothesis,
            context=context,
        )
        blocks.append(render(report, cfg.report_format))
    joiner = "\n" if cfg.report_format == "structured" else "\n\n"
    _atomic_write_text(cfg.output, f"# {sig}\n" + joiner.join(blocks) + "\n")
    return cfg.output


def cmd_build_corpus(cfg: RunConfig) -> str:
    _require(cfg, "dataset", "output")
    examples = load_dtg_dataset(cfg.dataset)
    backend = _build_backend(cfg, examples)
    sig = signature(cfg, backend.signature)
    filter_cfg = FilterConfig(
        roundtrip_enabled=cfg.roundtrip_enabled,
        roundtrip_threshold=cfg.roundtrip_threshold,
        max_questions_per_pair=cfg.max_questions or 32,
    )
    records = build_synthetic_corpus(examples, backend, backend, filter_cfg)
    views = make_training_views(records)

    output = Path(cfg.output)
    qa_path = output.with_suffix(output.suffix + ".qa.tsv")
    qg_path = output.with_suffix(output.suffix + ".qg.tsv")
    manifest_path = output.with_suffix(output.suffix + ".manifest.json")

    _atomic_write(output, lambda tmp: write_synthetic_corpus(records, tmp, signature=sig))
    _atomic_write(qa_path, lambda tmp: write_view(views.qa_view, tmp, signature=sig))
    _atomic_write(qg_path, lambda tmp: write_view(views.qg_view, tmp, signature=sig))
    manifest = {
        "signature": sig,
        "backend_signature": backend.signature.render(),
        "examples": len(examples),
        "records": len(records),
        "filter": {
            "roundtrip_enabled": filter_cfg.roundtrip_enabled,
            "roundtrip_threshold": filter_cfg.roundtrip_threshold,
            "max_questions_per_pair": filter_cfg.max_questions_per_pair,
        },
        "outputs": {"corpus": str(output), "qa_view": str(qa_path), "qg_view": str(qg_path)},
    }
    _atomic_write_text(manifest_path, f"# {sig}\n" + json.dumps(manifest, indent=2) + "\n")
    return str(output)


def read_scores_file(path: str | os.PathLike) -> tuple[dict[tuple[str, str], float], str]:
    """Parse a metric-scores CSV; returns the score map and its signature."""
    sig = "unversioned"
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            if sig == "unversioned" and line.lstrip("# ").startswith("dqe|"):
                sig = line.lstrip("# ").strip()
            continue
        body.append(line)
    reader = csv.DictReader(body)
    if reader.fieldnames is None:
        raise ParseError("scores file has no header")
    score_col = next((c for c in ("score", "final") if c in reader.fieldnames), None)
    if score_col is None or not {"system_id", "example_id"}.issubset(reader.fieldnames):
        raise ParseError("scores header must include system_id, example_id and score/final")
    scores: dict[tuple[str, str], float] = {}
    for index, row in enumerate(reader):
        try:
            scores[(row["system_id"], row["example_id"])] = float(row[score_col])
        except (TypeError, ValueError):
            raise ParseError(f"score {row.get(score_col)!r} is not numeric", index + 2) from None
    return scores, sig


def cmd_meta_eval(cfg: RunConfig) -> str:
    _require(cfg, "scores", "ratings", "output")
    scores, sig = read_scores_file(cfg.scores)
    ratings = load_ratings(cfg.ratings)
    results = correlate(scores, ratings, method=cfg.method)
    out = io.StringIO()
    out.write(f"# {sig}\n")
    out.write(f"# method: {cfg.method}\n")
    out.write("dimension,n,r,p_value,significant_at_05\n")
    for result in results:
        out.write(
            f"{result.dimension},{result.n},{result.r},{result.p_value},"
            f"{str(result.significant_at_05).lower()}\n"
        )
    _atomic_write_text(cfg.output, out.getvalue())
    return cfg.output


def cmd_cache_purge(cfg: RunConfig, sig: str | None, namespace: str | None, purge_all: bool) -> int:
    _require(cfg, "cache_dir")
    store = CacheStore(cfg.cache_dir)
    if purge_all:
        return sum(store.purge(namespace=ns) for ns in store.namespaces())
    if sig is None and namespace is None:
        raise ConfigError("cache-purge needs --signature, --namespace, or --all")
    return store.purge(signature=sig, namespace=namespace)


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key-value JSON config file")
    parser.add_argument("--mode", choices=_MODES)
    parser.add_argument("--similarity", choices=_SIMILARITIES)
    parser.add_argument("--backend", help="service URL or 'oracle'")
    parser.add_argument("--max-questions", dest="max_questions", type=int)
    parser.add_argument(
        "--roundtrip-threshold", dest="roundtrip_threshold", type=float
    )
    parser.add_argument(
        "--no-roundtrip",
        dest="roundtrip_enabled",
        action="store_const",
        const=False,
    )
    parser.add_argument("--cache-dir", dest="cache_dir")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--timeout", type=float)
    parser.add_argument("--retries", type=int)
    parser.add_argument("--output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dqe",
        description="Reference-less evaluation of data-to-text generation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_score = sub.add_parser("score", help="score hypotheses against their sources")
    _add_common_flags(p_score)
    p_score.add_argument("--dataset")
    p_score.add_argument("--hypotheses")

    p_explain = sub.add_parser("explain", help="write per-question score breakdowns")
    _add_common_flags(p_explain)
    p_explain.add_argument("--dataset")
    p_explain.add_argument("--hypotheses")
    p_explain.add_argument("--ids", help="comma-separated example ids (default: all)")
    p_explain.add_argument(
        "--format", dest="report_format", choices=("structured", "human")
    )

    p_corpus = sub.add_parser("build-corpus", help="build the synthetic QG/QA corpus")
    _add_common_flags(p_corpus)
    p_corpus.add_argument("--dataset")

    p_meta = sub.add_parser("meta-eval", help="correlate scores with human ratings")
    _add_common_flags(p_meta)
    p_meta.add_argument("--scores")
    p_meta.add_argument("--ratings")
    p_meta.add_argument("--method", choices=("t_test", "permutation"))

    p_purge = sub.add_parser("cache-purge", help="delete cache namespaces")
    p_purge.add_argument("--cache-dir", dest="cache_dir")
    p_purge.add_argument("--signature", dest="purge_signature")
    p_purge.add_argument("--namespace", dest="purge_namespace")
    p_purge.add_argument("--all", dest="purge_all", action="store_true")

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config", None)
    purge_signature = args.pop("purge_signature", None)
    purge_namespace = args.pop("purge_namespace", None)
    purge_all = args.pop("purge_all", False)
    if "ids" in args and args["ids"] is not None:
        args["ids"] = tuple(part for part in args["ids"].split(",") if part)
    try:
        file_values = load_config_file(config_path) if config_path else None
        cfg = build_run_config(file_values, args)
        if command == "score":
            print(cmd_score(cfg))
        elif command == "explain":
            print(cmd_explain(cfg))
        elif command == "build-corpus":
            print(cmd_build_corpus(cfg))
        elif command == "meta-eval":
            print(cmd_meta_eval(cfg))
        elif command == "cache-purge":
            print(cmd_cache_purge(cfg, purge_signature, purge_namespace, purge_all))
    except (DqeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
