"""Training-data readers: SQuAD-format JSON and the tab-separated
training-view files produced by the corpus builder."""

from __future__ import annotations

import json
import os
from pathlib import Path

from dqe_server.vocab import NO_ANSWER

CTX_JOINER = " [CTX] "


class ParseError(ValueError):
    """A training file is malformed."""


def load_squad(path: str | os.PathLike) -> list[tuple[str, str, str]]:
    """Flatten a SQuAD-format JSON file into (context, question, answer)
    records, first answer per question; unanswerable entries are skipped."""
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"not valid JSON: {exc.msg}") from exc
    if not isinstance(payload, dict) or "data" not in payload:
        raise ParseError("SQuAD file must hold an object with a 'data' list")
    records = []
    try:
        for article in payload["data"]:
            for paragraph in article["paragraphs"]:
                context = paragraph["context"]
                for qa in paragraph["qas"]:
                    answers = qa.get("answers", [])
                    if not answers:
                        continue
                    records.append((context, qa["question"], answers[0]["text"]))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed SQuAD structure: {exc}") from exc
    if not records:
        raise ParseError("corpus holds no answerable (context, question, answer) records")
    return records


def _load_view(path: str | os.PathLike) -> list[tuple[str, str]]:
    pairs = []
    for number, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if line.startswith("#") or not line.strip():
            continue
        if line.count("\t") != 1:
            raise ParseError(f"{path}: line {number} must hold exactly one tab")
        source, target = line.split("\t")
        if not source.strip() or not target.strip():
            raise ParseError(f"{path}: line {number} has an empty field")
        pairs.append((source, target))
    return pairs


def load_views(
    qa_path: str | os.PathLike, qg_path: str | os.PathLike
) -> tuple[list[tuple[str, str]], list[tuple[str, str]]]:
    """Read both training views; sizes must match and QA inputs must carry
    the [CTX] separator."""
    qa_pairs = _load_view(qa_path)
    qg_pairs = _load_view(qg_path)
    if not qa_pairs or not qg_pairs:
        raise ParseError("training views are empty")
    if len(qa_pairs) != len(qg_pairs):
        raise ParseError(
            f"view sizes differ: {len(qa_pairs)} QA rows vs {len(qg_pairs)} QG rows"
        )
    for source, _ in qa_pairs:
        if CTX_JOINER not in source:
            raise ParseError(f"QA input misses the separator token: {source!r}")
    return qa_pairs, qg_pairs


def with_no_answer_negatives(
    qa_pairs: list[tuple[str, str]], positives_per_negative: int = 4
) -> list[tuple[str, str]]:
    """Append no-answer pairs built by re-pairing questions with mismatched
    inputs (one negative per ``positives_per_negative`` positives)."""
    contexts = []
    for source, _ in qa_pairs:
        _, _, context = source.partition(CTX_JOINER)
        if context not in contexts:
            contexts.append(context)
    negatives = []
    if len(contexts) > 1:
        for index in range(0, len(qa_pairs), positives_per_negative):
            source, _ = qa_pairs[index]
            question, _, context = source.partition(CTX_JOINER)
            other = contexts[(contexts.index(context) + 1) % len(contexts)]
            negatives.append((f"{question}{CTX_JOINER}{other}", NO_ANSWER))
    return list(qa_pairs) + negatives
