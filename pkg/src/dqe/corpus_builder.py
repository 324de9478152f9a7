"""Build a synthetic multimodal QG/QA corpus from a DTG training set.

Questions are generated from each textual description (never from the
structured input) and re-paired with the linearized source, yielding
(linearized input, question, answer) records. An optional round-trip
filter re-answers every question on the description with a text-QA
backend and drops pairs it cannot recover.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

from dqe.data_model import linearize
from dqe.dataset_io import DtgExample, SyntheticQaRecord
from dqe.errors import BackendUnavailable, InvalidInput, InvariantViolation
from dqe.scoring import contains_normalized, token_f1

if TYPE_CHECKING:
    from dqe.backends.base import Backend

log = logging.getLogger(__name__)

CTX_TOKEN = "[CTX]"
CTX_JOINER = " [CTX] "

DEFAULT_ROUNDTRIP_THRESHOLD = 0.9


@dataclass(frozen=True)
class FilterConfig:
    """Corpus-building knobs.

    ``roundtrip_threshold`` is the token-F1 the text-QA must reach when
    re-answering a generated question on its own description.
    """

    roundtrip_enabled: bool = True
    roundtrip_threshold: float = DEFAULT_ROUNDTRIP_THRESHOLD
    max_questions_per_pair: int = 32

    def __post_init__(self) -> None:
        if not 0.0 <= self.roundtrip_threshold <= 1.0:
            raise InvalidInput(f"threshold out of range: {self.roundtrip_threshold}")
        if self.max_questions_per_pair < 1:
            raise InvalidInput("max_questions_per_pair must be positive")

    @property
    def label(self) -> str:
        """Short tag used inside run signatures."""
        if not self.roundtrip_enabled:
            return "off"
        return f"rt{self.roundtrip_threshold:g}"


@dataclass(frozen=True)
class TrainingViews:
    """The same records viewed as QA and as QG training pairs."""

    qa_view: tuple[tuple[str, str], ...]
    qg_view: tuple[tuple[str, str], ...]


def build_synthetic_corpus(
    train: Sequence[DtgExample],
    text_qg: "Backend",
    text_qa: "Backend",
    cfg: FilterConfig | None = None,
) -> list[SyntheticQaRecord]:
    """Generate, filter, and re-pair QA pairs for every (input, reference).

    Output order is (example order, reference order, question order).
    Returns an empty list (with a warning) when nothing survives.
    """
    cfg = cfg or FilterConfig()
    qg_signature = text_qg.signature.render()
    records: list[SyntheticQaRecord] = []
    for example in train:
        if not example.references:
            raise InvalidInput(f"example {example.id!r} has no reference")
        linearized = linearize(example.input).text
        budget = min(2 * example.input.size, cfg.max_questions_per_pair)
        for reference in example.references:
            if not reference.strip():
                continue
            try:
                pairs = text_qg.generate_qa_pairs(reference, "text", budget)
            except BackendUnavailable as exc:
                raise BackendUnavailable(f"example {example.id!r}: {exc}") from exc
            for pair in pairs:
                # Abstractive answers cannot form valid records; skip them.
                if not contains_normalized(reference, pair.answer):
                    continue
                if cfg.roundtrip_enabled:
                    try:
                        prediction = text_qa.answer(pair.question, reference, "text")
                    except BackendUnavailable as exc:
                        raise BackendUnavailable(f"example {example.id!r}: {exc}") from exc
                    if token_f1(prediction.text, pair.answer) < cfg.roundtrip_threshold:
                        continue
                records.append(
                    SyntheticQaRecord(
                        example_id=example.id,
                        linearized_input=linearized,
                        question=pair.question,
                        answer=pair.answer,
                        source_description=reference,
                        qg_signature=qg_signature,
                    )
                )
    if not records:
        log.warning("synthetic corpus is empty: no question survived generation/filtering")
    return records


def make_training_views(records: Sequence[SyntheticQaRecord]) -> TrainingViews:
    """Compose QA inputs ("question [CTX] input" -> answer) and QG inputs
    ("answer [CTX] input" -> question) from the records, order preserved."""
    qa_view = []
    qg_view = []
    for record in records:
        for field in ("question", "answer", "linearized_input"):
            if CTX_TOKEN in getattr(record, field):
                raise InvariantViolation(
                    f"record for {record.example_id!r} contains reserved token "
                    f"{CTX_TOKEN} in {field}"
                )
        qa_view.append((f"{record.question}{CTX_JOINER}{record.linearized_input}", record.answer))
        qg_view.append((f"{record.answer}{CTX_JOINER}{record.linearized_input}", record.question))
    return TrainingViews(qa_view=tuple(qa_view), qg_view=tuple(qg_view))


def write_view(
    view: Sequence[tuple[str, str]],
    path: str | os.PathLike,
    signature: str | None = None,
) -> None:
    """Write one view as tab-separated input/target lines."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if signature:
            fh.write(f"# {signature}\n")
        for source, target in view:
            if "\t" in source or "\t" in target or "\n" in source or "\n" in target:
                raise InvariantViolation(
                    f"training pair contains a tab or newline: {source!r}"
                )
            fh.write(f"{source}\t{target}\n")


def write_training_views(
    views: TrainingViews,
    qa_path: str | os.PathLike,
    qg_path: str | os.PathLike,
    signature: str | None = None,
) -> None:
    write_view(views.qa_view, qa_path, signature)
    write_view(views.qg_view, qg_path, signature)
