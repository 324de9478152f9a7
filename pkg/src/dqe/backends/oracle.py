"""Deterministic template-based QG/QA backend for tests and fixtures.

The oracle speaks a closed template language. Questions take one of three
shapes ("What is the <predicate> of <subject>?", "Whose <predicate> is
<object>?", "What is the <key>?"), and :func:`template_verbalize` renders
a structured input as the matching declarative sentences. On natural text
that does not parse as template sentences, the oracle falls back to the
dataset it was built from: question generation spots known entities in
the context, and question answering returns the known answer when it
occurs (normalized) in the context. Everything is pure and seeded by
nothing, so repeated calls are byte-identical.
"""

from __future__ import annotations

import re
from typing import TYPE_CHECKING, Sequence

from dqe.backends.base import (
    AnswerPrediction,
    Backend,
    BackendSignature,
    QaPair,
    check_modality,
    dedupe_pairs,
)
from dqe.data_model import normalize_entity, split_linearized
from dqe.errors import InvalidContext, InvalidInput
from dqe.scoring import contains_normalized, normalize_answer

if TYPE_CHECKING:
    from dqe.dataset_io import DtgExample

ORACLE_ID = "oracle-v1"

_TRIPLE_SENTENCE = re.compile(r"^The (.+?) of (.+?) is (.+)$")
_TABLE_SENTENCE = re.compile(r"^The (.+?) is (.+)$")
_WHAT_OF_QUESTION = re.compile(r"^What is the (.+?) of (.+)\?$")
_WHOSE_QUESTION = re.compile(r"^Whose (.+?) is (.+)\?$")
_WHAT_KEY_QUESTION = re.compile(r"^What is the (.+)\?$")

# Entries are ("triple", subject, predicate, object) or ("row", key, value).
Entry = tuple[str, ...]


def object_question(predicate: str, subject: str) -> str:
    return f"What is the {predicate} of {subject}?"


def subject_question(predicate: str, obj: str) -> str:
    return f"Whose {predicate} is {obj}?"


def value_question(key: str) -> str:
    return f"What is the {key}?"


def template_verbalize(source) -> str:
    """Render a structured input as oracle-parseable sentences."""
    sentences = []
    for entry in _input_entries(source):
        if entry[0] == "triple":
            _, subject, predicate, obj = entry
            sentences.append(f"The {predicate} of {subject} is {obj} .")
        else:
            _, key, value = entry
            sentences.append(f"The {key} is {value} .")
    return " ".join(sentences)


def _input_entries(source) -> list[Entry]:
    if source.is_table:
        return [("row", row.key, row.value) for row in source.entries]
    return [
        (
            "triple",
            normalize_entity(t.subject),
            normalize_entity(t.predicate),
            normalize_entity(t.object),
        )
        for t in source.entries
    ]


def _entries_to_pairs(entries: Sequence[Entry]) -> list[QaPair]:
    pairs = []
    for entry in entries:
        if entry[0] == "triple":
            _, subject, predicate, obj = entry
            pairs.append(QaPair(object_question(predicate, subject), obj))
            pairs.append(QaPair(subject_question(predicate, obj), subject))
        else:
            _, key, value = entry
            pairs.append(QaPair(value_question(key), value))
    return pairs


def _parse_sentences(context: str) -> list[Entry]:
    """Extract template sentences from free text; others are skipped."""
    entries: list[Entry] = []
    for segment in re.split(r"\s*\.\s*", context):
        segment = segment.strip()
        if not segment:
            continue
        m = _TRIPLE_SENTENCE.match(segment)
        if m:
            entries.append(("triple", m.group(2), m.group(1), m.group(3)))
            continue
        m = _TABLE_SENTENCE.match(segment)
        if m:
            entries.append(("row", m.group(1), m.group(2)))
    return entries


def _interpretations(question: str) -> list[tuple[str, ...]]:
    """All template readings of a question, most specific first."""
    question = question.strip()
    readings: list[tuple[str, ...]] = []
    m = _WHAT_OF_QUESTION.match(question)
    if m:
        readings.append(("object", m.group(1), m.group(2)))
    m = _WHOSE_QUESTION.match(question)
    if m:
        readings.append(("subject", m.group(1), m.group(2)))
    m = _WHAT_KEY_QUESTION.match(question)
    if m:
        readings.append(("value", m.group(1)))
    return readings


def _lookup(readings: Sequence[tuple[str, ...]], entries: Sequence[Entry]) -> str | None:
    def same(a: str, b: str) -> bool:
        return normalize_answer(a) == normalize_answer(b)

    for reading in readings:
        for entry in entries:
            if reading[0] == "object" and entry[0] == "triple":
                _, subject, predicate, obj = entry
                if same(reading[1], predicate) and same(reading[2], subject):
                    return obj
            elif reading[0] == "subject" and entry[0] == "triple":
                _, subject, predicate, obj = entry
                if same(reading[1], predicate) and same(reading[2], obj):
                    return subject
            elif reading[0] == "value" and entry[0] == "row":
                _, key, value = entry
                if same(reading[1], key):
                    return value
    return None


class OracleBackend(Backend):
    """Exact-lookup QG/QA over the template language."""

    def __init__(self, dataset: "Sequence[DtgExample]" = ()):
        self._known: list[Entry] = []
        for example in dataset:
            self._known.extend(_input_entries(example.input))
        self._signature = BackendSignature(
            text_qg_id=ORACLE_ID,
            text_qa_id=ORACLE_ID,
            data_qg_id=ORACLE_ID,
            data_qa_id=ORACLE_ID,
            embed_id="none",
        )

    @property
    def signature(self) -> BackendSignature:
        return self._signature

    def generate_qa_pairs(
        self, context: str, modality: str, max_questions: int
    ) -> list[QaPair]:
        check_modality(modality)
        if not context.strip():
            raise InvalidInput("context must be non-empty")
        if modality == "data":
            pairs = _entries_to_pairs(self._parse_data_context(context))
        else:
            # Template sentences first, then dataset entities spotted in
            # the context (handles natural phrasings of known facts).
            pairs = _entries_to_pairs(_parse_sentences(context))
            pairs.extend(self._spot_known(context))
        return dedupe_pairs(pairs, max_questions)

    def answer(self, question: str, context: str, modality: str) -> AnswerPrediction:
        check_modality(modality)
        if not question.strip():
            raise InvalidInput("question must be non-empty")
        readings = _interpretations(question)
        found: str | None = None
        if readings and context.strip():
            if modality == "data":
                try:
                    entries = self._parse_data_context(context)
                except InvalidContext:
                    entries = []
                found = _lookup(readings, entries)
            else:
                found = _lookup(readings, _parse_sentences(context))
                if found is None:
                    expected = _lookup(readings, self._known)
                    if expected is not None and contains_normalized(context, expected):
                        found = expected
        if found is None:
            return AnswerPrediction(text="", unanswerable=True, confidence=1.0)
        return AnswerPrediction(text=found, unanswerable=False, confidence=1.0)

    @staticmethod
    def _parse_data_context(context: str) -> list[Entry]:
        try:
            fields = split_linearized(context)
        except InvalidInput as exc:
            raise InvalidContext(str(exc)) from exc
        return [
            ("triple", f[0], f[1], f[2]) if len(f) == 3 else ("row", f[0], f[1])
            for f in fields
        ]

    def _spot_known(self, context: str) -> list[QaPair]:
        haystack = f" {normalize_answer(context)} "

        def spotted(value: str) -> bool:
            needle = normalize_answer(value)
            return bool(needle) and f" {needle} " in haystack

        pairs = []
        for entry in self._known:
            if entry[0] == "triple":
                _, subject, predicate, obj = entry
                if spotted(obj):
                    pairs.append(QaPair(object_question(predicate, subject), obj))
                if spotted(subject):
                    pairs.append(QaPair(subject_question(predicate, obj), subject))
            else:
                _, key, value = entry
                if spotted(value):
                    pairs.append(QaPair(value_question(key), value))
        return pairs


def oracle_backend(dataset: "Sequence[DtgExample]" = ()) -> OracleBackend:
    """Build the deterministic oracle over a fixture dataset."""
    return OracleBackend(dataset)
