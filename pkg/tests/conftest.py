"""Shared fixtures: the demo example, random dataset generators, and
call-recording / degrading backend wrappers used by cache and filter tests."""

from __future__ import annotations

import hashlib
import json
import random
from collections import Counter
from pathlib import Path
from typing import Sequence

import pytest

from dqe.backends.base import AnswerPrediction, Backend, BackendSignature, QaPair
from dqe.dataset_io import DtgExample, load_dtg_dataset
from dqe.data_model import AttributeValue, StructuredInput, Triple
from dqe.fixtures import demo_dataset_path, demo_hypotheses_path

HYP_HALLUCINATED = "james craero watson is the discoverts of james patson and he died in california ."
HYP_FAITHFUL = "james craig watson , who died of peritonitis , discovered 101 helena ."


@pytest.fixture()
def demo_dataset() -> list[DtgExample]:
    return load_dtg_dataset(demo_dataset_path())


@pytest.fixture()
def demo_example(demo_dataset) -> DtgExample:
    return demo_dataset[0]


@pytest.fixture()
def demo_hypotheses_file() -> Path:
    return demo_hypotheses_path()


class TokenFactory:
    """Produces globally unique single tokens so generated entities never
    collide across triples or examples."""

    def __init__(self) -> None:
        self._next = 0

    def token(self, prefix: str) -> str:
        self._next += 1
        return f"{prefix}{self._next}x"


def make_triple_examples(
    rng: random.Random,
    count: int,
    max_triples: int = 8,
    split: str = "train",
) -> list[DtgExample]:
    """Random triple-set examples with unique entities and predicates."""
    factory = TokenFactory()
    examples = []
    for index in range(count):
        triples = []
        for _ in range(rng.randint(1, max_triples)):
            obj = factory.token("val")
            if rng.random() < 0.5:
                obj = f"{obj} {factory.token('val')}"
            triples.append(
                Triple(
                    subject=factory.token("ent"),
                    predicate=factory.token("rel"),
                    object=obj,
                )
            )
        example_id = f"gen-{index:04d}"
        examples.append(
            DtgExample(
                id=example_id,
                input=StructuredInput(id=example_id, entries=tuple(triples)),
                references=(_reference_for(triples),),
                split=split,
            )
        )
    return examples


def _reference_for(triples: Sequence[Triple]) -> str:
    return " ".join(f"The {t.predicate} of {t.subject} is {t.object} ." for t in triples)


def make_table_example(example_id: str, rows: Sequence[tuple[str, str]]) -> DtgExample:
    entries = tuple(AttributeValue(key=k, value=v) for k, v in rows)
    return DtgExample(
        id=example_id,
        input=StructuredInput(id=example_id, entries=entries),
        references=(" ".join(f"The {k} is {v} ." for k, v in rows),),
        split="train",
    )


def write_canonical_dataset(path: Path, examples: Sequence[DtgExample]) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for example in examples:
            if example.input.is_table:
                content = {
                    "table": [
                        {"key": row.key, "value": row.value} for row in example.input.entries
                    ]
                }
            else:
                content = {
                    "triples": [
                        f"{t.subject} | {t.predicate} | {t.object}"
                        for t in example.input.entries
                    ]
                }
            record = {"id": example.id, **content, "references": list(example.references), "split": example.split}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return path


def write_hypotheses(path: Path, rows: Sequence[tuple[str, str, str]]) -> Path:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["system_id", "example_id", "hypothesis"])
        writer.writerows(rows)
    return path


class RecordingBackend(Backend):
    """Counts every call that reaches the wrapped backend."""

    def __init__(self, inner: Backend):
        self.inner = inner
        self.calls: Counter[str] = Counter()

    @property
    def signature(self) -> BackendSignature:
        return self.inner.signature

    @property
    def total_calls(self) -> int:
        return sum(self.calls.values())

    def generate_qa_pairs(self, context, modality, max_questions):
        self.calls["qg"] += 1
        return self.inner.generate_qa_pairs(context, modality, max_questions)

    def answer(self, question, context, modality):
        self.calls["qa"] += 1
        return self.inner.answer(question, context, modality)

    def embed(self, texts):
        self.calls["embed"] += 1
        return self.inner.embed(texts)


class DegradingQaBackend(Backend):
    """Wraps a QA backend and deterministically degrades a fixed share of
    its answers, keyed on the question text. Quality tiers: exact, diluted
    (extra token), unanswerable, and wrong."""

    def __init__(self, inner: Backend):
        self.inner = inner

    @property
    def signature(self) -> BackendSignature:
        return self.inner.signature

    def generate_qa_pairs(self, context, modality, max_questions):
        return self.inner.generate_qa_pairs(context, modality, max_questions)

    def answer(self, question, context, modality) -> AnswerPrediction:
        prediction = self.inner.answer(question, context, modality)
        tier = int(hashlib.sha256(question.encode()).hexdigest(), 16) % 4
        if tier == 0 or prediction.unanswerable:
            return prediction
        if tier == 1:
            return AnswerPrediction(
                text=f"{prediction.text} spurious", unanswerable=False, confidence=0.5
            )
        if tier == 2:
            return AnswerPrediction(text="", unanswerable=True, confidence=1.0)
        return AnswerPrediction(text="zzz", unanswerable=False, confidence=0.1)


def corrupt_one_object(example: DtgExample, rng: random.Random) -> str:
    """Verbalization of the example with one object replaced by a token
    absent from the table."""
    triples = list(example.input.entries)
    victim = rng.randrange(len(triples))
    sentences = []
    for index, t in enumerate(triples):
        obj = "qqcorrupt0" if index == victim else t.object
        sentences.append(f"The {t.predicate} of {t.subject} is {obj} .")
    return " ".join(sentences)


def pairs_as_tuples(pairs: Sequence[QaPair]) -> list[tuple[str, str]]:
    return [(p.question, p.answer) for p in pairs]
