from __future__ import annotations

import logging
import random

import pytest

from dqe.backends.base import AnswerPrediction, Backend, BackendSignature
from dqe.backends.oracle import oracle_backend
from dqe.corpus_builder import (
    FilterConfig,
    build_synthetic_corpus,
    make_training_views,
    write_training_views,
)
from dqe.dataset_io import SyntheticQaRecord, write_synthetic_corpus
from dqe.errors import BackendUnavailable, InvalidInput, InvariantViolation
from dqe.scoring import contains_normalized
from tests.conftest import DegradingQaBackend, make_triple_examples


@pytest.fixture()
def fixture_set():
    examples = make_triple_examples(random.Random(42), 12, max_triples=4)
    return examples, oracle_backend(examples)


def test_single_triple_reference_yields_two_surviving_records(demo_dataset):
    rng = random.Random(8)
    examples = make_triple_examples(rng, 1, max_triples=1)
    backend = oracle_backend(examples)
    records = build_synthetic_corpus(examples, backend, backend, FilterConfig())
    assert len(records) == 2
    assert all(r.example_id == examples[0].id for r in records)


def test_records_carry_linearization_and_reference(fixture_set):
    examples, backend = fixture_set
    records = build_synthetic_corpus(examples, backend, backend, FilterConfig())
    by_id = {e.id: e for e in examples}
    for record in records:
        example = by_id[record.example_id]
        assert record.source_description in example.references
        assert record.qg_signature == backend.signature.render()
        assert contains_normalized(record.source_description, record.answer)


def test_output_order_is_example_then_question_order(fixture_set):
    examples, backend = fixture_set
    records = build_synthetic_corpus(examples, backend, backend, FilterConfig())
    ids = [r.example_id for r in records]
    assert ids == sorted(ids, key=lambda i: [e.id for e in examples].index(i))


def test_determinism_and_byte_identical_files(fixture_set, tmp_path):
    examples, backend = fixture_set
    cfg = FilterConfig()
    first = build_synthetic_corpus(examples, backend, backend, cfg)
    second = build_synthetic_corpus(examples, backend, backend, cfg)
    assert first == second
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_synthetic_corpus(first, a, signature="s")
    write_synthetic_corpus(second, b, signature="s")
    assert a.read_bytes() == b.read_bytes()


def test_roundtrip_filter_saturates_at_impossible_threshold(fixture_set):
    examples, backend = fixture_set

    class AlwaysWrongQa(Backend):
        @property
        def signature(self) -> BackendSignature:
            return backend.signature

        def generate_qa_pairs(self, context, modality, max_questions):
            raise NotImplementedError

        def answer(self, question, context, modality):
            return AnswerPrediction(text="xyzzy", unanswerable=False, confidence=0.5)

    cfg = FilterConfig(roundtrip_enabled=True, roundtrip_threshold=1.0)
    records = build_synthetic_corpus(examples, backend, AlwaysWrongQa(), cfg)
    assert records == []


def test_filter_monotone_in_threshold(fixture_set):
    examples, backend = fixture_set
    degraded = DegradingQaBackend(backend)
    counts = []
    for threshold in (0.0, 0.3, 0.5, 0.7, 0.9, 1.0):
        cfg = FilterConfig(roundtrip_enabled=True, roundtrip_threshold=threshold)
        counts.append(len(build_synthetic_corpus(examples, backend, degraded, cfg)))
    assert counts == sorted(counts, reverse=True)
    assert counts[0] > counts[-1]  # the degradation actually bites


def test_disabled_filter_keeps_everything(fixture_set):
    examples, backend = fixture_set
    degraded = DegradingQaBackend(backend)
    all_kept = build_synthetic_corpus(
        examples, backend, degraded, FilterConfig(roundtrip_enabled=False)
    )
    strict = build_synthetic_corpus(
        examples, backend, degraded, FilterConfig(roundtrip_enabled=True, roundtrip_threshold=1.0)
    )
    assert len(all_kept) >= len(strict)


def test_no_leakage_of_linearization(fixture_set):
    examples, backend = fixture_set
    records = build_synthetic_corpus(examples, backend, backend, FilterConfig())
    for record in records:
        assert record.linearized_input not in record.question
        assert record.linearized_input not in record.answer


def test_empty_corpus_warns_not_raises(fixture_set, caplog):
    examples, backend = fixture_set

    class SilentQg(Backend):
        @property
        def signature(self) -> BackendSignature:
            return backend.signature

        def generate_qa_pairs(self, context, modality, max_questions):
            return []

        def answer(self, question, context, modality):
            raise NotImplementedError

    with caplog.at_level(logging.WARNING, logger="dqe.corpus_builder"):
        records = build_synthetic_corpus(examples, SilentQg(), backend, FilterConfig())
    assert records == []
    assert any("empty" in message for message in caplog.messages)


def test_backend_failure_tagged_with_example_id(fixture_set):
    examples, backend = fixture_set

    class FlakyQg(Backend):
        @property
        def signature(self) -> BackendSignature:
            return backend.signature

        def generate_qa_pairs(self, context, modality, max_questions):
            raise BackendUnavailable("boom")

        def answer(self, question, context, modality):
            raise NotImplementedError

    with pytest.raises(BackendUnavailable) as excinfo:
        build_synthetic_corpus(examples, FlakyQg(), backend, FilterConfig())
    assert examples[0].id in str(excinfo.value)


def test_filter_config_validation():
    with pytest.raises(InvalidInput):
        FilterConfig(roundtrip_threshold=1.5)
    with pytest.raises(InvalidInput):
        FilterConfig(max_questions_per_pair=0)
    assert FilterConfig().label == "rt0.9"
    assert FilterConfig(roundtrip_enabled=False).label == "off"


def test_training_views_compose_ctx(fixture_set):
    examples, backend = fixture_set
    records = build_synthetic_corpus(examples[:2], backend, backend, FilterConfig())
    views = make_training_views(records)
    assert len(views.qa_view) == len(views.qg_view) == len(records)
    for record, (qa_in, qa_tgt), (qg_in, qg_tgt) in zip(records, views.qa_view, views.qg_view):
        assert qa_in == f"{record.question} [CTX] {record.linearized_input}"
        assert qa_tgt == record.answer
        assert qg_in == f"{record.answer} [CTX] {record.linearized_input}"
        assert qg_tgt == record.question


def test_training_views_empty():
    views = make_training_views([])
    assert views.qa_view == () and views.qg_view == ()


def test_training_views_reject_reserved_token():
    record = SyntheticQaRecord(
        example_id="x",
        linearized_input="a [CTX] b",
        question="What is the b of a?",
        answer="c",
        source_description="c is here",
        qg_signature="s",
    )
    with pytest.raises(InvariantViolation):
        make_training_views([record])


def test_write_training_views(fixture_set, tmp_path):
    examples, backend = fixture_set
    records = build_synthetic_corpus(examples[:3], backend, backend, FilterConfig())
    views = make_training_views(records)
    qa_path, qg_path = tmp_path / "qa.tsv", tmp_path / "qg.tsv"
    write_training_views(views, qa_path, qg_path, signature="dqe|x")
    qa_lines = qa_path.read_text(encoding="utf-8").splitlines()
    assert qa_lines[0] == "# dqe|x"
    assert len(qa_lines) - 1 == len(records)
    assert all("\t" in line for line in qa_lines[1:])


def test_examples_without_reference_rejected(fixture_set):
    examples, backend = fixture_set
    stripped = [
        type(examples[0])(
            id="noref",
            input=examples[0].input,
            references=(),
            split="dev",
        )
    ]
    with pytest.raises(InvalidInput):
        build_synthetic_corpus(stripped, backend, backend, FilterConfig())
