"""The metric itself: answer comparison and two-direction QG/QA scoring.

An example is scored by generating question/answer pairs from one side,
answering them on the other, comparing predicted and gold answers, and
averaging. Both directions (source questions answered on the hypothesis,
hypothesis questions answered on the source) contribute equally.
"""

from __future__ import annotations

import re
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

from dqe.data_model import StructuredInput, linearize
from dqe.errors import InvalidInput, MissingReference, NotSupported

if TYPE_CHECKING:
    from dqe.backends.base import AnswerPrediction, Backend, QaPair

ANSWER_NORM_VERSION = "v1"

DIRECTION_SOURCE_TO_HYP = "source_to_hyp"
DIRECTION_HYP_TO_SOURCE = "hyp_to_source"

MAX_QUESTIONS_CAP = 32

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCTUATION = set(string.punctuation)


def normalize_answer(s: str) -> str:
    """Normalize an answer string before comparison.

    Lowercase, strip all punctuation characters, drop the articles
    "a", "an", "the" as whole words, and collapse whitespace.
    """
    s = s.lower()
    s = "".join(ch for ch in s if ch not in _PUNCTUATION)
    s = _ARTICLES.sub(" ", s)
    return " ".join(s.split())


def answer_tokens(s: str) -> list[str]:
    return normalize_answer(s).split()


def token_f1(pred: str, gold: str) -> float:
    """Bag-of-tokens F1 between two normalized answer strings.

    Both sides empty after normalization is a match (1.0); exactly one
    empty is a miss (0.0).
    """
    pred_toks = answer_tokens(pred)
    gold_toks = answer_tokens(gold)
    if not pred_toks or not gold_toks:
        return float(pred_toks == gold_toks)
    common = sum((Counter(pred_toks) & Counter(gold_toks)).values())
    if common == 0:
        return 0.0
    precision = common / len(pred_toks)
    recall = common / len(gold_toks)
    return 2 * precision * recall / (precision + recall)


def contains_normalized(haystack: str, needle: str) -> bool:
    """True when the normalized needle occurs in the normalized haystack
    on whole-token boundaries."""
    norm_needle = normalize_answer(needle)
    if not norm_needle:
        return False
    return f" {norm_needle} " in f" {normalize_answer(haystack)} "


@dataclass(frozen=True)
class SimilarityStrategy:
    """How predicted and gold answers are compared.

    ``token_f1`` is exact bag-of-tokens overlap; ``embedding`` is a
    greedy token-level cosine match (F-measure) over vectors from a
    backend with the embed capability.
    """

    kind: str
    backend: "Backend | None" = None

    def __post_init__(self) -> None:
        if self.kind not in ("token_f1", "embedding"):
            raise InvalidInput(f"unknown similarity kind {self.kind!r}")
        if self.kind == "embedding" and self.backend is None:
            raise InvalidInput("embedding similarity requires a backend")

    @classmethod
    def exact(cls) -> "SimilarityStrategy":
        return cls(kind="token_f1")

    @classmethod
    def embedding(cls, backend: "Backend") -> "SimilarityStrategy":
        return cls(kind="embedding", backend=backend)

    @property
    def label(self) -> str:
        """Short tag used inside run signatures."""
        if self.kind == "token_f1":
            return "f1"
        return f"emb:{self.backend.signature.embed_id}"


def _greedy_cosine_f1(pred_vecs: list[list[float]], gold_vecs: list[list[float]]) -> float:
    def cosine(u: Sequence[float], v: Sequence[float]) -> float:
        dot = sum(a * b for a, b in zip(u, v))
        nu = sum(a * a for a in u) ** 0.5
        nv = sum(b * b for b in v) ** 0.5
        if nu == 0.0 or nv == 0.0:
            return 0.0
        return dot / (nu * nv)

    precision = sum(max(cosine(p, g) for g in gold_vecs) for p in pred_vecs) / len(pred_vecs)
    recall = sum(max(cosine(p, g) for p in pred_vecs) for g in gold_vecs) / len(gold_vecs)
    if precision + recall <= 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def answer_similarity(pred: "AnswerPrediction", gold: str, strategy: SimilarityStrategy) -> float:
    """Similarity in [0, 1] of a QA prediction against the gold answer.

    Unanswerable predictions score 0.0 under every strategy.
    """
    if not gold or not gold.strip():
        raise InvalidInput("gold answer must be non-empty")
    if pred.unanswerable:
        return 0.0
    if strategy.kind == "token_f1":
        return token_f1(pred.text, gold)

    pred_toks = answer_tokens(pred.text)
    gold_toks = answer_tokens(gold)
    if not pred_toks or not gold_toks:
        return float(pred_toks == gold_toks)
    backend = strategy.backend
    if backend is None:  # pragma: no cover - guarded in __post_init__
        raise NotSupported("embedding similarity requires a backend")
    vectors = backend.embed(list(pred_toks) + list(gold_toks))
    score = _greedy_cosine_f1(vectors[: len(pred_toks)], vectors[len(pred_toks):])
    return min(1.0, max(0.0, score))


@dataclass(frozen=True)
class QuestionOutcome:
    """One generated question, its QA prediction, and their similarity."""

    pair: "QaPair"
    prediction: "AnswerPrediction"
    similarity: float


@dataclass(frozen=True)
class DirectionScore:
    """Aggregate of one QG-then-QA pass.

    An empty question set is flagged degenerate and scores 0: a side
    that yields no questions signals pipeline failure, not perfection.
    """

    direction: str
    per_question: tuple[QuestionOutcome, ...]
    mean: float
    degenerate: bool = False

    @classmethod
    def from_outcomes(
        cls, direction: str, outcomes: Sequence[QuestionOutcome]
    ) -> "DirectionScore":
        if not outcomes:
            return cls(direction=direction, per_question=(), mean=0.0, degenerate=True)
        mean = sum(o.similarity for o in outcomes) / len(outcomes)
        return cls(direction=direction, per_question=tuple(outcomes), mean=mean)


@dataclass(frozen=True)
class Score:
    """Final metric value plus the two direction breakdowns."""

    source_to_hyp: DirectionScore
    hyp_to_source: DirectionScore
    final: float = field(init=False)
    mode: str = "data"
    signature: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "final", (self.source_to_hyp.mean + self.hyp_to_source.mean) / 2.0
        )


def default_max_questions(entry_count: int) -> int:
    """Default question budget: two per triple/row, capped at 32."""
    if entry_count < 1:
        raise InvalidInput("entry count must be positive")
    return min(2 * entry_count, MAX_QUESTIONS_CAP)


def score_direction(
    question_source: str,
    question_modality: str,
    answer_context: str,
    answer_modality: str,
    qg: "Backend",
    qa: "Backend",
    strategy: SimilarityStrategy,
    max_questions: int,
    direction: str = DIRECTION_SOURCE_TO_HYP,
) -> DirectionScore:
    """Generate questions from one side and answer them on the other.

    Each prediction is compared against the generator's own gold answer.
    An empty or whitespace-only question source produces a degenerate
    direction without touching the backends.
    """
    if not question_source.strip():
        return DirectionScore.from_outcomes(direction, ())
    pairs = qg.generate_qa_pairs(question_source, question_modality, max_questions)
    outcomes = []
    for pair in pairs:
        prediction = qa.answer(pair.question, answer_context, answer_modality)
        outcomes.append(
            QuestionOutcome(
                pair=pair,
                prediction=prediction,
                similarity=answer_similarity(prediction, pair.answer, strategy),
            )
        )
    return DirectionScore.from_outcomes(direction, outcomes)


def score_example(
    source: StructuredInput,
    hypothesis: str,
    backend: "Backend",
    *,
    mode: str = "data",
    reference: str | None = None,
    strategy: SimilarityStrategy | None = None,
    max_questions: int | None = None,
    qa_backend: "Backend | None" = None,
    signature: str = "",
) -> Score:
    """Score a hypothesis against its structured source (or reference).

    Data mode compares the hypothesis with the linearized source, using
    the data modality on the source side and the text modality on the
    hypothesis side. Text mode compares the hypothesis with the given
    reference using the text modality on both sides; the structured
    source only sets the default question budget.

    ``backend`` serves QG; QA goes to ``qa_backend`` when given, else to
    the same backend.
    """
    if mode not in ("data", "text"):
        raise InvalidInput(f"unknown scoring mode {mode!r}")
    strategy = strategy or SimilarityStrategy.exact()
    qa = qa_backend or backend
    budget = max_questions if max_questions is not None else default_max_questions(source.size)

    if mode == "data":
        source_text, source_modality = linearize(source).text, "data"
    else:
        if reference is None or not reference.strip():
            raise MissingReference(f"text mode requires a reference for {source.id!r}")
        source_text, source_modality = reference, "text"

    source_to_hyp = score_direction(
        source_text,
        source_modality,
        hypothesis,
        "text",
        backend,
        qa,
        strategy,
        budget,
        direction=DIRECTION_SOURCE_TO_HYP,
    )
    hyp_to_source = score_direction(
        hypothesis,
        "text",
        source_text,
        source_modality,
        backend,
        qa,
        strategy,
        budget,
        direction=DIRECTION_HYP_TO_SOURCE,
    )
    return Score(
        source_to_hyp=source_to_hyp,
        hyp_to_source=hyp_to_source,
        mode=mode,
        signature=signature,
    )
