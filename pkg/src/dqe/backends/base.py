"""Backend capability contract and the wire-protocol body codecs.

Every QG/QA/embedding provider implements :class:`Backend`. Implementations
must be deterministic for a fixed signature: same input, same output, so
that caching and run signatures are sound. The request/response codecs
below define the canonical JSON bodies used both by the HTTP client and by
the response cache.
"""

from __future__ import annotations

import abc
import json
from dataclasses import dataclass
from typing import Any, Sequence

from dqe.errors import InvalidInput, NotSupported, ProtocolError

PROTOCOL_VERSION = "1"

_MODALITIES = ("text", "data")


def check_modality(modality: str) -> str:
    if modality not in _MODALITIES:
        raise InvalidInput(f"unknown modality {modality!r}; expected one of {_MODALITIES}")
    return modality


def canonical_json(obj: Any) -> str:
    """Render a JSON body with sorted keys and no whitespace.

    Identical payloads always produce identical bytes; there are no
    volatile fields (timestamps, request ids) anywhere in the protocol.
    """
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass(frozen=True)
class QaPair:
    """A generated question and its gold answer."""

    question: str
    answer: str

    def __post_init__(self) -> None:
        if not self.question or not self.question.strip():
            raise InvalidInput("question must be non-empty")
        if not self.question.rstrip().endswith("?"):
            raise InvalidInput(f"question must end with '?': {self.question!r}")
        if not self.answer or not self.answer.strip():
            raise InvalidInput("answer must be non-empty")


@dataclass(frozen=True)
class AnswerPrediction:
    """A QA output; ``unanswerable`` means the context holds no answer."""

    text: str
    unanswerable: bool
    confidence: float

    def __post_init__(self) -> None:
        if self.unanswerable and self.text != "":
            raise InvalidInput("unanswerable predictions must carry empty text")
        if not self.unanswerable and not self.text:
            raise InvalidInput("answerable predictions must carry non-empty text")
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidInput(f"confidence out of range: {self.confidence}")


@dataclass(frozen=True)
class BackendSignature:
    """Identifies the model checkpoints behind each capability."""

    text_qg_id: str
    text_qa_id: str
    data_qg_id: str
    data_qa_id: str
    embed_id: str
    protocol_version: str = PROTOCOL_VERSION

    def __post_init__(self) -> None:
        for name in ("text_qg_id", "text_qa_id", "data_qg_id", "data_qa_id", "embed_id"):
            if not getattr(self, name):
                raise InvalidInput(f"backend signature field {name} is empty")

    def render(self) -> str:
        return (
            f"tqg:{self.text_qg_id}|tqa:{self.text_qa_id}"
            f"|dqg:{self.data_qg_id}|dqa:{self.data_qa_id}"
            f"|emb:{self.embed_id}|proto:{self.protocol_version}"
        )


class Backend(abc.ABC):
    """A deterministic QG/QA provider, optionally with embeddings.

    Stochastic decoding must be seeded and the seed declared in the
    signature; two calls with equal arguments must return equal results.
    """

    @property
    @abc.abstractmethod
    def signature(self) -> BackendSignature: ...

    @abc.abstractmethod
    def generate_qa_pairs(
        self, context: str, modality: str, max_questions: int
    ) -> list[QaPair]:
        """Generate at most ``max_questions`` deduplicated (question, answer) pairs."""

    @abc.abstractmethod
    def answer(self, question: str, context: str, modality: str) -> AnswerPrediction:
        """Answer a question using only the given context."""

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        """Return one fixed-dimension vector per input text."""
        raise NotSupported(f"{type(self).__name__} has no embed capability")


def dedupe_pairs(pairs: Sequence[QaPair], max_questions: int) -> list[QaPair]:
    """Drop repeated (question, answer) pairs, keep first occurrences,
    and truncate to the question budget."""
    if max_questions < 1:
        raise InvalidInput("max_questions must be positive")
    seen: set[tuple[str, str]] = set()
    out: list[QaPair] = []
    for pair in pairs:
        key = (pair.question, pair.answer)
        if key in seen:
            continue
        seen.add(key)
        out.append(pair)
        if len(out) == max_questions:
            break
    return out


# --- wire-protocol bodies (POST /qg, /qa, /embed and GET /signature) ---


def _require(payload: Any, field: str, kind: type) -> Any:
    if not isinstance(payload, dict):
        raise ProtocolError(f"body is not an object: {type(payload).__name__}")
    if field not in payload:
        raise ProtocolError(f"missing field {field!r}")
    value = payload[field]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or (kind is not bool and isinstance(value, bool)):
        raise ProtocolError(f"field {field!r} has wrong type {type(value).__name__}")
    return value


def qg_request(context: str, modality: str, max_questions: int) -> dict[str, Any]:
    return {"context": context, "modality": modality, "max_questions": max_questions}


def qg_response(pairs: Sequence[QaPair]) -> dict[str, Any]:
    return {"pairs": [{"question": p.question, "answer": p.answer} for p in pairs]}


def parse_qg_response(payload: Any) -> list[QaPair]:
    raw = _require(payload, "pairs", list)
    pairs = []
    for item in raw:
        pairs.append(
            QaPair(
                question=_require(item, "question", str),
                answer=_require(item, "answer", str),
            )
        )
    return pairs


def qa_request(question: str, context: str, modality: str) -> dict[str, Any]:
    return {"question": question, "context": context, "modality": modality}


def qa_response(prediction: AnswerPrediction) -> dict[str, Any]:
    return {
        "answer": prediction.text,
        "unanswerable": prediction.unanswerable,
        "confidence": prediction.confidence,
    }


def parse_qa_response(payload: Any) -> AnswerPrediction:
    return AnswerPrediction(
        text=_require(payload, "answer", str),
        unanswerable=_require(payload, "unanswerable", bool),
        confidence=_require(payload, "confidence", float),
    )


def embed_request(texts: Sequence[str]) -> dict[str, Any]:
    return {"texts": list(texts)}


def embed_response(vectors: Sequence[Sequence[float]]) -> dict[str, Any]:
    vecs = [[float(x) for x in v] for v in vectors]
    return {"vectors": vecs, "dim": len(vecs[0]) if vecs else 0}


def parse_embed_response(payload: Any) -> list[list[float]]:
    vectors = _require(payload, "vectors", list)
    dim = _require(payload, "dim", int)
    out = []
    for vec in vectors:
        if not isinstance(vec, list) or len(vec) != dim:
            raise ProtocolError(f"field 'vectors' entry does not match dim={dim}")
        out.append([float(x) for x in vec])
    return out


def parse_signature_response(payload: Any) -> BackendSignature:
    return BackendSignature(
        text_qg_id=_require(payload, "text_qg_id", str),
        text_qa_id=_require(payload, "text_qa_id", str),
        data_qg_id=_require(payload, "data_qg_id", str),
        data_qa_id=_require(payload, "data_qa_id", str),
        embed_id=_require(payload, "embed_id", str),
        protocol_version=_require(payload, "protocol_version", str),
    )


def signature_response(sig: BackendSignature) -> dict[str, Any]:
    return {
        "text_qg_id": sig.text_qg_id,
        "text_qa_id": sig.text_qa_id,
        "data_qg_id": sig.data_qg_id,
        "data_qa_id": sig.data_qa_id,
        "embed_id": sig.embed_id,
        "protocol_version": sig.protocol_version,
    }
