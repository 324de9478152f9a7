"""FastAPI app exposing the evaluation engine's backend wire protocol.

Endpoints: POST /qg, /qa, /embed and GET /signature. Responses are
deterministic for a fixed bundle (greedy decoding, seeded checkpoints,
canonical JSON serialization). All endpoints answer 503 until a model
bundle is loaded; malformed bodies get 422 from request validation.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from dqe_server.data import CTX_JOINER
from dqe_server.train import LoadedModel, load_checkpoint
from dqe_server.vocab import NO_ANSWER

PROTOCOL_VERSION = "1"

ROLE_DIRS = ("text_qg", "text_qa", "data_qg", "data_qa")


@dataclass
class ModelBundle:
    text_qg: LoadedModel
    text_qa: LoadedModel
    data_qg: LoadedModel
    data_qa: LoadedModel

    def for_role(self, capability: str, modality: str) -> LoadedModel:
        return getattr(self, f"{modality}_{capability}")

    @property
    def embed_model(self) -> LoadedModel:
        return self.text_qa

    def signature(self) -> dict:
        return {
            "text_qg_id": self.text_qg.model_id,
            "text_qa_id": self.text_qa.model_id,
            "data_qg_id": self.data_qg.model_id,
            "data_qa_id": self.data_qa.model_id,
            "embed_id": f"enc-{self.text_qa.model_id}",
            "protocol_version": PROTOCOL_VERSION,
        }


def load_bundle(models_dir: str | Path) -> ModelBundle:
    """Load the four role checkpoints from subdirectories of models_dir."""
    models_dir = Path(models_dir)
    loaded = {}
    for role in ROLE_DIRS:
        role_dir = models_dir / role
        if not role_dir.is_dir():
            raise FileNotFoundError(f"missing checkpoint directory {role_dir}")
        loaded[role] = load_checkpoint(role_dir)
    return ModelBundle(**loaded)


class QgRequest(BaseModel):
    context: str = Field(min_length=1)
    modality: Literal["text", "data"]
    max_questions: int = Field(ge=1)


class QaRequest(BaseModel):
    question: str = Field(min_length=1)
    context: str
    modality: Literal["text", "data"]


class EmbedRequest(BaseModel):
    texts: list[str] = Field(min_length=1)


def data_value_candidates(context: str) -> list[str]:
    """Answer candidates for a linearized input: the value slot of each
    entry, in input order."""
    candidates = []
    for segment in context.split(" [SEP] "):
        if " | " in segment:
            candidate = segment.split(" | ")[-1]
        elif " : " in segment:
            candidate = segment.partition(" : ")[2]
        else:
            candidate = segment
        candidate = candidate.strip()
        if candidate and candidate not in candidates:
            candidates.append(candidate)
    return candidates


def text_span_candidates(context: str, budget: int) -> list[str]:
    """Longest distinct tokens, first occurrence breaking ties."""
    seen: dict[str, int] = {}
    for index, token in enumerate(context.split()):
        seen.setdefault(token, index)
    ranked = sorted(seen.items(), key=lambda kv: (-len(kv[0]), kv[1]))
    return [token for token, _ in ranked[:budget]]


def _decode(loaded: LoadedModel, source: str) -> tuple[str, float]:
    cfg = loaded.meta["config"]
    src_ids = loaded.vocab.encode(source, cfg["max_src_len"])
    out_ids, mean_log_prob = loaded.model.greedy_decode(
        src_ids, max_new_tokens=cfg["max_tgt_len"]
    )
    confidence = min(1.0, max(0.0, math.exp(mean_log_prob)))
    return loaded.vocab.decode(out_ids), confidence


def create_app(bundle: ModelBundle | None = None) -> FastAPI:
    app = FastAPI(title="dqe model server", version=PROTOCOL_VERSION)
    lock = threading.Lock()

    def require_bundle() -> ModelBundle:
        if bundle is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return bundle

    @app.get("/signature")
    def signature() -> dict:
        return require_bundle().signature()

    @app.post("/qg")
    def qg(request: QgRequest) -> dict:
        if not request.context.strip():
            raise HTTPException(status_code=422, detail="context is whitespace-only")
        models = require_bundle()
        generator = models.for_role("qg", request.modality)
        if request.modality == "data":
            candidates = data_value_candidates(request.context)
        else:
            candidates = text_span_candidates(request.context, request.max_questions)
        pairs = []
        seen = set()
        with lock:
            for candidate in candidates[: request.max_questions]:
                question, _ = _decode(generator, f"{candidate}{CTX_JOINER}{request.context}")
                question = question.strip()
                if not question:
                    continue
                if not question.endswith("?"):
                    question = f"{question} ?"
                key = (question, candidate)
                if key in seen:
                    continue
                seen.add(key)
                pairs.append({"question": question, "answer": candidate})
                if len(pairs) == request.max_questions:
                    break
        return {"pairs": pairs}

    @app.post("/qa")
    def qa(request: QaRequest) -> dict:
        if not request.question.strip():
            raise HTTPException(status_code=422, detail="question is whitespace-only")
        models = require_bundle()
        answerer = models.for_role("qa", request.modality)
        with lock:
            decoded, confidence = _decode(
                answerer, f"{request.question}{CTX_JOINER}{request.context}"
            )
        tokens = decoded.split()
        if not tokens or NO_ANSWER in tokens:
            return {"answer": "", "unanswerable": True, "confidence": confidence}
        return {"answer": decoded, "unanswerable": False, "confidence": confidence}

    @app.post("/embed")
    def embed(request: EmbedRequest) -> dict:
        models = require_bundle()
        encoder = models.embed_model
        cfg = encoder.meta["config"]
        with lock:
            vectors = [
                encoder.model.encode_mean(encoder.vocab.encode(text, cfg["max_src_len"]))
                for text in request.texts
            ]
        return {"vectors": vectors, "dim": len(vectors[0])}

    return app
