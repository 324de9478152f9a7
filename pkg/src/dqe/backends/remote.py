"""HTTP client for a QG/QA/embedding service speaking the wire protocol.

One interface call maps to exactly one request (plus retries). Request
bodies are canonical JSON, so identical inputs always produce identical
bytes on the wire. Connection failures, timeouts, and 503 (model not
loaded) are retried; 422 and malformed bodies are protocol errors and
fail immediately.
"""

from __future__ import annotations

import threading
from typing import Any, Sequence

import requests

from dqe.backends.base import (
    AnswerPrediction,
    Backend,
    BackendSignature,
    QaPair,
    canonical_json,
    check_modality,
    embed_request,
    parse_embed_response,
    parse_qa_response,
    parse_qg_response,
    parse_signature_response,
    qa_request,
    qg_request,
)
from dqe.errors import BackendUnavailable, InvalidInput, ProtocolError


class RemoteBackend(Backend):
    """Client for a remote backend service.

    The signature is fetched once at construction; an unreachable or
    non-conforming endpoint fails fast with BackendUnavailable.
    """

    def __init__(self, endpoint: str, timeout: float = 10.0, retries: int = 2):
        if retries < 0:
            raise InvalidInput("retries must be >= 0")
        self._endpoint = endpoint.rstrip("/")
        self._timeout = timeout
        self._retries = retries
        self._local = threading.local()
        self._signature = parse_signature_response(self._call("GET", "/signature", None))

    @property
    def signature(self) -> BackendSignature:
        return self._signature

    def generate_qa_pairs(
        self, context: str, modality: str, max_questions: int
    ) -> list[QaPair]:
        check_modality(modality)
        if max_questions < 1:
            raise InvalidInput("max_questions must be positive")
        payload = self._call("POST", "/qg", qg_request(context, modality, max_questions))
        return parse_qg_response(payload)

    def answer(self, question: str, context: str, modality: str) -> AnswerPrediction:
        check_modality(modality)
        if not question.strip():
            raise InvalidInput("question must be non-empty")
        payload = self._call("POST", "/qa", qa_request(question, context, modality))
        return parse_qa_response(payload)

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        if not texts:
            raise InvalidInput("embed requires at least one text")
        payload = self._call("POST", "/embed", embed_request(texts))
        return parse_embed_response(payload)

    def _session(self) -> requests.Session:
        # One session per thread: concurrent in-flight requests get
        # independent connections and timeouts.
        session = getattr(self._local, "session", None)
        if session is None:
            session = requests.Session()
            self._local.session = session
        return session

    def _call(self, method: str, path: str, body: dict[str, Any] | None) -> Any:
        url = f"{self._endpoint}{path}"
        data = canonical_json(body).encode("utf-8") if body is not None else None
        attempts = self._retries + 1
        last_error = "unknown error"
        for _ in range(attempts):
            try:
                response = self._session().request(
                    method,
                    url,
                    data=data,
                    headers={"Content-Type": "application/json"} if data else None,
                    timeout=self._timeout,
                )
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                continue
            if response.status_code == 503:
                last_error = "503 model not loaded"
                continue
            if response.status_code != 200:
                raise ProtocolError(
                    f"{method} {path} returned {response.status_code}: {response.text[:200]}"
                )
            try:
                return response.json()
            except ValueError as exc:
                raise ProtocolError(f"{method} {path} returned non-JSON body") from exc
        raise BackendUnavailable(
            f"{method} {url} failed after {attempts} attempts: {last_error}"
        )


def remote_backend(endpoint: str, timeout: float = 10.0, retries: int = 2) -> RemoteBackend:
    """Connect to a backend service, fetching its signature eagerly."""
    return RemoteBackend(endpoint, timeout=timeout, retries=retries)
