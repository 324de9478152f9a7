"""Content-addressed, persistent memoization of backend calls.

Keys hash the backend signature, the operation name, and the canonical
request body; values are the canonical wire-protocol response bytes. The
store is append-only (no eviction): re-running an evaluation against an
unchanged backend issues zero backend calls and reproduces outputs to
the byte. Changing any id in the backend signature switches to a fresh
namespace, so stale hits are impossible.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping, Sequence

from dqe.backends.base import (
    AnswerPrediction,
    Backend,
    BackendSignature,
    QaPair,
    canonical_json,
    embed_request,
    embed_response,
    parse_embed_response,
    parse_qa_response,
    parse_qg_response,
    qa_request,
    qa_response,
    qg_request,
    qg_response,
)
from dqe.errors import ConsistencyError, StoreCorrupt

_MANIFEST = "manifest.tsv"


@dataclass(frozen=True)
class CacheKey:
    """Digest of (backend signature, operation, canonical request)."""

    digest: str
    namespace: str
    operation: str


@dataclass(frozen=True)
class CacheEntry:
    key: CacheKey
    value: bytes
    created_at: datetime


@dataclass(frozen=True)
class CacheStats:
    entries: int
    hits: int
    misses: int


def make_cache_key(signature: str, operation: str, request: Mapping[str, Any]) -> CacheKey:
    """Hash a request into its store location.

    The canonical rendering sorts fields and contains no volatile values,
    so equal requests always map to the same key.
    """
    namespace = hashlib.sha256(signature.encode("utf-8")).hexdigest()
    payload = "\x1f".join((signature, operation, canonical_json(dict(request))))
    digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()
    return CacheKey(digest=digest, namespace=namespace, operation=operation)


class CacheStore:
    """One directory per signature namespace, one file per entry, plus a
    manifest of (digest, operation, size) lines."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._hits = 0
        self._misses = 0
        self._manifests: dict[str, dict[str, int]] = {}

    def _entry_path(self, key: CacheKey) -> Path:
        return self.root / key.namespace / key.digest

    def _manifest_sizes(self, namespace: str) -> dict[str, int]:
        if namespace in self._manifests:
            return self._manifests[namespace]
        sizes: dict[str, int] = {}
        manifest = self.root / namespace / _MANIFEST
        if manifest.exists():
            for line in manifest.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                digest, _, size = line.split("\t")
                sizes[digest] = int(size)
        self._manifests[namespace] = sizes
        return sizes

    def get(self, key: CacheKey) -> CacheEntry | None:
        path = self._entry_path(key)
        if not path.exists():
            with self._lock:
                self._misses += 1
            return None
        value = path.read_bytes()
        with self._lock:
            expected = self._manifest_sizes(key.namespace).get(key.digest)
            if expected is not None and expected != len(value):
                raise StoreCorrupt(
                    f"entry {key.digest} has {len(value)} bytes, manifest says {expected}"
                )
            self._hits += 1
        return CacheEntry(
            key=key,
            value=value,
            created_at=datetime.fromtimestamp(path.stat().st_mtime, tz=timezone.utc),
        )

    def put(self, key: CacheKey, value: bytes) -> None:
        """Store a value; re-putting an identical value is a no-op,
        re-putting a different one is an error."""
        path = self._entry_path(key)
        with self._lock:
            if path.exists():
                if path.read_bytes() != value:
                    raise ConsistencyError(
                        f"key {key.digest} already holds a different value"
                    )
                return
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(value)
                os.replace(tmp_name, path)
            except BaseException:
                if os.path.exists(tmp_name):
                    os.unlink(tmp_name)
                raise
            with open(path.parent / _MANIFEST, "a", encoding="utf-8", newline="\n") as fh:
                fh.write(f"{key.digest}\t{key.operation}\t{len(value)}\n")
            self._manifest_sizes(key.namespace)[key.digest] = len(value)

    def stats(self) -> CacheStats:
        entries = sum(
            1
            for namespace in self.root.iterdir()
            if namespace.is_dir()
            for entry in namespace.iterdir()
            if entry.name != _MANIFEST and not entry.name.startswith(".tmp-")
        )
        with self._lock:
            return CacheStats(entries=entries, hits=self._hits, misses=self._misses)

    def namespaces(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if p.is_dir())

    def purge(self, signature: str | None = None, namespace: str | None = None) -> int:
        """Delete a whole signature namespace; returns entries removed."""
        if namespace is None:
            if signature is None:
                raise ConsistencyError("purge needs a signature or a namespace digest")
            namespace = hashlib.sha256(signature.encode("utf-8")).hexdigest()
        target = self.root / namespace
        if not target.is_dir():
            return 0
        removed = 0
        for entry in target.iterdir():
            if entry.name != _MANIFEST:
                removed += 1
            entry.unlink()
        target.rmdir()
        with self._lock:
            self._manifests.pop(namespace, None)
        return removed


class CachingBackend(Backend):
    """Memoizes another backend's calls through a CacheStore.

    Transparent by construction: values are the canonical response
    bodies, so a JSON round trip reproduces the inner backend's results
    exactly.
    """

    def __init__(self, inner: Backend, store: CacheStore):
        self._inner = inner
        self._store = store
        self._signature_string = inner.signature.render()

    @property
    def signature(self) -> BackendSignature:
        return self._inner.signature

    def _cached(self, operation: str, request: Mapping[str, Any]) -> Any | None:
        key = make_cache_key(self._signature_string, operation, request)
        entry = self._store.get(key)
        if entry is None:
            return None
        return json.loads(entry.value.decode("utf-8"))

    def _remember(self, operation: str, request: Mapping[str, Any], body: Mapping[str, Any]) -> None:
        key = make_cache_key(self._signature_string, operation, request)
        self._store.put(key, canonical_json(body).encode("utf-8"))

    def generate_qa_pairs(
        self, context: str, modality: str, max_questions: int
    ) -> list[QaPair]:
        request = qg_request(context, modality, max_questions)
        payload = self._cached("qg", request)
        if payload is not None:
            return parse_qg_response(payload)
        pairs = self._inner.generate_qa_pairs(context, modality, max_questions)
        self._remember("qg", request, qg_response(pairs))
        return pairs

    def answer(self, question: str, context: str, modality: str) -> AnswerPrediction:
        request = qa_request(question, context, modality)
        payload = self._cached("qa", request)
        if payload is not None:
            return parse_qa_response(payload)
        prediction = self._inner.answer(question, context, modality)
        self._remember("qa", request, qa_response(prediction))
        return prediction

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        request = embed_request(texts)
        payload = self._cached("embed", request)
        if payload is not None:
            return parse_embed_response(payload)
        vectors = self._inner.embed(texts)
        self._remember("embed", request, embed_response(vectors))
        return vectors
