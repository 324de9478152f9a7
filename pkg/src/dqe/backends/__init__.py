"""Pluggable QG/QA/embedding providers behind one capability contract."""

from dqe.backends.base import (
    AnswerPrediction,
    Backend,
    BackendSignature,
    QaPair,
    canonical_json,
)
from dqe.backends.oracle import OracleBackend, oracle_backend, template_verbalize
from dqe.backends.remote import RemoteBackend, remote_backend

__all__ = [
    "AnswerPrediction",
    "Backend",
    "BackendSignature",
    "OracleBackend",
    "QaPair",
    "RemoteBackend",
    "canonical_json",
    "oracle_backend",
    "remote_backend",
    "template_verbalize",
]
