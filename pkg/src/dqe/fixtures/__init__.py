"""Bundled demo fixture: one astronomy example with a faithful and a
hallucinated hypothesis. Serves as the canonical smoke test for the
scoring pipeline (expected finals: 1.0 faithful, 0.0 hallucinated)."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def _path(name: str) -> Path:
    with resources.as_file(resources.files(__package__).joinpath(name)) as path:
        return Path(path)


def demo_dataset_path() -> Path:
    return _path("demo_dataset.jsonl")


def demo_hypotheses_path() -> Path:
    return _path("demo_hypotheses.csv")
