"""Fixtures: a session-scoped smoke-trained bundle and a live server."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from synthdata import SMOKE_CONFIG, ServerThread, write_squad_file, write_view_files

from dqe_server.service import ModelBundle, create_app
from dqe_server.train import load_checkpoint, train_multimodal, train_text_qa, train_text_qg


@pytest.fixture(scope="session")
def bundle_dir(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("bundle")
    squad = write_squad_file(root / "squad.json")
    qa_view, qg_view = write_view_files(root)
    train_text_qg(squad, root / "text_qg", SMOKE_CONFIG)
    train_text_qa(squad, root / "text_qa", SMOKE_CONFIG)
    train_multimodal(qa_view, qg_view, root, SMOKE_CONFIG)
    return root


@pytest.fixture(scope="session")
def bundle(bundle_dir) -> ModelBundle:
    return ModelBundle(
        text_qg=load_checkpoint(bundle_dir / "text_qg"),
        text_qa=load_checkpoint(bundle_dir / "text_qa"),
        data_qg=load_checkpoint(bundle_dir / "data_qg"),
        data_qa=load_checkpoint(bundle_dir / "data_qa"),
    )


@pytest.fixture(scope="session")
def live_server_url(bundle):
    with ServerThread(create_app(bundle)) as url:
        yield url
