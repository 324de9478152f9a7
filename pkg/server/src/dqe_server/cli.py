"""Command-line interface: train checkpoints and serve the bundle."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from typing import Sequence

import uvicorn

from dqe_server.service import create_app, load_bundle
from dqe_server.train import TrainConfig, train_multimodal, train_text_qa, train_text_qg


def _train_config(args: argparse.Namespace) -> TrainConfig:
    overrides = {
        name: getattr(args, name)
        for name in ("d_model", "num_layers", "batch_size", "lr", "epochs", "seed")
        if getattr(args, name, None) is not None
    }
    return dataclasses.replace(TrainConfig(), **overrides)


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--d-model", dest="d_model", type=int)
    parser.add_argument("--num-layers", dest="num_layers", type=int)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dqe-server")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("train-text-qg", "train the textual QG model on a SQuAD-format corpus"),
        ("train-text-qa", "train the textual QA model on a SQuAD-format corpus"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--corpus", required=True)
        p.add_argument("--out", required=True)
        _add_train_flags(p)

    p_multi = sub.add_parser(
        "train-multimodal", help="train data QG/QA models from training-view files"
    )
    p_multi.add_argument("--qa-view", required=True)
    p_multi.add_argument("--qg-view", required=True)
    p_multi.add_argument("--out", required=True)
    _add_train_flags(p_multi)

    p_serve = sub.add_parser("serve", help="serve a trained bundle")
    p_serve.add_argument("--models", required=True, help="directory with the four role checkpoints")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8040)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train-text-qg":
        meta = train_text_qg(args.corpus, args.out, _train_config(args))
    elif args.command == "train-text-qa":
        meta = train_text_qa(args.corpus, args.out, _train_config(args))
    elif args.command == "train-multimodal":
        qg_meta, qa_meta = train_multimodal(
            args.qa_view, args.qg_view, args.out, _train_config(args)
        )
        meta = {"data_qg": qg_meta["model_id"], "data_qa": qa_meta["model_id"]}
    else:
        uvicorn.run(create_app(load_bundle(args.models)), host=args.host, port=args.port)
        return 0
    json.dump(meta, sys.stdout, indent=2)
    print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
