"""Fine-tune one checkpoint per role and persist it with its metadata.

A checkpoint directory holds weights.pt, vocab.json, and meta.json; the
model id encodes the architecture, learning rate, epochs, seed, and a
hash of the training data, so identical runs produce identical ids.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import nn

from dqe_server.data import CTX_JOINER, load_squad, load_views, with_no_answer_negatives
from dqe_server.model import ModelConfig, Seq2Seq
from dqe_server.vocab import PAD, BOS, Vocab

ROLES = ("text_qg", "text_qa", "data_qg", "data_qa")


@dataclass(frozen=True)
class TrainConfig:
    d_model: int = 64
    nhead: int = 4
    num_layers: int = 2
    dim_feedforward: int = 128
    dropout: float = 0.1
    max_src_len: int = 96
    max_tgt_len: int = 24
    vocab_size: int = 2000
    batch_size: int = 8
    lr: float = 3e-3
    epochs: int = 1
    seed: int = 13

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LoadedModel:
    model: Seq2Seq
    vocab: Vocab
    meta: dict

    @property
    def model_id(self) -> str:
        return self.meta["model_id"]


def data_hash(pairs: list[tuple[str, str]]) -> str:
    digest = hashlib.sha256()
    for source, target in pairs:
        digest.update(source.encode("utf-8"))
        digest.update(b"\x1f")
        digest.update(target.encode("utf-8"))
        digest.update(b"\x1e")
    return digest.hexdigest()


def model_id(role: str, cfg: TrainConfig, corpus_hash: str) -> str:
    return (
        f"{role}-d{cfg.d_model}x{cfg.num_layers}-lr{cfg.lr:g}"
        f"-e{cfg.epochs}-s{cfg.seed}-{corpus_hash[:8]}"
    )


def _batches(
    pairs: list[tuple[str, str]], vocab: Vocab, cfg: TrainConfig, rng: random.Random
) -> list[tuple[torch.Tensor, torch.Tensor]]:
    order = list(range(len(pairs)))
    rng.shuffle(order)
    batches = []
    for start in range(0, len(order), cfg.batch_size):
        chunk = [pairs[i] for i in order[start : start + cfg.batch_size]]
        src_ids = [vocab.encode(s, cfg.max_src_len) for s, _ in chunk]
        tgt_ids = [[BOS] + vocab.encode(t, cfg.max_tgt_len) for _, t in chunk]
        src_len = max(len(s) for s in src_ids)
        tgt_len = max(len(t) for t in tgt_ids)
        src = torch.full((len(chunk), src_len), PAD, dtype=torch.long)
        tgt = torch.full((len(chunk), tgt_len), PAD, dtype=torch.long)
        for row, (s, t) in enumerate(zip(src_ids, tgt_ids)):
            src[row, : len(s)] = torch.tensor(s)
            tgt[row, : len(t)] = torch.tensor(t)
        batches.append((src, tgt))
    return batches


def train_pairs(
    pairs: list[tuple[str, str]], role: str, out_dir: str | Path, cfg: TrainConfig | None = None
) -> dict:
    """Train one role from (input, target) pairs and write its checkpoint.

    Returns the checkpoint metadata, including first/last batch-loss
    averages of the first epoch so callers can verify training moved.
    """
    if role not in ROLES:
        raise ValueError(f"unknown role {role!r}")
    if not pairs:
        raise ValueError("no training pairs")
    cfg = cfg or TrainConfig()
    torch.manual_seed(cfg.seed)
    torch.set_num_threads(1)
    rng = random.Random(cfg.seed)

    vocab = Vocab.build((text for pair in pairs for text in pair), max_size=cfg.vocab_size)
    model = Seq2Seq(
        ModelConfig(
            vocab_size=len(vocab),
            d_model=cfg.d_model,
            nhead=cfg.nhead,
            num_layers=cfg.num_layers,
            dim_feedforward=cfg.dim_feedforward,
            dropout=cfg.dropout,
            max_len=cfg.max_src_len + cfg.max_tgt_len + 4,
        )
    )
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    loss_fn = nn.CrossEntropyLoss(ignore_index=PAD)

    epoch_losses = []
    first_epoch_batches: list[float] = []
    model.train()
    for epoch in range(cfg.epochs):
        batch_losses = []
        for src, tgt in _batches(pairs, vocab, cfg, rng):
            optimizer.zero_grad()
            logits = model.forward(src, tgt[:, :-1])
            loss = loss_fn(logits.reshape(-1, logits.size(-1)), tgt[:, 1:].reshape(-1))
            loss.backward()
            optimizer.step()
            batch_losses.append(float(loss.detach()))
        epoch_losses.append(sum(batch_losses) / len(batch_losses))
        if epoch == 0:
            first_epoch_batches = batch_losses

    window = max(1, len(first_epoch_batches) // 5)
    corpus_hash = data_hash(pairs)
    meta = {
        "model_id": model_id(role, cfg, corpus_hash),
        "role": role,
        "seed": cfg.seed,
        "data_hash": corpus_hash,
        "examples": len(pairs),
        "config": cfg.to_dict(),
        "vocab_size": len(vocab),
        "loss_start": sum(first_epoch_batches[:window]) / window,
        "loss_end": sum(first_epoch_batches[-window:]) / window,
        "epoch_losses": epoch_losses,
    }

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), out_dir / "weights.pt")
    vocab.save(out_dir / "vocab.json")
    with open(out_dir / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
    return meta


def train_text_qg(corpus_path: str | Path, out_dir: str | Path, cfg: TrainConfig | None = None) -> dict:
    """Textual QG: '<answer> [CTX] <context>' -> question."""
    records = load_squad(corpus_path)
    pairs = [(f"{answer}{CTX_JOINER}{context}", question) for context, question, answer in records]
    return train_pairs(pairs, "text_qg", out_dir, cfg)


def train_text_qa(corpus_path: str | Path, out_dir: str | Path, cfg: TrainConfig | None = None) -> dict:
    """Textual QA: '<question> [CTX] <context>' -> answer."""
    records = load_squad(corpus_path)
    pairs = [(f"{question}{CTX_JOINER}{context}", answer) for context, question, answer in records]
    return train_pairs(pairs, "text_qa", out_dir, cfg)


def train_multimodal(
    qa_view_path: str | Path,
    qg_view_path: str | Path,
    out_dir: str | Path,
    cfg: TrainConfig | None = None,
) -> tuple[dict, dict]:
    """Fine-tune data_qg and data_qa from the synthetic training views.

    The QA model additionally sees no-answer targets on mismatched
    (question, input) pairs, one negative per four positives.
    """
    qa_pairs, qg_pairs = load_views(qa_view_path, qg_view_path)
    out_dir = Path(out_dir)
    qg_meta = train_pairs(qg_pairs, "data_qg", out_dir / "data_qg", cfg)
    qa_meta = train_pairs(with_no_answer_negatives(qa_pairs), "data_qa", out_dir / "data_qa", cfg)
    return qg_meta, qa_meta


def load_checkpoint(checkpoint_dir: str | Path) -> LoadedModel:
    checkpoint_dir = Path(checkpoint_dir)
    with open(checkpoint_dir / "meta.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    vocab = Vocab.load(checkpoint_dir / "vocab.json")
    cfg = meta["config"]
    model = Seq2Seq(
        ModelConfig(
            vocab_size=meta["vocab_size"],
            d_model=cfg["d_model"],
            nhead=cfg["nhead"],
            num_layers=cfg["num_layers"],
            dim_feedforward=cfg["dim_feedforward"],
            dropout=cfg["dropout"],
            max_len=cfg["max_src_len"] + cfg["max_tgt_len"] + 4,
        )
    )
    model.load_state_dict(torch.load(checkpoint_dir / "weights.pt", weights_only=True))
    model.eval()
    return LoadedModel(model=model, vocab=vocab, meta=meta)
